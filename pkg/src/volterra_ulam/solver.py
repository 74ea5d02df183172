"""Successive approximation for both Volterra forms, plus a marching oracle."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .core import (
    Grid,
    NumericDomainError,
    Problem,
    ScalarField,
    ToleranceConfig,
    WeightFunction,
)
from .metric import bielecki_distance, bielecki_weights, weighted_sup
from .quadrature import apply_volterra_operator, prefix_allowance

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveResult:
    solution: ScalarField
    iterations: int
    final_step_distance: float
    converged: bool
    eta_used: float


def _require_contraction(p: Problem, eta: float) -> None:
    if not eta > p.lipschitz:
        raise ValueError(
            f"eta={eta} must exceed the Lipschitz constant L={p.lipschitz}; "
            "otherwise the operator is not certified to contract"
        )


def picard_solve(
    p: Problem,
    y_init: ScalarField,
    eta: float,
    phi: WeightFunction,
    tol: ToleranceConfig = ToleranceConfig(),
) -> SolveResult:
    """Iterate ``y <- Theta y`` until successive iterates are within
    ``tol.picard_tol`` in the weighted distance.

    Running out of iterations is reported through ``converged=False``.
    """
    _require_contraction(p, eta)
    if y_init.grid != p.grid:
        raise ValueError("initial field and problem live on different grids")
    w = bielecki_weights(p.grid, eta, phi)
    y = y_init
    step = np.inf
    for k in range(1, tol.max_iter + 1):
        y_next = apply_volterra_operator(p, y, tol.quad_order)
        step = weighted_sup(y_next.values - y.values, w)
        y = y_next
        if step <= tol.picard_tol:
            return SolveResult(y, k, step, True, eta)
    log.warning("Picard iteration stopped after %d steps at distance %.3e", tol.max_iter, step)
    return SolveResult(y, tol.max_iter, step, False, eta)


def _solve_diagonal(A: float, c: float, F, guess: float, t: float) -> float:
    # z = A + c F(z); contracts when c * L < 1
    z = guess
    for _ in range(200):
        z_new = A + c * F(z)
        if not np.isfinite(z_new):
            break
        if abs(z_new - z) <= 1e-15 * max(1.0, abs(z_new)):
            return z_new
        z = z_new
    try:
        z = optimize.newton(lambda x: x - A - c * F(x), guess, tol=1e-15, maxiter=100)
    except (RuntimeError, OverflowError) as exc:
        raise NumericDomainError(f"implicit trapezoid step diverged at node t={float(t)!r}") from exc
    if not np.isfinite(z):
        raise NumericDomainError(f"implicit trapezoid step diverged at node t={float(t)!r}")
    return float(z)


def stepping_solve(p: Problem, grid: Grid = None) -> ScalarField:
    """March node by node through the trapezoid discretization.

    At each node the unknown appears in the last quadrature weight; that
    scalar equation is solved by fixed-point iteration with a secant fallback.
    """
    if grid is not None and grid != p.grid:
        p = Problem(p.kernel, grid, p.lipschitz, p.lipschitz_source)
    grid = p.grid
    h, t = grid.h, grid.nodes
    if h * p.lipschitz / 2 >= 1:
        raise ValueError(f"step h={h} too large for L={p.lipschitz}: need h*L/2 < 1")
    kern = p.kernel
    y = np.zeros(grid.n + 1)

    def f(ti, si, z):
        return float(kern(ti, si, z))

    if not kern.is_bivariate:
        acc = 0.5 * h * f(t[0], t[0], y[0])
        for i in range(1, grid.n + 1):
            y[i] = _solve_diagonal(acc, 0.5 * h, lambda z: f(t[i], t[i], z), y[i - 1], t[i])
            acc += h * f(t[i], t[i], y[i])
    else:
        for i in range(1, grid.n + 1):
            row = np.asarray(kern(t[i], t[:i], y[:i]), dtype=float)
            if not np.all(np.isfinite(row)):
                j = int(np.flatnonzero(~np.isfinite(row))[0])
                raise NumericDomainError(
                    f"kernel is not finite at (t, s) = ({float(t[i])!r}, {float(t[j])!r})"
                )
            acc = h * (0.5 * row[0] + row[1:].sum())
            y[i] = _solve_diagonal(acc, 0.5 * h, lambda z: f(t[i], t[i], z), y[i - 1], t[i])
    return ScalarField(grid, y)


def random_polynomial_field(grid: Grid, rng: np.random.Generator, degree: int = 5) -> ScalarField:
    """Polynomial in ``(t - t0) / r`` with coefficients uniform in [-1, 1]."""
    coeffs = rng.uniform(-1.0, 1.0, size=int(rng.integers(0, degree + 1)) + 1)
    x = (grid.nodes - grid.t0) / grid.r
    return ScalarField(grid, np.polynomial.polynomial.polyval(x, coeffs))


def contraction_allowance(p: Problem, eta: float, phi: WeightFunction) -> float:
    """Discretization slack on top of ``L / eta`` for the measured contraction factor.

    The discrete operator satisfies the continuous estimate up to the trapezoid
    error of ``phi(s) e^{eta (s - t0)}`` on each prefix, rescaled by the node weight.
    """
    grid = p.grid
    phi_v = phi.sample(grid, mono_tol=np.inf).values
    growth = np.exp(eta * (grid.nodes - grid.t0))
    err = prefix_allowance(phi_v * growth, grid)
    return float(p.lipschitz * np.max(err / (growth * phi_v)))


def estimate_contraction_factor(
    p: Problem,
    eta: float,
    phi: WeightFunction,
    trials: int = 50,
    seed: int = 0,
    tol: ToleranceConfig = ToleranceConfig(),
) -> float:
    """Largest observed ``d(Theta g1, Theta g2) / d(g1, g2)`` over random polynomial pairs."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    w = bielecki_weights(p.grid, eta, phi)
    worst = 0.0
    for _ in range(trials):
        g1 = random_polynomial_field(p.grid, rng)
        g2 = random_polynomial_field(p.grid, rng)
        d = weighted_sup(g1.values - g2.values, w)
        if d == 0.0:
            continue
        t1 = apply_volterra_operator(p, g1, tol.quad_order)
        t2 = apply_volterra_operator(p, g2, tol.quad_order)
        worst = max(worst, weighted_sup(t1.values - t2.values, w) / d)
    return worst


@dataclass(frozen=True)
class APosterioriCheck:
    distance_to_solution: float
    bound: float
    allowance: float

    @property
    def holds(self) -> bool:
        return self.distance_to_solution <= self.bound + self.allowance


def a_posteriori_check(
    p: Problem,
    y: ScalarField,
    solution: SolveResult,
    phi: WeightFunction,
    tol: ToleranceConfig = ToleranceConfig(),
) -> APosterioriCheck:
    """Compare ``d(y, y*)`` with ``d(Theta y, y) / (1 - L/eta)``.

    The allowance accounts for the discrete contraction factor exceeding
    ``L/eta`` by at most :func:`contraction_allowance`, and for the Picard
    truncation of ``y*``.
    """
    eta = solution.eta_used
    lam = p.lipschitz / eta
    step = bielecki_distance(apply_volterra_operator(p, y, tol.quad_order), y, eta, phi)
    dist = bielecki_distance(y, solution.solution, eta, phi)
    a = contraction_allowance(p, eta, phi)
    lam_h = min(lam + a, 1.0 - 1e-12)
    slack = step * (1.0 / (1.0 - lam_h) - 1.0 / (1.0 - lam))
    slack += solution.final_step_distance / (1.0 - lam_h)
    return APosterioriCheck(dist, step / (1.0 - lam), slack)
