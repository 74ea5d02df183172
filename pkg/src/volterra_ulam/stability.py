"""Stability certificates, the optimal exponential weight and the classical conditions."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    Grid,
    KernelForm,
    QuadOrder,
    ScalarField,
    WeightFunction,
)
from .quadrature import cumulative_integral

log = logging.getLogger(__name__)


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value


def bound_factor(L: float, r: float, eta: float) -> float:
    """``e^{eta r} / (1 - L/eta)``, infinite for ``eta <= L``."""
    if eta <= L:
        return math.inf
    return math.exp(eta * r) / (1.0 - L / eta)


def optimal_eta(L: float, r: float) -> float:
    """Minimizer of :func:`bound_factor` over ``eta > L``.

    Setting the derivative of ``eta r + log eta - log(eta - L)`` to zero gives
    ``eta (eta - L) = L / r``, whose root above ``L`` is returned.
    """
    L = _positive("Lipschitz constant L", L)
    r = _positive("interval length r", r)
    return 0.5 * (L + math.sqrt(L * L + 4.0 * L / r))


@dataclass(frozen=True, eq=False)
class Certificate:
    """Bound ``|y - y0|(t) <= factor * phi(t)`` valid for every ``eta > L``."""

    eta: float
    lipschitz: float
    r: float
    factor: float
    weight: WeightFunction
    bound_field: Optional[ScalarField] = None
    lipschitz_source: str = "declared"

    def __post_init__(self):
        if not self.eta > self.lipschitz:
            raise ValueError("certificate requires eta > L")
        if self.bound_field is not None and np.any(self.bound_field.values <= 0):
            raise ValueError("certificate bound must be strictly positive")

    @property
    def form(self) -> str:
        return "HU" if self.epsilon is not None else "HUR"

    @property
    def epsilon(self) -> Optional[float]:
        return self.weight.epsilon

    def bound_at(self, t) -> np.ndarray:
        return self.factor * self.weight(t)


def _check_eta(L: float, eta: float) -> None:
    if not eta > L:
        raise ValueError(
            f"eta={eta} violates the hypothesis eta > L (L={L}); the certificate needs eta > L"
        )


def hur_bound(
    phi: WeightFunction,
    L: float,
    grid: Grid,
    eta: Optional[float] = None,
    lipschitz_source: str = "declared",
    mono_tol: float = 1e-12,
) -> Certificate:
    """Hyers-Ulam-Rassias certificate for weight ``phi`` on ``grid``."""
    L = _positive("Lipschitz constant L", L)
    eta = optimal_eta(L, grid.r) if eta is None else float(eta)
    _check_eta(L, eta)
    factor = bound_factor(L, grid.r, eta)
    phi_v = phi.sample(grid, mono_tol)
    return Certificate(eta, L, grid.r, factor, phi, factor * phi_v, lipschitz_source)


def hu_bound(
    eps: float,
    L: float,
    r: float,
    eta: Optional[float] = None,
    grid: Optional[Grid] = None,
    lipschitz_source: str = "declared",
) -> Certificate:
    """Hyers-Ulam certificate: constant bound ``eps * factor``."""
    eps = _positive("epsilon", eps)
    L = _positive("Lipschitz constant L", L)
    r = _positive("interval length r", r)
    if grid is not None and not math.isclose(grid.r, r, rel_tol=1e-15):
        raise ValueError("grid length does not match r")
    eta = optimal_eta(L, r) if eta is None else float(eta)
    _check_eta(L, eta)
    factor = bound_factor(L, r, eta)
    phi = WeightFunction.constant(eps)
    field_ = None if grid is None else factor * phi.sample(grid)
    return Certificate(eta, L, r, factor, phi, field_, lipschitz_source)


def hu_bound_value(cert: Certificate) -> float:
    if cert.epsilon is None:
        raise ValueError("not a Hyers-Ulam certificate")
    return cert.factor * cert.epsilon


def minimal_K(
    phi: WeightFunction, grid: Grid, rule: QuadOrder = QuadOrder.TRAPEZOID
) -> float:
    """Smallest K with ``|int_{t0}^{t} phi| <= K phi(t)`` at every node."""
    phi_v = phi.sample(grid, mono_tol=np.inf)
    if np.any(phi_v.values <= 0):
        raise ValueError("weight must be positive")
    # abs() kept for fidelity; for phi > 0 and t >= t0 it is a no-op
    integral = np.abs(cumulative_integral(phi_v, rule).values)
    return float(np.max(integral / phi_v.values))


@dataclass(frozen=True)
class ClassicReport:
    lr_product: float
    hu_applicable: bool
    k_min: Optional[float] = None
    kl_product: Optional[float] = None
    hur_applicable: Optional[bool] = None
    k_candidate: Optional[float] = None
    k_candidate_admissible: Optional[bool] = None
    k_candidate_kl: Optional[float] = None
    notes: tuple = field(default=())


def check_classic_conditions(
    L: float,
    grid: Grid,
    phi: Optional[WeightFunction] = None,
    K: Optional[float] = None,
    rule: QuadOrder = QuadOrder.TRAPEZOID,
) -> ClassicReport:
    """Evaluate the older sufficient conditions ``L r < 1`` and
    ``int phi <= K phi`` with ``K L < 1``.

    ``K`` optionally names a specific constant to test alongside the minimal one.
    """
    lr = L * grid.r
    notes = [
        "classical HU condition uses the interval [a-r, a+r]; here I = [t0, t0+r]",
    ]
    if lr >= 1:
        notes.append(f"L*r = {lr:g} >= 1: the classical Hyers-Ulam result does not apply")
    if phi is None:
        return ClassicReport(lr, lr < 1, notes=tuple(notes))
    k_min = minimal_K(phi, grid, rule)
    kl = k_min * L
    if kl >= 1:
        notes.append(f"K_min*L = {kl:g} >= 1: no K satisfies both classical HUR conditions")
    cand = adm = cand_kl = None
    if K is not None:
        cand = float(K)
        adm = cand >= k_min
        cand_kl = cand * L
    return ClassicReport(lr, lr < 1, k_min, kl, kl < 1, cand, adm, cand_kl, tuple(notes))


def estimate_lipschitz(
    kernel: KernelForm,
    grid: Grid,
    y_box: Sequence[float],
    samples: int = 10_000,
    seed: int = 0,
) -> float:
    """Largest sampled difference quotient ``|f(., y1) - f(., y2)| / |y1 - y2|``.

    This is a lower estimate of the true Lipschitz constant, not a certified one.
    """
    y_lo, y_hi = map(float, y_box)
    if not y_lo < y_hi:
        raise ValueError("y_box must satisfy y_lo < y_hi")
    if samples < 2:
        raise ValueError("samples must be >= 2")
    rng = np.random.default_rng(seed)
    t = rng.choice(grid.nodes, size=samples)
    s = rng.choice(grid.nodes, size=samples)
    y1 = rng.uniform(y_lo, y_hi, size=samples)
    y2 = rng.uniform(y_lo, y_hi, size=samples)
    keep = y1 != y2
    t, s, y1, y2 = t[keep], s[keep], y1[keep], y2[keep]
    if kernel.is_bivariate:
        f1, f2 = kernel(t, s, y1), kernel(t, s, y2)
    else:
        f1, f2 = kernel(s, s, y1), kernel(s, s, y2)
    q = np.abs(f1 - f2) / np.abs(y1 - y2)
    q = q[np.isfinite(q)]
    est = float(q.max()) if q.size else 0.0
    log.warning("Lipschitz constant %.6g is an empirical lower estimate, not certified", est)
    return est
