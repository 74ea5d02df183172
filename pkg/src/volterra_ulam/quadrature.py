"""Cumulative quadrature on uniform grids and the Volterra integral operator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import (
    Grid,
    NumericDomainError,
    Problem,
    QuadOrder,
    ScalarField,
    WeightFunction,
)

QuadratureRule = QuadOrder


def _cumulative(g: np.ndarray, h: float, rule: QuadOrder) -> np.ndarray:
    """Prefix integrals along the last axis; ``out[..., 0] == 0``."""
    out = np.zeros(g.shape)
    if rule is QuadOrder.TRAPEZOID:
        out[..., 1:] = np.cumsum(0.5 * h * (g[..., :-1] + g[..., 1:]), axis=-1)
        return out
    # composite Simpson on even prefixes, one trapezoid panel on top for odd ones
    m = g.shape[-1]
    pairs = (h / 3.0) * (g[..., 0:m - 2:2] + 4.0 * g[..., 1:m - 1:2] + g[..., 2:m:2])
    out[..., 2::2] = np.cumsum(pairs, axis=-1)
    out[..., 1::2] = out[..., 0:m - 1:2] + 0.5 * h * (g[..., 0:m - 1:2] + g[..., 1::2])
    return out


def cumulative_integral(
    g: ScalarField, rule: QuadratureRule = QuadOrder.TRAPEZOID
) -> ScalarField:
    """Approximate ``t_i -> integral of g from t0 to t_i`` at every node."""
    return ScalarField(g.grid, _cumulative(g.values, g.grid.h, QuadOrder(rule)))


def second_differences(values: np.ndarray) -> np.ndarray:
    return np.abs(values[2:] - 2.0 * values[1:-1] + values[:-2])


def trapezoid_allowance(g: Union[ScalarField, np.ndarray], grid: Grid = None) -> float:
    """Trapezoid error bound ``r * h**2 * max|g''| / 12`` estimated from samples."""
    if isinstance(g, ScalarField):
        grid, g = g.grid, g.values
    return grid.r * float(np.max(second_differences(np.asarray(g)))) / 12.0


def prefix_allowance(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Per-node trapezoid error bound for the prefix integral over ``[t0, t_i]``.

    Uses ``(t_i - t0) * h**2 * max|g''| / 12`` with the second derivative
    estimated from second differences centred no further right than ``t_{i+1}``.
    """
    sd = second_differences(np.asarray(values, dtype=float))
    running = np.maximum.accumulate(sd)
    idx = np.clip(np.arange(grid.n + 1), 1, grid.n - 1) - 1
    return (grid.nodes - grid.t0) * running[idx] / 12.0


def _check_finite(values: np.ndarray, grid: Grid, bivariate: bool) -> None:
    bad = ~np.isfinite(values)
    if bivariate:
        bad &= np.tri(grid.n + 1, dtype=bool)
    if not bad.any():
        return
    if bivariate:
        i, j = map(int, np.argwhere(bad)[0])
    else:
        i = j = int(np.flatnonzero(bad)[0])
    t, s = float(grid.nodes[i]), float(grid.nodes[j])
    raise NumericDomainError(f"kernel is not finite at (t, s) = ({t!r}, {s!r})")


def kernel_matrix(p: Problem, y: ScalarField) -> np.ndarray:
    """Matrix ``F[i, j] = f(t_i, s_j, y(s_j))``; entries with ``j > i`` are zeroed."""
    t = p.grid.nodes
    F = np.array(p.kernel(t[:, None], t[None, :], y.values[None, :]), dtype=float)
    _check_finite(F, p.grid, True)
    F[~np.tri(p.grid.n + 1, dtype=bool)] = 0.0
    return F


def apply_volterra_operator(
    p: Problem, y: ScalarField, rule: QuadratureRule = QuadOrder.TRAPEZOID
) -> ScalarField:
    """Apply ``(Theta y)(t) = integral_{t0}^{t} f(.., s, y(s)) ds`` on the grid."""
    if y.grid != p.grid:
        raise ValueError("field and problem live on different grids")
    rule = QuadOrder(rule)
    grid = p.grid
    if not p.kernel.is_bivariate:
        g = np.asarray(p.kernel(grid.nodes, grid.nodes, y.values), dtype=float)
        _check_finite(g, grid, False)
        return ScalarField(grid, _cumulative(g, grid.h, rule))
    # The integrand depends on t, so every prefix is integrated separately.
    rows = _cumulative(kernel_matrix(p, y), grid.h, rule)
    return ScalarField(grid, np.diagonal(rows).copy())


def operator_allowance(p: Problem, y: ScalarField) -> float:
    """Trapezoid error bound for ``Theta y`` over the whole interval."""
    grid = p.grid
    if not p.kernel.is_bivariate:
        g = np.asarray(p.kernel(grid.nodes, grid.nodes, y.values), dtype=float)
        return trapezoid_allowance(g, grid)
    F = kernel_matrix(p, y)
    sd = np.abs(F[:, 2:] - 2.0 * F[:, 1:-1] + F[:, :-2])
    # keep only stencils lying inside each row's prefix [t0, t_i]
    rows, cols = np.indices(sd.shape)
    sd[cols + 2 > rows] = 0.0
    return grid.r * float(sd.max(initial=0.0)) / 12.0


@dataclass(frozen=True)
class WeightedIntegralReport:
    max_violation: float
    allowance: float
    passed: bool


def check_weighted_integral_inequality(
    phi: WeightFunction,
    eta: float,
    grid: Grid,
    rule: QuadratureRule = QuadOrder.TRAPEZOID,
) -> WeightedIntegralReport:
    """Check ``int phi(s) e^{eta(s-t0)} ds <= phi(t) e^{eta(t-t0)} / eta`` at every node."""
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    phi_v = phi.sample(grid).values
    growth = np.exp(eta * (grid.nodes - grid.t0))
    integrand = phi_v * growth
    lhs = _cumulative(integrand, grid.h, QuadOrder(rule))
    rhs = phi_v * growth / eta
    violation = float(np.max(lhs - rhs))
    allowance = trapezoid_allowance(integrand, grid)
    return WeightedIntegralReport(violation, allowance, violation <= allowance)
