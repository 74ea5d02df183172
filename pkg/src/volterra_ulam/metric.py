"""Grid version of the exponentially weighted (Bielecki) generalized metric."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .core import Grid, ScalarField, WeightFunction


_TINY = float(np.nextafter(0.0, 1.0))


class BieleckiWeights(NamedTuple):
    decay: np.ndarray  # e^{-eta (t - t0)}
    phi: np.ndarray


def bielecki_weights(grid: Grid, eta: float, phi: WeightFunction) -> BieleckiWeights:
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    phi_v = phi.sample(grid, mono_tol=np.inf).values
    return BieleckiWeights(np.exp(-eta * (grid.nodes - grid.t0)), phi_v)


def weighted_sup(diff: np.ndarray, w: BieleckiWeights) -> float:
    d = float(np.max(np.abs(diff) * w.decay / w.phi))
    if d == 0.0 and np.any(diff):
        # a nonzero difference underflowed; distinct fields keep a positive distance
        return _TINY
    return d


def bielecki_distance(
    g1: ScalarField, g2: ScalarField, eta: float, phi: WeightFunction
) -> float:
    """Smallest C with ``|g1 - g2| e^{-eta (t - t0)} <= C phi(t)`` at every node.

    On a finite grid the infimum is attained, so this is a max of ratios.
    """
    if g1.grid != g2.grid:
        raise ValueError("fields live on different grids")
    return weighted_sup(g1.values - g2.values, bielecki_weights(g1.grid, eta, phi))
