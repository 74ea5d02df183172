"""Domain types: uniform grids, sampled fields, kernels, weights and tolerances."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class NumericDomainError(ArithmeticError):
    """A function returned a non-finite value where a finite one was required."""


class KernelTag(enum.Enum):
    STATE_ONLY = "state"  # f(s, y)
    BIVARIATE = "bivariate"  # f(t, s, y)


class QuadOrder(enum.Enum):
    TRAPEZOID = "trapezoid"
    SIMPSON = "simpson"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    """Uniform partition of ``[t0, t0 + r]`` into ``n`` subintervals."""

    t0: float
    r: float
    n: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.t0) and math.isfinite(self.r)):
            raise ValueError("grid endpoints must be finite")
        if self.r <= 0:
            raise ValueError(f"interval length r must be positive, got {self.r}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"number of subintervals n must be an integer >= 2, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        nodes = self.t0 + self.r * (np.arange(self.n + 1) / self.n)
        nodes[-1] = self.t0 + self.r
        object.__setattr__(self, "nodes", _frozen(nodes))

    @property
    def h(self) -> float:
        return self.r / self.n

    @property
    def t_end(self) -> float:
        return self.t0 + self.r

    def __len__(self) -> int:
        return self.n + 1

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.t0, self.r, self.n * factor)


def make_grid(t0: float, r: float, n: int) -> Grid:
    return Grid(float(t0), float(r), n)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real values sampled at every node of a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n + 1,):
            raise ValueError(
                f"field has shape {v.shape}, grid needs ({self.grid.n + 1},)"
            )
        bad = np.flatnonzero(~np.isfinite(v))
        if bad.size:
            i = int(bad[0])
            raise NumericDomainError(
                f"non-finite field value {v[i]} at node t={float(self.grid.nodes[i])!r}"
            )
        object.__setattr__(self, "values", _frozen(v))

    def __len__(self) -> int:
        return self.values.size

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.grid, self.values + _vals(self, other))

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.grid, self.values - _vals(self, other))

    def __mul__(self, c: float) -> "ScalarField":
        return ScalarField(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __abs__(self) -> "ScalarField":
        return ScalarField(self.grid, np.abs(self.values))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.n + 1))


def _vals(a: ScalarField, b) -> np.ndarray:
    if isinstance(b, ScalarField):
        if b.grid != a.grid:
            raise ValueError("fields live on different grids")
        return b.values
    return np.asarray(b, dtype=float)


def _evaluate(h: Callable, *args: np.ndarray) -> np.ndarray:
    # Vectorized call first; fall back to elementwise for scalar-only callables.
    shape = np.broadcast_shapes(*(np.shape(a) for a in args))
    try:
        with np.errstate(all="ignore"):
            out = np.asarray(h(*args), dtype=float)
        return np.broadcast_to(out, shape).astype(float)
    except (TypeError, ValueError):
        pass
    bargs = np.broadcast_arrays(*args)
    out = np.empty(shape)
    for idx in np.ndindex(shape):
        out[idx] = float(h(*(float(a[idx]) for a in bargs)))
    return out


def sample_function(h: Callable[[np.ndarray], np.ndarray], grid: Grid) -> ScalarField:
    """Evaluate ``h`` at the grid nodes."""
    values = _evaluate(h, grid.nodes)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        i = int(bad[0])
        raise NumericDomainError(f"function is not finite at node t={float(grid.nodes[i])!r}")
    return ScalarField(grid, values)


@dataclass(frozen=True)
class KernelForm:
    """Integrand of the Volterra operator.

    ``STATE_ONLY`` evaluators take ``(s, y)``; ``BIVARIATE`` ones take
    ``(t, s, y)``. Evaluators should accept numpy arrays and broadcast; plain
    scalar functions also work, only slower.
    """

    tag: KernelTag
    evaluator: Callable
    name: str = "custom"

    @classmethod
    def state_only(cls, f: Callable, name: str = "custom") -> "KernelForm":
        return cls(KernelTag.STATE_ONLY, f, name)

    @classmethod
    def bivariate(cls, f: Callable, name: str = "custom") -> "KernelForm":
        return cls(KernelTag.BIVARIATE, f, name)

    @property
    def is_bivariate(self) -> bool:
        return self.tag is KernelTag.BIVARIATE

    def __call__(self, t, s, y) -> np.ndarray:
        """Evaluate as ``f(t, s, y)``; state-only kernels ignore ``t``."""
        if self.is_bivariate:
            return _evaluate(self.evaluator, t, s, y)
        s, y = np.broadcast_arrays(s, y)
        out = _evaluate(self.evaluator, s, y)
        return np.broadcast_to(out, np.broadcast_shapes(np.shape(t), out.shape))


@dataclass(frozen=True)
class Problem:
    kernel: KernelForm
    grid: Grid
    lipschitz: float
    lipschitz_source: str = "declared"  # or "empirical-L"

    def __post_init__(self):
        if not (self.lipschitz > 0 and math.isfinite(self.lipschitz)):
            raise ValueError(f"Lipschitz constant must be positive, got {self.lipschitz}")

    @property
    def r(self) -> float:
        return self.grid.r


class WeightKind(enum.Enum):
    CONSTANT = "constant"
    GENERAL = "general"


@dataclass(frozen=True)
class WeightFunction:
    """Positive nondecreasing weight phi(t) on the interval."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    kind: WeightKind = WeightKind.GENERAL
    epsilon: Optional[float] = None
    name: str = "custom"

    @classmethod
    def constant(cls, eps: float) -> "WeightFunction":
        eps = float(eps)
        if not eps > 0:
            raise ValueError(f"constant weight must be positive, got {eps}")
        return cls(lambda t: np.full(np.shape(t), eps), WeightKind.CONSTANT, eps, f"const({eps!r})")

    @classmethod
    def general(cls, f: Callable, name: str = "custom") -> "WeightFunction":
        return cls(f, WeightKind.GENERAL, None, name)

    def __call__(self, t) -> np.ndarray:
        return _evaluate(self.evaluator, np.asarray(t, dtype=float))

    def sample(self, grid: Grid, mono_tol: float = 1e-12) -> ScalarField:
        """Sample on ``grid``, checking positivity and monotonicity."""
        phi = sample_function(self, grid)
        v = phi.values
        if np.any(v <= 0):
            i = int(np.flatnonzero(v <= 0)[0])
            raise ValueError(f"weight {self.name} is not positive at t={float(grid.nodes[i])!r}")
        drops = np.flatnonzero(np.diff(v) < -mono_tol)
        if drops.size:
            i = int(drops[0])
            raise ValueError(
                f"weight {self.name} decreases between t={float(grid.nodes[i])!r} and t={float(grid.nodes[i + 1])!r}"
            )
        return phi


NAMED_WEIGHTS = {
    "exp": lambda t: np.exp(t),
    "one": lambda t: np.ones_like(t),
    "1+t^2": lambda t: 1.0 + t * t,
}


def named_weight(name: str) -> WeightFunction:
    try:
        return WeightFunction.general(NAMED_WEIGHTS[name], name)
    except KeyError:
        raise ValueError(f"unknown weight {name!r}; choose from {sorted(NAMED_WEIGHTS)}") from None


@dataclass(frozen=True)
class ToleranceConfig:
    picard_tol: float = 1e-12
    max_iter: int = 200
    quad_order: QuadOrder = QuadOrder.TRAPEZOID
    mono_tol: float = 1e-12
    verify_slack: float = 1e-8

    def __post_init__(self):
        if not self.picard_tol > 0:
            raise ValueError("picard_tol must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")
        if self.mono_tol < 0 or self.verify_slack < 0:
            raise ValueError("mono_tol and verify_slack must be nonnegative")
        if not isinstance(self.quad_order, QuadOrder):
            object.__setattr__(self, "quad_order", QuadOrder(self.quad_order))
