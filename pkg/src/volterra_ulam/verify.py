"""Empirical checks of the stability statements on sampled perturbations."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import Problem, ScalarField, ToleranceConfig, WeightFunction
from .metric import bielecki_distance, bielecki_weights  # noqa: F401  (re-export)
from .quadrature import apply_volterra_operator, operator_allowance
from .solver import picard_solve, random_polynomial_field
from .stability import Certificate


class PerturbationKind(enum.Enum):
    CONSTANT_DEFECT = "constant-defect"
    SCALED_SHAPE = "scaled-shape"
    RANDOM_SMOOTH = "random-smooth"


class PerturbationError(RuntimeError):
    pass


def defect(p: Problem, y: ScalarField, tol: ToleranceConfig = ToleranceConfig()) -> ScalarField:
    """Residual ``|y - Theta y|`` at every node."""
    return abs(y - apply_volterra_operator(p, y, tol.quad_order))


def _target_values(target: Union[float, WeightFunction], p: Problem) -> np.ndarray:
    if isinstance(target, WeightFunction):
        return target.sample(p.grid).values
    return np.full(p.grid.n + 1, float(target))


def _shape(kind: PerturbationKind, p: Problem, seed: int) -> np.ndarray:
    x = p.grid.nodes - p.grid.t0
    if kind is PerturbationKind.CONSTANT_DEFECT:
        return np.ones_like(x)
    if kind is PerturbationKind.SCALED_SHAPE:
        return np.exp(0.5 * x * x)
    rng = np.random.default_rng(seed)
    field_ = random_polynomial_field(p.grid, rng)
    peak = np.max(np.abs(field_.values))
    return field_.values / peak if peak > 0 else np.ones_like(x)


def make_perturbation(
    y0: ScalarField,
    kind: Union[PerturbationKind, str],
    magnitude: float,
    seed: int,
    problem: Problem,
    target: Union[float, WeightFunction],
    tol: ToleranceConfig = ToleranceConfig(),
    max_rescalings: int = 20,
) -> ScalarField:
    """Build ``y = y0 + magnitude * shape`` whose defect stays below ``target``.

    The magnitude is halved until ``defect(y) <= target`` at every node; after
    ``max_rescalings`` halvings a :class:`PerturbationError` is raised.
    ``CONSTANT_DEFECT`` shifts by a constant, ``SCALED_SHAPE`` adds an
    ``e^{(t-t0)^2/2}`` profile and ``RANDOM_SMOOTH`` a seeded polynomial.
    """
    kind = PerturbationKind(kind)
    if not magnitude >= 0:
        raise ValueError("magnitude must be nonnegative")
    shape = _shape(kind, problem, seed)
    bound = _target_values(target, problem)
    for _ in range(max_rescalings + 1):
        y = ScalarField(y0.grid, y0.values + magnitude * shape)
        if np.all(defect(problem, y, tol).values <= bound):
            return y
        magnitude *= 0.5
    raise PerturbationError(
        f"could not reach the target defect after {max_rescalings} rescalings"
    )


@dataclass(frozen=True)
class VerifyReport:
    defect_admissible: bool
    max_defect_ratio: float
    bound_satisfied: bool
    tightness: float
    max_deviation: float
    slack: float
    converged: bool
    iterations: int

    def as_dict(self) -> dict:
        return {
            "defect_admissible": self.defect_admissible,
            "max_defect_ratio": self.max_defect_ratio,
            "bound_satisfied": self.bound_satisfied,
            "tightness": self.tightness,
            "max_deviation": self.max_deviation,
            "slack": self.slack,
            "converged": self.converged,
            "iterations": self.iterations,
        }


def verify_stability(
    p: Problem,
    y: ScalarField,
    phi: WeightFunction,
    cert: Certificate,
    tol: ToleranceConfig = ToleranceConfig(),
) -> VerifyReport:
    """Solve for ``y0`` and check ``|y - y0| <= cert bound`` node by node.

    ``phi`` is the defect weight the candidate ``y`` is held to.
    """
    if cert.eta <= p.lipschitz:
        raise ValueError("certificate eta must exceed the problem's Lipschitz constant")
    grid = p.grid
    if cert.bound_field is not None and cert.bound_field.grid == grid:
        bound = cert.bound_field.values
    else:
        bound = cert.factor * cert.weight.sample(grid).values
    phi_v = phi.sample(grid).values

    theta_y = apply_volterra_operator(p, y, tol.quad_order)
    res = np.abs(y.values - theta_y.values)
    slack = tol.verify_slack + operator_allowance(p, y)

    ratio = float(np.max(res / phi_v))
    admissible = bool(np.all(res <= phi_v + slack))

    sol = picard_solve(p, y, cert.eta, cert.weight, tol)
    dev = np.abs(y.values - sol.solution.values)
    tight = float(np.max(dev / bound))
    satisfied = bool(np.all(dev <= bound + slack))
    return VerifyReport(
        admissible, ratio, satisfied, tight, float(dev.max()), slack, sol.converged, sol.iterations
    )
