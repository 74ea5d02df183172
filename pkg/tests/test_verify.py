import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import preset_problem
from oracles import max_on_interval, quad
from volterra_ulam.core import (
    ScalarField,
    WeightFunction,
    make_grid,
    named_weight,
    sample_function,
)
from volterra_ulam.quadrature import operator_allowance
from volterra_ulam.solver import picard_solve, stepping_solve
from volterra_ulam.stability import hu_bound, hur_bound
from volterra_ulam.verify import (
    PerturbationError,
    PerturbationKind,
    bielecki_distance,
    defect,
    make_perturbation,
    verify_stability,
)

ETA = 1 + math.sqrt(2)


def test_defect_of_exact_solution(jung):
    assert not defect(jung, ScalarField.zeros(jung.grid)).values.any()


def test_defect_of_scaled_shape(jung):
    eps = 0.01
    y = sample_function(lambda t: eps * np.exp(t * t / 2), jung.grid)
    d = defect(jung, y).values
    # continuous oracle: eps e^{t^2/2} - int_0^t s eps e^{s^2/2} ds = eps
    t = 1.3
    assert eps * math.exp(t * t / 2) - quad(lambda s: s * eps * math.exp(s * s / 2), 0, t) \
        == pytest.approx(eps, abs=1e-14)
    np.testing.assert_allclose(d, eps, rtol=0, atol=operator_allowance(jung, y))
    assert np.all(d <= eps)  # trapezoid over-integrates this convex integrand


def test_defect_of_marching_solution(growth):
    assert defect(growth, stepping_solve(growth)).values.max() <= 1e-10


def test_distance_identity_and_normalization():
    g = make_grid(0, 2, 100)
    phi = named_weight("exp")
    a = sample_function(np.sin, g)
    assert bielecki_distance(a, a, 1.7, phi) == 0
    d = sample_function(lambda t: np.exp(1.7 * t) * np.exp(t), g)
    assert bielecki_distance(a + d, a, 1.7, phi) == pytest.approx(1.0, abs=1e-15)


def test_distance_example():
    g = make_grid(0, 2, 1000)
    d = bielecki_distance(sample_function(lambda t: t, g), ScalarField.zeros(g), 1.0,
                          WeightFunction.constant(1.0))
    ref = max_on_interval(lambda t: t * np.exp(-t), 0, 2)
    assert ref == pytest.approx(math.exp(-1), abs=1e-12)
    assert d == pytest.approx(ref, abs=1e-15)


def test_distance_grid_mismatch():
    with pytest.raises(ValueError):
        bielecki_distance(ScalarField.zeros(make_grid(0, 1, 4)), ScalarField.zeros(make_grid(0, 1, 5)),
                          1.0, WeightFunction.constant(1.0))


def _inf_over_C(a, b, eta, phi):
    """Smallest candidate C satisfying every nodal constraint."""
    g = a.grid
    lhs = np.abs(a.values - b.values) * np.exp(-eta * (g.nodes - g.t0))
    phi_v = phi.sample(g).values
    candidates = np.sort(np.concatenate([[0.0], lhs / phi_v]))
    if not np.array_equal(a.values, b.values):
        # distinct fields need a positive constant even when every ratio underflows
        candidates = np.sort(np.append(candidates[candidates > 0], np.nextafter(0.0, 1.0)))
    for c in candidates:
        if np.all(lhs / phi_v <= c):
            return c
    return math.inf


fields = arrays(np.float64, 21, elements=st.floats(-1e3, 1e3))


@given(x=fields, y=fields, z=fields, eta=st.floats(0.01, 5))
@settings(max_examples=200, deadline=None)
def test_metric_axioms(x, y, z, eta):
    g = make_grid(0, 2, 20)
    phi = named_weight("1+t^2")
    X, Y, Z = (ScalarField(g, v) for v in (x, y, z))
    dxy = bielecki_distance(X, Y, eta, phi)
    assert dxy == bielecki_distance(Y, X, eta, phi)
    assert dxy >= 0
    assert (dxy == 0) == np.array_equal(x, y)
    lhs = bielecki_distance(X, Z, eta, phi)
    rhs = dxy + bielecki_distance(Y, Z, eta, phi)
    assert lhs <= rhs * (1 + 4 * np.finfo(float).eps)
    assert dxy == _inf_over_C(X, Y, eta, phi)


@given(x=fields, e1=st.floats(0.01, 5), e2=st.floats(0.01, 5))
@settings(max_examples=100, deadline=None)
def test_distance_nonincreasing_in_eta(x, e1, e2):
    g = make_grid(0, 2, 20)
    lo, hi = sorted((e1, e2))
    X, O = ScalarField(g, x), ScalarField.zeros(g)
    phi = WeightFunction.constant(1.0)
    assert bielecki_distance(X, O, hi, phi) <= bielecki_distance(X, O, lo, phi)


def test_scaled_shape_perturbation(jung):
    y = make_perturbation(ScalarField.zeros(jung.grid), "scaled-shape", 0.01, 0, jung, 0.01)
    d = defect(jung, y).values
    np.testing.assert_allclose(d, 0.01, rtol=0, atol=operator_allowance(jung, y))
    np.testing.assert_allclose(y.values, 0.01 * np.exp(jung.grid.nodes ** 2 / 2))


def test_perturbation_vanishes_with_magnitude(jung):
    y0 = ScalarField.zeros(jung.grid)
    prev = math.inf
    for m in (1e-1, 1e-3, 1e-6, 0.0):
        y = make_perturbation(y0, PerturbationKind.RANDOM_SMOOTH, m, 4, jung, 1.0)
        size = np.max(np.abs(y.values - y0.values))
        assert size <= prev
        prev = size
    assert prev == 0


def test_random_smooth_rescaled(growth, unit_weight):
    y0 = picard_solve(growth, ScalarField.zeros(growth.grid), 2.0, unit_weight).solution
    y = make_perturbation(y0, "random-smooth", 5.0, 42, growth, 0.1)
    assert np.max(defect(growth, y).values / 0.1) <= 1


def test_perturbation_failure(jung):
    with pytest.raises(PerturbationError):
        make_perturbation(ScalarField.zeros(jung.grid), "constant-defect", 1e9, 0, jung, 1e-9,
                          max_rescalings=5)


def test_constant_defect_kind(growth, unit_weight):
    y0 = stepping_solve(growth)
    y = make_perturbation(y0, "constant-defect", 0.05, 0, growth, 0.2)
    assert np.all(defect(growth, y).values <= 0.2)


def test_verify_example_hu(jung):
    eps = 0.01
    phi = WeightFunction.constant(eps)
    y = sample_function(lambda t: eps * np.exp(t * t / 2), jung.grid)
    cert = hu_bound(eps, 2.0, 2.0, ETA, jung.grid)
    rep = verify_stability(jung, y, phi, cert)
    assert rep.defect_admissible
    assert rep.bound_satisfied and rep.converged
    assert rep.max_deviation == pytest.approx(0.01 * math.e ** 2, rel=1e-12)
    assert cert.factor * eps == pytest.approx(7.286, abs=1e-3)
    assert rep.tightness == pytest.approx(0.0101, abs=1e-4)


def test_verify_exact_solution(growth, unit_weight):
    y0 = stepping_solve(growth)
    cert = hu_bound(1.0, 1.0, 1.0, grid=growth.grid)
    rep = verify_stability(growth, y0, unit_weight, cert)
    assert rep.bound_satisfied and rep.tightness <= 1e-12


def test_verify_example_hur(jung):
    phi = named_weight("exp")
    y = make_perturbation(ScalarField.zeros(jung.grid), "scaled-shape", 3.0, 0, jung, phi)
    cert = hur_bound(phi, 2.0, jung.grid)
    rep = verify_stability(jung, y, phi, cert)
    assert rep.defect_admissible and rep.max_defect_ratio <= 1
    assert rep.bound_satisfied
    np.testing.assert_allclose(cert.bound_field.values, 728.636 * np.exp(jung.grid.nodes), rtol=1e-6)


def test_verify_flags_inadmissible_defect(jung):
    eps = 0.01
    y = sample_function(lambda t: 0.5 * np.exp(t * t / 2), jung.grid)
    rep = verify_stability(jung, y, WeightFunction.constant(eps), hu_bound(eps, 2, 2, grid=jung.grid))
    assert not rep.defect_admissible and rep.max_defect_ratio > 1


@pytest.mark.parametrize("name", ["jung-example", "exp-growth", "bivariate-product"])
def test_soundness_small_sweep(name):
    p = preset_problem(name, n=400)
    for phi in (WeightFunction.constant(0.05), named_weight("exp")):
        cert = hur_bound(phi, p.lipschitz, p.grid)
        y0 = picard_solve(p, ScalarField.zeros(p.grid), cert.eta, phi).solution
        for seed in range(8):
            y = make_perturbation(y0, "random-smooth", 1.0, seed, p, phi)
            rep = verify_stability(p, y, phi, cert)
            assert rep.defect_admissible and rep.bound_satisfied


def test_distance_positive_after_underflow():
    g = make_grid(0, 2, 20)
    v = np.zeros(21)
    v[7] = 5e-324
    d = bielecki_distance(ScalarField(g, v), ScalarField.zeros(g), 1.0, named_weight("1+t^2"))
    assert d > 0
