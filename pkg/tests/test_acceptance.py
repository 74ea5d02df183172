"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line; the lines are printed in the terminal
summary (see conftest.py) and also when this file is run as a script.
"""

import filecmp
import math

import mpmath
import numpy as np
import pytest

from oracles import factor_mp, golden_eta
from conftest import preset_problem
from volterra_ulam.cli import main
from volterra_ulam.core import ScalarField, WeightFunction, make_grid, named_weight
from volterra_ulam.metric import bielecki_distance
from volterra_ulam.quadrature import check_weighted_integral_inequality
from volterra_ulam.solver import (
    a_posteriori_check,
    contraction_allowance,
    estimate_contraction_factor,
    picard_solve,
    random_polynomial_field,
    stepping_solve,
)
from volterra_ulam.stability import (
    check_classic_conditions,
    hu_bound,
    hur_bound,
    minimal_K,
    optimal_eta,
)
from volterra_ulam.verify import PerturbationKind, make_perturbation, verify_stability

RESULTS = []
ETA_JUNG = 1 + math.sqrt(2)
UNIT = WeightFunction.constant(1.0)


def record(number, name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {name} ({detail})"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_c01_constant_defect_example():
    p = preset_problem("jung-example")
    report = check_classic_conditions(p.lipschitz, p.grid)
    cert = hu_bound(1.0, p.lipschitz, p.r, grid=p.grid)
    e_star = golden_eta(p.lipschitz, p.r)
    oracle = float(factor_mp(p.lipschitz, p.r, e_star))
    eta_err = abs(cert.eta - ETA_JUNG)
    rel = abs(cert.factor - oracle) / oracle
    ok = report.lr_product > 1 and not report.hu_applicable and eta_err <= 1e-9 and rel <= 1e-6
    record(1, "constant-defect example on [0,2]", ok,
           f"L*r={report.lr_product:g}, eta={cert.eta:.12f}, factor={cert.factor:.6f}, "
           f"rel err vs golden section={rel:.1e}")


def test_c02_exponential_weight_example():
    p = preset_problem("jung-example")
    phi = named_weight("exp")
    k_min = minimal_K(phi, p.grid)
    report = check_classic_conditions(p.lipschitz, p.grid, phi, K=1.0)
    cert = hur_bound(phi, p.lipschitz, p.grid)
    y = make_perturbation(ScalarField.zeros(p.grid), PerturbationKind.SCALED_SHAPE, 1.0, 0, p, phi)
    v = verify_stability(p, y, phi, cert)
    ok = (
        k_min <= 1 + 1e-9
        and math.isclose(k_min, 1 - math.exp(-2), rel_tol=1e-6)
        and report.k_candidate_admissible
        and report.k_candidate_kl == 2.0
        and not report.hur_applicable
        and v.defect_admissible
        and v.bound_satisfied
    )
    record(2, "exponential-weight example on [0,2]", ok,
           f"K_min={k_min:.6f}, K*L={report.k_candidate_kl:g}, tightness={v.tightness:.3e}")


SWEEP = [("jung-example", 0), ("exp-growth", 1), ("bivariate-product", 2)]


def test_c03_soundness_sweep():
    total = violations = 0
    worst = 0.0
    for name, offset in SWEEP:
        p = preset_problem(name, n=400)
        base = picard_solve(p, ScalarField.zeros(p.grid), 2 * p.lipschitz + 1, UNIT).solution
        rng = np.random.default_rng(offset)
        for k in range(40):
            kind = list(PerturbationKind)[k % 3]
            if k % 2:
                phi = WeightFunction.constant(float(10 ** rng.uniform(-4, 0)))
                cert = hu_bound(phi.epsilon, p.lipschitz, p.r, grid=p.grid)
            else:
                phi = named_weight(["exp", "1+t^2"][k % 4 // 2])
                cert = hur_bound(phi, p.lipschitz, p.grid)
            y = make_perturbation(base, kind, float(rng.uniform(0, 2)), 100 * offset + k, p, phi)
            v = verify_stability(p, y, phi, cert)
            total += v.defect_admissible
            violations += not v.bound_satisfied
            worst = max(worst, v.tightness)
    ok = total >= 100 and violations == 0
    record(3, "soundness sweep over three kernels", ok,
           f"{total} admissible cases, {violations} violations, max tightness={worst:.3e}")


def test_c04_contraction_measurement():
    p = preset_problem("jung-example", n=2000)
    measured = estimate_contraction_factor(p, ETA_JUNG, UNIT, trials=50, seed=0)
    allowance = contraction_allowance(p, ETA_JUNG, UNIT)
    lam = p.lipschitz / ETA_JUNG
    ok = measured <= lam + allowance and allowance <= 1e-4
    record(4, "measured contraction factor", ok,
           f"measured={measured:.10f}, L/eta={lam:.10f}, allowance={allowance:.2e}")


def test_c05_oracle_equivalence():
    gaps = {}
    for name in ("jung-example", "exp-growth", "bivariate-product", "convolution", "sine"):
        p = preset_problem(name)
        sol = picard_solve(p, ScalarField.zeros(p.grid), 2 * p.lipschitz + 1, UNIT)
        gaps[name] = float(np.max(np.abs(sol.solution.values - stepping_solve(p).values)))
    errs = []
    for n in (1000, 2000):
        p = preset_problem("exp-growth", n)
        errs.append(float(np.max(np.abs(stepping_solve(p).values - np.expm1(p.grid.nodes)))))
    ratio = errs[0] / errs[1]
    ok = max(gaps.values()) <= 1e-6 and 3.5 <= ratio <= 4.5
    record(5, "Picard vs marching scheme and order 2", ok,
           f"max gap={max(gaps.values()):.2e}, error ratio n->2n={ratio:.4f}")


def test_c06_a_posteriori_bound():
    p = preset_problem("jung-example")
    sol = picard_solve(p, ScalarField.zeros(p.grid), ETA_JUNG, UNIT)
    rng = np.random.default_rng(6)
    fails = 0
    for _ in range(20):
        y = random_polynomial_field(p.grid, rng)
        fails += not a_posteriori_check(p, y, sol, UNIT).holds
    record(6, "a-posteriori distance bound", fails == 0, f"20 random fields, {fails} failures")


def test_c07_metric_axioms():
    grid = make_grid(0.0, 2.0, 200)
    rng = np.random.default_rng(7)
    bad = 0
    for k in range(200):
        eta = float(rng.uniform(0.1, 10))
        phi = UNIT if k % 2 else named_weight("exp")
        a, b, c = (random_polynomial_field(grid, rng) for _ in range(3))
        dab = bielecki_distance(a, b, eta, phi)
        ok = (
            dab == bielecki_distance(b, a, eta, phi)
            and bielecki_distance(a, c, eta, phi) <= dab + bielecki_distance(b, c, eta, phi)
            and bielecki_distance(a, a, eta, phi) == 0.0
            and (dab == 0.0) == np.array_equal(a.values, b.values)
        )
        bad += not ok
    record(7, "metric axioms", bad == 0, f"200 triples, {bad} failures")


def test_c08_weighted_integral_inequality():
    grid = make_grid(0.0, 2.0, 1000)
    worst = -math.inf
    ok = True
    for name in ("exp", "one", "1+t^2"):
        for eta in (0.5, ETA_JUNG, 10.0):
            rep = check_weighted_integral_inequality(named_weight(name), eta, grid)
            ok &= rep.passed and rep.max_violation <= rep.allowance
            worst = max(worst, rep.max_violation - rep.allowance)
    record(8, "weighted integral inequality", ok, f"max(violation - allowance)={worst:.2e}")


def test_c09_stationarity():
    rng = np.random.default_rng(9)
    worst = 0.0
    for L, r in rng.uniform(0.1, 10, size=(50, 2)):
        e = optimal_eta(L, r)
        worst = max(worst, abs(e * (e - L) - L / r) / (L / r))
    record(9, "optimal weight stationarity", worst <= 1e-10, f"max relative error={worst:.1e}")


def test_c10_determinism(tmp_path, capsys):
    dirs = [tmp_path / "a", tmp_path / "b"]
    codes = [main(["reproduce", "all", "--seed", "0", "--out", str(d)]) for d in dirs]
    capsys.readouterr()
    names = sorted(f.name for f in dirs[0].iterdir())
    match, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], names, shallow=False)
    ok = codes == [0, 0] and len(names) == 4 and not mismatch and not errors
    record(10, "byte-identical reproduce artifacts", ok, f"{len(match)} files identical")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
