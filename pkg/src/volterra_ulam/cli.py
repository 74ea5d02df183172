"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 non-convergence,
4 assertion or bound violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import ConfigError, RunConfig, load_config, with_overrides
from .core import (
    NumericDomainError,
    Problem,
    ScalarField,
    WeightFunction,
    make_grid,
    named_weight,
)
from .kernels import PRESETS
from .solver import picard_solve, stepping_solve
from .stability import (
    Certificate,
    bound_factor,
    check_classic_conditions,
    estimate_lipschitz,
    hu_bound,
    hur_bound,
    optimal_eta,
)
from .verify import PerturbationError, make_perturbation, verify_stability

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_VIOLATION = 0, 2, 3, 4

log = logging.getLogger("volterra_ulam")


def fmt_float(x: float) -> str:
    return "%.17g" % x


def write_csv(columns: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = list(columns)
    writer.writerow(names)
    for row in zip(*(columns[k] for k in names)):
        writer.writerow([fmt_float(float(v)) for v in row])
    return buf.getvalue()


def read_csv(text: str) -> dict:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    return {name: np.array([float(r[i]) for r in body]) for i, name in enumerate(header)}


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def write_json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, allow_nan=False) + "\n"


def emit(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def certificate_for(cfg: RunConfig, p: Problem) -> Certificate:
    eta = cfg.eta_for(p.lipschitz, p.r)
    if cfg.weight == "constant":
        return hu_bound(cfg.epsilon, p.lipschitz, p.r, eta, p.grid, p.lipschitz_source)
    return hur_bound(cfg.weight_function(), p.lipschitz, p.grid, eta, p.lipschitz_source,
                     cfg.tol.mono_tol)


def certificate_dict(cert: Certificate) -> dict:
    out = {
        "form": cert.form,
        "eta": cert.eta,
        "lipschitz": cert.lipschitz,
        "lipschitz_source": cert.lipschitz_source,
        "r": cert.r,
        "factor": cert.factor,
        "weight": cert.weight.name,
    }
    if cert.epsilon is not None:
        out["epsilon"] = cert.epsilon
        out["bound_constant"] = cert.factor * cert.epsilon
    return out


def cmd_solve(cfg: RunConfig) -> int:
    p = cfg.build_problem()
    eta = cfg.eta_for(p.lipschitz, p.r)
    res = picard_solve(p, ScalarField.zeros(p.grid), eta, cfg.weight_function(), cfg.tol)
    march = stepping_solve(p)
    gap = np.abs(res.solution.values - march.values)
    cols = {
        "t": p.grid.nodes,
        "y0_picard": res.solution.values,
        "y0_stepping": march.values,
        "gap": gap,
    }
    if cfg.format == "csv":
        emit(write_csv(cols), cfg.out)
    else:
        emit(write_json({
            "eta": eta,
            "iterations": res.iterations,
            "converged": res.converged,
            "final_step_distance": res.final_step_distance,
            "max_gap": float(gap.max()),
            **cols,
        }), cfg.out)
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_certify(cfg: RunConfig) -> int:
    p = cfg.build_problem()
    cert = certificate_for(cfg, p)
    phi = None if cfg.weight == "constant" else cfg.weight_function()
    classic = check_classic_conditions(p.lipschitz, p.grid, phi, rule=cfg.tol.quad_order)
    if cfg.format == "csv":
        emit(write_csv({"t": p.grid.nodes, "bound": cert.bound_field.values}), cfg.out)
        return EXIT_OK
    doc = {
        "eta": cert.eta,
        "factor": cert.factor,
        "lr_product": classic.lr_product,
        "hu_applicable": classic.hu_applicable,
    }
    if classic.k_min is not None:
        doc["k_min"] = classic.k_min
        doc["kl_product"] = classic.kl_product
        doc["hur_applicable"] = classic.hur_applicable
    doc["certificate"] = certificate_dict(cert)
    doc["notes"] = list(classic.notes)
    doc["t"] = p.grid.nodes
    doc["bound"] = cert.bound_field.values
    emit(write_json(doc), cfg.out)
    return EXIT_OK


def run_verify(cfg: RunConfig, p: Problem):
    phi = cfg.weight_function()
    cert = certificate_for(cfg, p)
    y0 = picard_solve(p, ScalarField.zeros(p.grid), cert.eta, phi, cfg.tol)
    cases = []
    for seed in cfg.seeds:
        y = make_perturbation(y0.solution, cfg.perturbation, cfg.magnitude, seed, p, phi, cfg.tol)
        rep = verify_stability(p, y, phi, cert, cfg.tol)
        cases.append({"seed": seed, **rep.as_dict()})
    return cert, y0, cases


def cmd_verify(cfg: RunConfig) -> int:
    p = cfg.build_problem()
    cert, y0, cases = run_verify(cfg, p)
    ok = all(c["bound_satisfied"] for c in cases)
    converged = y0.converged and all(c["converged"] for c in cases)
    doc = {
        "certificate": certificate_dict(cert),
        "perturbation": cfg.perturbation,
        "magnitude": cfg.magnitude,
        "all_bound_satisfied": ok,
        "max_tightness": max(c["tightness"] for c in cases),
        "cases": cases,
    }
    if cfg.format == "csv":
        keys = ["seed", "max_defect_ratio", "tightness", "max_deviation", "slack"]
        emit(write_csv({k: [c[k] for c in cases] for k in keys}
                       | {"bound_satisfied": [float(c["bound_satisfied"]) for c in cases]}),
             cfg.out)
    else:
        emit(write_json(doc), cfg.out)
    if not ok:
        return EXIT_VIOLATION
    return EXIT_OK if converged else EXIT_NONCONVERGED


def cmd_compare(cfg: RunConfig) -> int:
    p = cfg.build_problem()
    phi = None if cfg.weight == "constant" else cfg.weight_function()
    rep = check_classic_conditions(p.lipschitz, p.grid, phi, rule=cfg.tol.quad_order)
    doc = {k: v for k, v in rep.__dict__.items() if v is not None and k != "notes"}
    doc["notes"] = list(rep.notes)
    emit(write_json(doc), cfg.out)
    return EXIT_OK


# -- reproduction of the two worked examples ---------------------------------

class _Checks:
    def __init__(self, title: str):
        self.title = title
        self.rows: list = []

    def add(self, label: str, value, ok: bool) -> None:
        self.rows.append((label, value, bool(ok)))

    @property
    def ok(self) -> bool:
        return all(r[2] for r in self.rows)

    def table(self) -> str:
        width = max(len(r[0]) for r in self.rows)
        lines = [self.title, "-" * len(self.title)]
        for label, value, ok in self.rows:
            shown = f"{value:.10g}" if isinstance(value, float) else str(value)
            lines.append(f"{label:<{width}}  {shown:>22}  {'ok' if ok else 'FAIL'}")
        return "\n".join(lines) + "\n"

    def as_dict(self) -> list:
        return [{"check": l, "value": v, "ok": ok} for l, v, ok in self.rows]


def _eta_is_minimal(L: float, r: float, eta: float) -> bool:
    best = bound_factor(L, r, eta)
    return all(best <= bound_factor(L, r, e) for e in (L + 0.1, L + 1, L + 3, L + 8))


def _sweep(p: Problem, y0: ScalarField, phi: WeightFunction, cert: Certificate, seeds) -> list:
    out = []
    for s in seeds:
        y = make_perturbation(y0, "random-smooth", 1.0, s, p, phi)
        out.append(verify_stability(p, y, phi, cert))
    return out


def reproduce_example_3_1(n: int, seed: int) -> tuple:
    pre = PRESETS["jung-example"]
    grid = make_grid(pre.t0, pre.r, n)
    p = Problem(pre.kernel, grid, pre.lipschitz)
    eps = 0.01
    phi = WeightFunction.constant(eps)
    checks = _Checks("Example: y(t) = int_0^t s y(s) ds on [0, 2], Hyers-Ulam")

    L_est = estimate_lipschitz(pre.kernel, grid, (-10.0, 10.0), 20_000, seed)
    checks.add("sampled Lipschitz estimate", L_est, L_est <= pre.lipschitz + 1e-12)
    classic = check_classic_conditions(p.lipschitz, grid)
    checks.add("L*r (classical needs < 1)", classic.lr_product, classic.lr_product > 1)
    checks.add("classical HU applicable", classic.hu_applicable, not classic.hu_applicable)

    cert = hu_bound(eps, p.lipschitz, grid.r, grid=grid)
    checks.add("eta* (= 1 + sqrt 2)", cert.eta, abs(cert.eta - (1 + math.sqrt(2))) < 1e-9)
    checks.add("factor e^{eta r}/(1-L/eta)", cert.factor, _eta_is_minimal(p.lipschitz, grid.r, cert.eta))
    checks.add("HU bound eps*factor", cert.factor * eps, cert.factor * eps > 0)

    y0 = picard_solve(p, ScalarField.zeros(grid), cert.eta, phi).solution
    y = make_perturbation(y0, "scaled-shape", eps, seed, p, eps)
    rep = verify_stability(p, y, phi, cert)
    checks.add("defect admissible (<= eps)", rep.defect_admissible, rep.defect_admissible)
    checks.add("sup |y - y0|", rep.max_deviation, rep.bound_satisfied)
    checks.add("tightness", rep.tightness, rep.bound_satisfied)
    sweep = _sweep(p, y0, phi, cert, range(seed, seed + 10))
    n_ok = sum(r.bound_satisfied and r.defect_admissible for r in sweep)
    checks.add("random perturbations within bound", f"{n_ok}/{len(sweep)}", n_ok == len(sweep))

    summary = {
        "example": "example-3-1",
        "n": n,
        "seed": seed,
        "lipschitz": p.lipschitz,
        "lipschitz_estimate": L_est,
        "lr_product": classic.lr_product,
        "hu_applicable": classic.hu_applicable,
        "certificate": certificate_dict(cert),
        "verification": rep.as_dict(),
        "sweep_tightness": [r.tightness for r in sweep],
        "notes": list(classic.notes) + [
            "the worked example quotes the product as 2*1 = 2; with L = 2 and r = 2 it is 4, "
            "either way above 1"
        ],
        "checks": checks.as_dict(),
        "passed": checks.ok,
    }
    columns = {
        "t": grid.nodes,
        "y": y.values,
        "y0": y0.values,
        "deviation": np.abs(y.values - y0.values),
        "bound": cert.bound_field.values,
    }
    return checks, summary, columns


def reproduce_example_3_2(n: int, seed: int) -> tuple:
    pre = PRESETS["jung-example"]
    grid = make_grid(pre.t0, pre.r, n)
    p = Problem(pre.kernel, grid, pre.lipschitz)
    phi = named_weight("exp")
    checks = _Checks("Example: same equation, phi(t) = e^t, Hyers-Ulam-Rassias")

    classic = check_classic_conditions(p.lipschitz, grid, phi, K=1.0)
    checks.add("K_min = max (int phi)/phi", classic.k_min, classic.k_min <= 1 + 1e-9)
    checks.add("K = 1 admissible", classic.k_candidate_admissible, classic.k_candidate_admissible)
    checks.add("K*L with K = 1", classic.k_candidate_kl, classic.k_candidate_kl > 1)
    checks.add("K_min*L", classic.kl_product, classic.kl_product > 1)
    checks.add("classical HUR applicable", classic.hur_applicable, not classic.hur_applicable)

    cert = hur_bound(phi, p.lipschitz, grid)
    checks.add("eta*", cert.eta, abs(cert.eta - (1 + math.sqrt(2))) < 1e-9)
    checks.add("factor", cert.factor, _eta_is_minimal(p.lipschitz, grid.r, cert.eta))
    checks.add("bound at t = 0", float(cert.bound_field.values[0]), True)
    checks.add("bound at t = 2", float(cert.bound_field.values[-1]), True)

    y0 = picard_solve(p, ScalarField.zeros(grid), cert.eta, phi).solution
    y = make_perturbation(y0, "scaled-shape", 1.0, seed, p, phi)
    rep = verify_stability(p, y, phi, cert)
    checks.add("defect admissible (<= e^t)", rep.defect_admissible, rep.defect_admissible)
    checks.add("max defect / phi", rep.max_defect_ratio, rep.max_defect_ratio <= 1)
    checks.add("tightness", rep.tightness, rep.bound_satisfied)
    sweep = _sweep(p, y0, phi, cert, range(seed, seed + 10))
    n_ok = sum(r.bound_satisfied and r.defect_admissible for r in sweep)
    checks.add("random perturbations within bound", f"{n_ok}/{len(sweep)}", n_ok == len(sweep))

    summary = {
        "example": "example-3-2",
        "n": n,
        "seed": seed,
        "lipschitz": p.lipschitz,
        "k_min": classic.k_min,
        "k_candidate": classic.k_candidate,
        "k_candidate_admissible": classic.k_candidate_admissible,
        "k_candidate_kl": classic.k_candidate_kl,
        "kl_product": classic.kl_product,
        "hur_applicable": classic.hur_applicable,
        "certificate": certificate_dict(cert),
        "verification": rep.as_dict(),
        "sweep_tightness": [r.tightness for r in sweep],
        "notes": list(classic.notes),
        "checks": checks.as_dict(),
        "passed": checks.ok,
    }
    columns = {
        "t": grid.nodes,
        "y": y.values,
        "y0": y0.values,
        "deviation": np.abs(y.values - y0.values),
        "bound": cert.bound_field.values,
    }
    return checks, summary, columns


REPRODUCERS = {"example-3-1": reproduce_example_3_1, "example-3-2": reproduce_example_3_2}


def cmd_reproduce(which: str, n: int = 1000, seed: int = 0, out: Optional[str] = None) -> int:
    names = list(REPRODUCERS) if which == "all" else [which]
    ok = True
    for name in names:
        checks, summary, columns = REPRODUCERS[name](n, seed)
        sys.stdout.write(checks.table() + "\n")
        ok &= checks.ok
        if out is not None:
            d = Path(out)
            emit(write_json(summary), str(d / f"{name}.json"))
            emit(write_csv(columns), str(d / f"{name}.csv"))
    sys.stdout.write("all checks passed\n" if ok else "some checks FAILED\n")
    return EXIT_OK if ok else EXIT_VIOLATION


# -- argument handling --------------------------------------------------------

def _eta_arg(text: str):
    if text == "optimal":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a number or 'optimal'") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="volterra-ulam",
        description="Solve Volterra integral equations and certify their Ulam-type stability.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI (key = value) or JSON run configuration")
    common.add_argument("--config-format", choices=["ini", "json"],
                        help="override format detection by file extension")
    common.add_argument("--problem", choices=sorted(PRESETS), help="built-in problem")
    common.add_argument("--n", type=int, help="number of subintervals")
    common.add_argument("--eta", type=_eta_arg, help="exponential weight, or 'optimal'")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--out", help="output file (stdout if omitted)")
    common.add_argument("--seed", type=int)

    for name, help_ in [
        ("solve", "solve by successive approximation, cross-checked by marching"),
        ("certify", "compute the stability certificate and classical conditions"),
        ("verify", "perturb, solve and check the certificate bound"),
        ("compare", "report the classical sufficient conditions only"),
    ]:
        sp = sub.add_parser(name, parents=[common], help=help_)
        if name == "verify":
            sp.add_argument("--seeds", help="perturbation seeds, e.g. '1..100' or '1,2,3'")
            sp.add_argument("--kind", choices=["constant-defect", "scaled-shape", "random-smooth"])
            sp.add_argument("--magnitude", type=float)

    rp = sub.add_parser("reproduce", help="rerun the two worked examples")
    rp.add_argument("which", nargs="?", default="all", choices=["example-3-1", "example-3-2", "all"])
    rp.add_argument("--n", type=int, default=1000)
    rp.add_argument("--seed", type=int, default=0)
    rp.add_argument("--out", help="directory for JSON/CSV artifacts")
    return parser


def _config_from_args(args) -> RunConfig:
    from .config import _seeds

    cfg = load_config(args.config, args.config_format) if args.config else RunConfig()
    overrides = {
        "kernel": args.problem,
        "n": args.n,
        "eta": args.eta,
        "format": args.format,
        "out": args.out,
        "seed": args.seed,
    }
    if getattr(args, "seeds", None):
        overrides["seeds"] = _seeds("perturbation", "seeds", args.seeds)
    if getattr(args, "kind", None):
        overrides["perturbation"] = args.kind
    if getattr(args, "magnitude", None) is not None:
        overrides["magnitude"] = args.magnitude
    return with_overrides(cfg, **overrides)


COMMANDS = {"solve": cmd_solve, "certify": cmd_certify, "verify": cmd_verify, "compare": cmd_compare}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "reproduce":
            if args.n < 2:
                raise ConfigError("--n: need at least 2 subintervals")
            return cmd_reproduce(args.which, args.n, args.seed, args.out)
        return COMMANDS[args.command](_config_from_args(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PerturbationError, NumericDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
