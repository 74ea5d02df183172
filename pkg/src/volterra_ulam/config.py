"""Run configuration: INI-style ``key = value`` files or the equivalent JSON."""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

from .core import (
    KernelForm,
    Problem,
    QuadOrder,
    ToleranceConfig,
    WeightFunction,
    make_grid,
    named_weight,
)
from .kernels import PRESETS, ExpressionError, parse_kernel
from .verify import PerturbationKind

SECTIONS = ("problem", "weight", "certificate", "tolerance", "perturbation", "output", "run")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class RunConfig:
    kernel: str = "jung-example"
    form: str = "state"
    t0: Optional[float] = None
    r: Optional[float] = None
    n: int = 1000
    lipschitz: Optional[float] = None
    estimate_lipschitz: bool = False
    y_box: Optional[tuple] = None
    lipschitz_samples: int = 10_000
    weight: str = "constant"
    epsilon: float = 1.0
    eta: Union[str, float] = "optimal"
    tol: ToleranceConfig = field(default_factory=ToleranceConfig)
    perturbation: str = "scaled-shape"
    magnitude: float = 0.01
    seeds: tuple = (0,)
    out: Optional[str] = None
    format: str = "json"
    seed: int = 0

    def kernel_form(self) -> KernelForm:
        if self.kernel in PRESETS:
            return PRESETS[self.kernel].kernel
        try:
            return parse_kernel(self.kernel, self.form)
        except (ExpressionError, ValueError) as exc:
            raise ConfigError(f"problem.kernel: {exc}") from None

    def weight_function(self) -> WeightFunction:
        if self.weight == "constant":
            return WeightFunction.constant(self.epsilon)
        return named_weight(self.weight)

    def interval(self) -> tuple:
        preset = PRESETS.get(self.kernel)
        t0 = self.t0 if self.t0 is not None else (preset.t0 if preset else 0.0)
        r = self.r if self.r is not None else (preset.r if preset else 1.0)
        return t0, r

    def declared_lipschitz(self) -> Optional[float]:
        if self.estimate_lipschitz:
            return None
        if self.lipschitz is not None:
            return self.lipschitz
        preset = PRESETS.get(self.kernel)
        return preset.lipschitz if preset else None

    def build_problem(self) -> Problem:
        from .stability import estimate_lipschitz

        t0, r = self.interval()
        grid = make_grid(t0, r, self.n)
        kernel = self.kernel_form()
        L = self.declared_lipschitz()
        if L is not None:
            return Problem(kernel, grid, L)
        if self.y_box is None:
            raise ConfigError("problem.y_box: required when lipschitz = estimate")
        L = estimate_lipschitz(kernel, grid, self.y_box, self.lipschitz_samples, self.seed)
        if not L > 0:
            raise ConfigError("problem.lipschitz: estimated constant is zero; declare one instead")
        return Problem(kernel, grid, L, "empirical-L")

    def eta_for(self, L: float, r: float) -> float:
        from .stability import optimal_eta

        if self.eta == "optimal":
            return optimal_eta(L, r)
        eta = float(self.eta)
        if not eta > L:
            raise ConfigError(f"certificate.eta: {eta} must exceed L = {L}")
        return eta


def _raw_from_ini(text: str, source: str) -> dict:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    return {sec: dict(parser[sec]) for sec in parser.sections()}


def _raw_from_json(text: str, source: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict) or not all(isinstance(v, dict) for v in data.values()):
        raise ConfigError(f"{source}: top level must map section names to objects")
    return data


def _float(sec: str, key: str, value) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{sec}.{key}: expected a number, got {value!r}") from None
    if not math.isfinite(out):
        raise ConfigError(f"{sec}.{key}: must be finite")
    return out


def _int(sec: str, key: str, value) -> int:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{sec}.{key}: expected an integer, got {value!r}") from None
    if out != int(out):
        raise ConfigError(f"{sec}.{key}: expected an integer, got {value!r}")
    return int(out)


def _pair(sec: str, key: str, value) -> tuple:
    if isinstance(value, str):
        value = [v for v in value.replace(",", " ").split() if v]
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{sec}.{key}: expected two numbers")
    return tuple(_float(sec, key, v) for v in value)


def _seeds(sec: str, key: str, value) -> tuple:
    if isinstance(value, int):
        return (value,)
    if isinstance(value, list):
        return tuple(_int(sec, key, v) for v in value)
    text = str(value).strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo, hi = _int(sec, key, lo), _int(sec, key, hi)
        if hi < lo:
            raise ConfigError(f"{sec}.{key}: empty range {text!r}")
        return tuple(range(lo, hi + 1))
    return tuple(_int(sec, key, v) for v in text.replace(",", " ").split())


def _from_raw(raw: dict) -> RunConfig:
    unknown = set(raw) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    kw: dict = {}
    tol_kw: dict = {}
    known = {
        "problem": {"kernel", "form", "t0", "r", "n", "lipschitz", "y_box", "lipschitz_samples"},
        "weight": {"kind", "epsilon", "name"},
        "certificate": {"eta"},
        "tolerance": {"picard_tol", "max_iter", "quad_order", "mono_tol", "verify_slack"},
        "perturbation": {"kind", "magnitude", "seeds", "seed"},
        "output": {"path", "format"},
        "run": {"seed"},
    }
    for sec, items in raw.items():
        extra = set(items) - known[sec]
        if extra:
            raise ConfigError(f"{sec}.{sorted(extra)[0]}: unknown key")

    prob = raw.get("problem", {})
    if "kernel" in prob:
        kw["kernel"] = str(prob["kernel"]).strip()
    if "form" in prob:
        form = str(prob["form"]).strip()
        if form not in ("state", "bivariate"):
            raise ConfigError("problem.form: expected 'state' or 'bivariate'")
        kw["form"] = form
    for key in ("t0", "r"):
        if key in prob:
            kw[key] = _float("problem", key, prob[key])
    if "n" in prob:
        kw["n"] = _int("problem", "n", prob["n"])
    if "lipschitz" in prob:
        val = prob["lipschitz"]
        if isinstance(val, str) and val.strip() == "estimate":
            kw["estimate_lipschitz"] = True
        else:
            kw["lipschitz"] = _float("problem", "lipschitz", val)
    if "y_box" in prob:
        kw["y_box"] = _pair("problem", "y_box", prob["y_box"])
    if "lipschitz_samples" in prob:
        kw["lipschitz_samples"] = _int("problem", "lipschitz_samples", prob["lipschitz_samples"])

    wt = raw.get("weight", {})
    kind = str(wt.get("kind", "constant")).strip()
    if kind == "constant":
        kw["weight"] = "constant"
        if "epsilon" in wt:
            kw["epsilon"] = _float("weight", "epsilon", wt["epsilon"])
    elif kind == "named":
        if "name" not in wt:
            raise ConfigError("weight.name: required when kind = named")
        kw["weight"] = str(wt["name"]).strip()
    else:
        raise ConfigError("weight.kind: expected 'constant' or 'named'")

    cert = raw.get("certificate", {})
    if "eta" in cert:
        eta = cert["eta"]
        kw["eta"] = "optimal" if str(eta).strip() == "optimal" else _float("certificate", "eta", eta)

    tol = raw.get("tolerance", {})
    for key in ("picard_tol", "mono_tol", "verify_slack"):
        if key in tol:
            tol_kw[key] = _float("tolerance", key, tol[key])
    if "max_iter" in tol:
        tol_kw["max_iter"] = _int("tolerance", "max_iter", tol["max_iter"])
    if "quad_order" in tol:
        try:
            tol_kw["quad_order"] = QuadOrder(str(tol["quad_order"]).strip())
        except ValueError:
            raise ConfigError("tolerance.quad_order: expected 'trapezoid' or 'simpson'") from None

    pert = raw.get("perturbation", {})
    if "kind" in pert:
        try:
            kw["perturbation"] = PerturbationKind(str(pert["kind"]).strip()).value
        except ValueError:
            choices = ", ".join(k.value for k in PerturbationKind)
            raise ConfigError(f"perturbation.kind: expected one of {choices}") from None
    if "magnitude" in pert:
        kw["magnitude"] = _float("perturbation", "magnitude", pert["magnitude"])
    if "seeds" in pert:
        kw["seeds"] = _seeds("perturbation", "seeds", pert["seeds"])
    elif "seed" in pert:
        kw["seeds"] = (_int("perturbation", "seed", pert["seed"]),)

    out = raw.get("output", {})
    if "path" in out:
        kw["out"] = str(out["path"])
    if "format" in out:
        fmt = str(out["format"]).strip()
        if fmt not in ("csv", "json"):
            raise ConfigError("output.format: expected 'csv' or 'json'")
        kw["format"] = fmt
    if "seed" in raw.get("run", {}):
        kw["seed"] = _int("run", "seed", raw["run"]["seed"])

    try:
        kw["tol"] = ToleranceConfig(**tol_kw)
    except ValueError as exc:
        raise ConfigError(f"tolerance: {exc}") from None
    return validate(RunConfig(**kw))


def validate(cfg: RunConfig) -> RunConfig:
    """Check cross-field invariants; raises :class:`ConfigError`."""
    if cfg.kernel not in PRESETS:
        cfg.kernel_form()
    t0, r = cfg.interval()
    if not r > 0:
        raise ConfigError(f"problem.r: interval length must be positive, got {r}")
    if cfg.n < 2:
        raise ConfigError(f"problem.n: need at least 2 subintervals, got {cfg.n}")
    if cfg.lipschitz is not None and cfg.estimate_lipschitz:
        raise ConfigError("problem.lipschitz: give a value or 'estimate', not both")
    if cfg.estimate_lipschitz and cfg.y_box is None:
        raise ConfigError("problem.y_box: required when lipschitz = estimate")
    L = cfg.declared_lipschitz()
    if L is None and not cfg.estimate_lipschitz:
        raise ConfigError("problem.lipschitz: required for expression kernels (number or 'estimate')")
    if L is not None and not L > 0:
        raise ConfigError(f"problem.lipschitz: must be positive, got {L}")
    if cfg.weight == "constant" and not cfg.epsilon > 0:
        raise ConfigError("weight.epsilon: must be positive")
    if cfg.weight != "constant":
        try:
            named_weight(cfg.weight)
        except ValueError as exc:
            raise ConfigError(f"weight.name: {exc}") from None
    if cfg.eta != "optimal" and L is not None and not float(cfg.eta) > L:
        raise ConfigError(f"certificate.eta: {cfg.eta} must exceed L = {L}")
    if cfg.magnitude < 0:
        raise ConfigError("perturbation.magnitude: must be nonnegative")
    return cfg


def load_config(path: Union[str, Path], fmt: Optional[str] = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    fmt = fmt or ("json" if path.suffix.lower() == ".json" else "ini")
    raw = _raw_from_json(text, str(path)) if fmt == "json" else _raw_from_ini(text, str(path))
    return _from_raw(raw)


def with_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """Apply command-line overrides (``None`` values are ignored) and revalidate."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    return validate(replace(cfg, **changes)) if changes else cfg
