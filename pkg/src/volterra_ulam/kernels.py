"""Built-in problems and a small arithmetic language for user kernels."""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import KernelForm, KernelTag


class ExpressionError(ValueError):
    pass


_FUNCS = {"exp": np.exp, "sin": np.sin}
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply}


def _compile(node: ast.AST, names: tuple) -> Callable[[dict], np.ndarray]:
    if isinstance(node, ast.Expression):
        return _compile(node.body, names)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        value = float(node.value)
        return lambda env: value
    if isinstance(node, ast.Name):
        if node.id not in names:
            raise ExpressionError(f"unknown variable {node.id!r}; allowed: {', '.join(names)}")
        key = node.id
        return lambda env: env[key]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _compile(node.operand, names)
        if isinstance(node.op, ast.USub):
            return lambda env: np.negative(inner(env))
        return inner
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        left, right = _compile(node.left, names), _compile(node.right, names)
        return lambda env: op(left(env), right(env))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
            and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords:
        fn = _FUNCS[node.func.id]
        arg = _compile(node.args[0], names)
        return lambda env: fn(arg(env))
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")


def parse_kernel(expr: str, form: KernelTag | str = KernelTag.STATE_ONLY) -> KernelForm:
    """Compile ``expr`` (``+ - *``, numbers, ``exp``, ``sin``) into a kernel.

    State-only kernels may use ``s`` and ``y``; bivariate kernels also ``t``.
    """
    tag = KernelTag(form)
    names = ("t", "s", "y") if tag is KernelTag.BIVARIATE else ("s", "y")
    try:
        tree = ast.parse(expr.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse kernel expression {expr!r}: {exc.msg}") from None
    body = _compile(tree, names)
    if tag is KernelTag.BIVARIATE:
        return KernelForm.bivariate(lambda t, s, y: body({"t": t, "s": s, "y": y}), expr)
    return KernelForm.state_only(lambda s, y: body({"s": s, "y": y}), expr)


@dataclass(frozen=True)
class Preset:
    kernel: KernelForm
    t0: float
    r: float
    lipschitz: float
    exact: Optional[Callable[[np.ndarray], np.ndarray]] = None
    description: str = ""


PRESETS = {
    "jung-example": Preset(
        KernelForm.state_only(lambda s, y: s * y, "s*y"), 0.0, 2.0, 2.0,
        lambda t: np.zeros_like(t), "y(t) = int_0^t s y(s) ds on [0, 2]",
    ),
    "exp-growth": Preset(
        KernelForm.state_only(lambda s, y: y + 1.0, "y+1"), 0.0, 1.0, 1.0,
        lambda t: np.expm1(t), "y(t) = int_0^t (y(s) + 1) ds on [0, 1]",
    ),
    "bivariate-product": Preset(
        KernelForm.bivariate(lambda t, s, y: t * s * y, "t*s*y"), 0.0, 1.0, 1.0,
        lambda t: np.zeros_like(t), "y(t) = int_0^t t s y(s) ds on [0, 1]",
    ),
    "convolution": Preset(
        KernelForm.bivariate(lambda t, s, y: np.exp(s - t) * y + 1.0, "exp(s-t)*y+1"),
        0.0, 1.0, math.e,
        lambda t: t + 0.5 * t * t, "y(t) = int_0^t (e^{s-t} y(s) + 1) ds on [0, 1]",
    ),
    "sine": Preset(
        KernelForm.state_only(lambda s, y: np.sin(y) + s, "sin(y)+s"), 0.0, 1.0, 1.0,
        None, "y(t) = int_0^t (sin y(s) + s) ds on [0, 1]",
    ),
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown built-in problem {name!r}; choose from {sorted(PRESETS)}") from None
