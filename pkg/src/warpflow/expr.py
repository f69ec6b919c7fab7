"""A small, safe arithmetic language for initial data and constants.

Grammar: numbers, ``+ - * / ^`` (``^`` is power; ``**`` is accepted too),
parentheses, unary signs, the functions ``cos``, ``sin``, ``exp``, the
constants ``pi`` and ``e``, and whatever variables the caller allows
(``theta``/``θ`` on the sphere, ``x``, ``y`` on the torus).

Expressions are parsed with :mod:`ast` and evaluated by walking a
whitelist of node types, never with ``eval``.
"""

from __future__ import annotations

import ast
import math
import operator

import numpy as np

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}
FUNCTIONS = {"cos": np.cos, "sin": np.sin, "exp": np.exp}
CONSTANTS = {"pi": math.pi, "e": math.e}


class ExpressionError(ValueError):
    pass


def compile_expression(text: str, variables=()) -> ast.Expression:
    """Parse and validate ``text``; raises :class:`ExpressionError`."""
    source = text.replace("^", "**").replace("θ", "theta")
    allowed = set(variables) | {"theta" for v in variables if v == "θ"}
    try:
        tree = ast.parse(source.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {text!r}: {exc.msg}") from None
    for node in ast.walk(tree):
        if isinstance(node, (ast.Expression, ast.Load)) or type(node) in _BINOPS or type(node) in _UNARY:
            continue
        if isinstance(node, (ast.BinOp, ast.UnaryOp)):
            op = node.op
            if type(op) not in _BINOPS and type(op) not in _UNARY:
                raise ExpressionError(f"operator {type(op).__name__} not allowed")
            continue
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise ExpressionError(f"literal {node.value!r} not allowed")
            continue
        if isinstance(node, ast.Call):
            if (not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS
                    or len(node.args) != 1 or node.keywords):
                raise ExpressionError("only cos(.), sin(.), exp(.) calls are allowed")
            continue
        if isinstance(node, ast.Name):
            if node.id in FUNCTIONS:
                continue
            if node.id not in CONSTANTS and node.id not in allowed:
                raise ExpressionError(f"unknown name {node.id!r}")
            continue
        raise ExpressionError(f"syntax {type(node).__name__} not allowed")
    return tree


def _eval(node, env):
    if isinstance(node, ast.Expression):
        return _eval(node.body, env)
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id] if node.id in env else CONSTANTS[node.id]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_eval(node.operand, env))
    if isinstance(node, ast.Call):
        return FUNCTIONS[node.func.id](_eval(node.args[0], env))
    raise ExpressionError(f"cannot evaluate {type(node).__name__}")


def evaluate(text: str, variables: dict):
    """Evaluate ``text`` with the given variable arrays (broadcast result)."""
    env = dict(variables)
    if "θ" in env:
        env.setdefault("theta", env["θ"])
    tree = compile_expression(text, env.keys())
    with np.errstate(all="ignore"):
        return _eval(tree, env)


def evaluate_constant(text: str) -> float:
    value = evaluate(text, {})
    value = float(value)
    if not math.isfinite(value):
        raise ExpressionError(f"{text!r} is not finite")
    return value
