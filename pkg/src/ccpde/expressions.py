"""Tiny arithmetic expression compiler for coefficient and data entries.

The grammar covers +, -, *, /, ** (also the pow() call), exp, sin, cos,
sqrt, abs, numeric literals, and the variables x1..xn.  Expressions are
compiled to vectorized callables: each variable may be a scalar or a
numpy array.
"""

from __future__ import annotations

import ast

import numpy as np

from .errors import ExpressionError

_FUNCS = {
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "pow": np.power,
    "log": np.log,
    "tanh": np.tanh,
    "min": np.minimum,
    "max": np.maximum,
}

_CONSTS = {"pi": np.pi, "e": np.e}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def compile_expression(src, n):
    """Compile ``src`` into a callable taking an n-tuple/array of coordinates.

    The returned function accepts either a point of shape (n,) or a
    coordinate array of shape (..., n) and evaluates elementwise.
    """
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {src!r}: {exc}") from exc

    names = {f"x{i + 1}": i for i in range(n)}

    def ev(node, coords):
        if isinstance(node, ast.Expression):
            return ev(node.body, coords)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, (int, float)):
                return float(node.value)
            raise ExpressionError(f"non-numeric constant {node.value!r}")
        if isinstance(node, ast.Name):
            if node.id in names:
                return coords[..., names[node.id]]
            if node.id in _CONSTS:
                return _CONSTS[node.id]
            raise ExpressionError(f"unknown name {node.id!r} (variables are x1..x{n})")
        if isinstance(node, ast.UnaryOp):
            if isinstance(node.op, ast.USub):
                return -ev(node.operand, coords)
            if isinstance(node.op, ast.UAdd):
                return ev(node.operand, coords)
            raise ExpressionError("unsupported unary operator")
        if isinstance(node, ast.BinOp):
            fn = _BINOPS.get(type(node.op))
            if fn is None:
                raise ExpressionError(f"unsupported operator {type(node.op).__name__}")
            return fn(ev(node.left, coords), ev(node.right, coords))
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
                raise ExpressionError("only exp/sin/cos/sqrt/abs/pow/log/tanh/min/max calls allowed")
            if node.keywords:
                raise ExpressionError("keyword arguments not allowed")
            args = [ev(a, coords) for a in node.args]
            return _FUNCS[node.func.id](*args)
        raise ExpressionError(f"unsupported syntax element {type(node).__name__}")

    # validate once against a dummy point so malformed input fails at load time
    ev(tree, np.zeros((n,)) + 0.5)

    def fn(coords):
        coords = np.asarray(coords, dtype=float)
        out = ev(tree, coords)
        return np.broadcast_to(np.asarray(out, dtype=float), coords.shape[:-1]).copy()

    fn.source = src
    return fn
