"""Small guard/expression language used by component functions.

Grammar: literals (true/false, numbers, quoted enum symbols), port names,
comparisons (== != < >), boolean connectives (and or not) and arithmetic
(+ - * /).  Parsed through Python's ast module with a strict node whitelist,
then evaluated by a tiny interpreter so that float equality can honor a
tolerance.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from typing import Any, Mapping


class ExpressionError(Exception):
    """Raised for syntax errors or evaluation failures in guard/expr code."""


# Names with fixed meanings; components may not use them as port names.
KEYWORDS = {"true": True, "false": False, "True": True, "False": False}

_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
}

_COMPARES = (ast.Eq, ast.NotEq, ast.Lt, ast.Gt)


def _collect_names(tree: ast.AST) -> frozenset[str]:
    names = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Name) and node.id not in KEYWORDS:
            names.add(node.id)
    return frozenset(names)


def _check(node: ast.AST, src: str) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body, src)
    elif isinstance(node, ast.BoolOp):
        if not isinstance(node.op, (ast.And, ast.Or)):
            raise ExpressionError(f"unsupported boolean operator in {src!r}")
        for v in node.values:
            _check(v, src)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.Not, ast.USub)):
            raise ExpressionError(f"unsupported unary operator in {src!r}")
        _check(node.operand, src)
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ExpressionError(f"unsupported arithmetic operator in {src!r}")
        _check(node.left, src)
        _check(node.right, src)
    elif isinstance(node, ast.Compare):
        if len(node.ops) != 1 or not isinstance(node.ops[0], _COMPARES):
            raise ExpressionError(
                f"only single == != < > comparisons are allowed in {src!r}"
            )
        _check(node.left, src)
        _check(node.comparators[0], src)
    elif isinstance(node, ast.Name):
        pass
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (bool, int, float, str)):
            raise ExpressionError(f"unsupported literal {node.value!r} in {src!r}")
    else:
        raise ExpressionError(
            f"unsupported syntax ({type(node).__name__}) in {src!r}"
        )


@dataclass(frozen=True)
class Expr:
    """A compiled expression; `mentions` is the set of port names it reads."""

    src: str
    mentions: frozenset[str]
    _tree: ast.expr = field(repr=False, compare=False)

    def __eq__(self, other):  # round-trip identity is on source text
        return isinstance(other, Expr) and self.src == other.src

    def __hash__(self):
        return hash(self.src)


def compile_source(src: str) -> Expr:
    if not isinstance(src, str) or not src.strip():
        raise ExpressionError(f"empty expression {src!r}")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"syntax error in {src!r}: {exc.msg}") from exc
    _check(tree, src)
    return Expr(src=src, mentions=_collect_names(tree), _tree=tree.body)


def _eq(a: Any, b: Any, tolerance: float) -> bool:
    if isinstance(a, float) or isinstance(b, float):
        if isinstance(a, (int, float)) and isinstance(b, (int, float)):
            return abs(a - b) <= tolerance
    return a == b


def evaluate(expr: Expr, env: Mapping[str, Any], tolerance: float = 0.0) -> Any:
    """Evaluate against port values; comparisons on floats use `tolerance`."""

    def ev(node: ast.expr) -> Any:
        if isinstance(node, ast.Constant):
            return node.value
        if isinstance(node, ast.Name):
            if node.id in KEYWORDS:
                return KEYWORDS[node.id]
            try:
                return env[node.id]
            except KeyError:
                raise ExpressionError(
                    f"unknown name {node.id!r} in {expr.src!r}"
                ) from None
        if isinstance(node, ast.BoolOp):
            if isinstance(node.op, ast.And):
                result = True
                for v in node.values:
                    result = ev(v)
                    if not result:
                        return result
                return result
            result = False
            for v in node.values:
                result = ev(v)
                if result:
                    return result
            return result
        if isinstance(node, ast.UnaryOp):
            operand = ev(node.operand)
            if isinstance(node.op, ast.Not):
                return not operand
            return -operand
        if isinstance(node, ast.BinOp):
            left, right = ev(node.left), ev(node.right)
            try:
                return _BINOPS[type(node.op)](left, right)
            except ZeroDivisionError:
                raise ExpressionError(f"division by zero in {expr.src!r}") from None
            except TypeError as exc:
                raise ExpressionError(f"type error in {expr.src!r}: {exc}") from None
        if isinstance(node, ast.Compare):
            left, right = ev(node.left), ev(node.comparators[0])
            op = node.ops[0]
            try:
                if isinstance(op, ast.Eq):
                    return _eq(left, right, tolerance)
                if isinstance(op, ast.NotEq):
                    return not _eq(left, right, tolerance)
                if isinstance(op, ast.Lt):
                    return left < right
                return left > right
            except TypeError as exc:
                raise ExpressionError(f"type error in {expr.src!r}: {exc}") from None
        raise ExpressionError(f"unsupported node in {expr.src!r}")

    return ev(expr._tree)
