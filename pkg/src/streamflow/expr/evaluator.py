"""Tree-walking evaluator.

Values are plain Python objects: ``float`` (Number), ``bool``, ``str``,
``list`` (Array) and ``None`` (Null). There is no implicit coercion: an
operator that receives the wrong kind of value raises :class:`EvalError`.
"""
from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from typing import Any

from . import nodes as n
from .builtins import BUILTINS, Value, finite, tag, values_equal
from .errors import EvalError, UnboundAlias

Binding = Mapping[str, Mapping[str, Any]]


def to_value(raw: Any) -> Value:
    """Convert a JSON-ish document fragment into an expression value."""
    if raw is None or isinstance(raw, (bool, str)):
        return raw
    if isinstance(raw, (int, float)):
        return float(raw)
    if isinstance(raw, list):
        return [to_value(x) for x in raw]
    raise EvalError("TypeMismatch", f"path addresses a {type(raw).__name__}, not a value")


def navigate(document: Any, segments: Sequence[str]) -> Any:
    """Walk ``segments`` through a document.

    A segment applied to a list of named objects (such as ``channels``)
    selects the element with that ``name``. Absent segments give ``None``.
    """
    cur = document
    for seg in segments:
        if isinstance(cur, Mapping):
            cur = cur.get(seg)
        elif isinstance(cur, list):
            cur = next(
                (item for item in cur if isinstance(item, Mapping) and item.get("name") == seg),
                None,
            )
        else:
            return None
        if cur is None:
            return None
    return cur


def resolve_path(binding: Binding, alias: str, segments: Sequence[str]) -> Value:
    if alias not in binding:
        raise UnboundAlias(alias)
    return to_value(navigate(binding[alias], segments))


def _number(op: str, v: Value) -> float:
    if tag(v) != "number":
        raise EvalError("TypeMismatch", f"'{op}' needs numbers, got {tag(v)}")
    return v


def _no_null(op: str, *values: Value) -> None:
    if any(v is None for v in values):
        raise EvalError("NullOperand", f"null operand to '{op}'")


def _arith(op: str, a: Value, b: Value) -> Value:
    if op == "+" and isinstance(a, str) and isinstance(b, str):
        return a + b
    a, b = _number(op, a), _number(op, b)
    if op == "+":
        return finite(a + b)
    if op == "-":
        return finite(a - b)
    if op == "*":
        return finite(a * b)
    if b == 0:
        raise EvalError("DivByZero", f"'{op}' by zero")
    if op == "/":
        return finite(a / b)
    return finite(math.fmod(a, b))


def _compare(op: str, a: Value, b: Value) -> bool:
    ta, tb = tag(a), tag(b)
    if ta != tb or ta not in ("number", "string", "boolean"):
        raise EvalError("TypeMismatch", f"cannot compare {ta} {op} {tb}")
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def _boolean(what: str, v: Value) -> bool:
    if v is None:
        raise EvalError("NullOperand", f"null {what}")
    if not isinstance(v, bool):
        raise EvalError("TypeMismatch", f"{what} must be boolean, got {tag(v)}")
    return v


def evaluate_node(node: n.Node, binding: Binding) -> Value:
    kind = type(node)
    if kind is n.Number or kind is n.String or kind is n.Boolean:
        return node.value
    if kind is n.PathRef:
        return resolve_path(binding, node.alias, node.segments)
    if kind is n.Binary:
        a = evaluate_node(node.left, binding)
        b = evaluate_node(node.right, binding)
        _no_null(node.op, a, b)
        if node.op == "==":
            return values_equal(a, b)
        if node.op == "!=":
            return not values_equal(a, b)
        if node.op in ("<", "<=", ">", ">="):
            return _compare(node.op, a, b)
        return _arith(node.op, a, b)
    if kind is n.Logical:
        left = _boolean(f"left operand of '{node.op}'", evaluate_node(node.left, binding))
        if node.op == "&&" and not left:
            return False
        if node.op == "||" and left:
            return True
        return _boolean(f"right operand of '{node.op}'", evaluate_node(node.right, binding))
    if kind is n.Unary:
        v = evaluate_node(node.operand, binding)
        _no_null(node.op, v)
        if node.op == "!":
            return not _boolean("operand of '!'", v)
        return -_number("-", v)
    if kind is n.Conditional:
        test = _boolean("condition", evaluate_node(node.test, binding))
        return evaluate_node(node.then if test else node.otherwise, binding)
    if kind is n.Call:
        fn = BUILTINS[node.qualname][0]
        args = [evaluate_node(a, binding) for a in node.args]
        _no_null(node.qualname, *args)
        return fn(*args)
    if kind is n.ArrayLiteral:
        return [evaluate_node(item, binding) for item in node.items]
    raise EvalError("TypeMismatch", f"unsupported node {kind.__name__}")
