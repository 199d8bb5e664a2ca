"""AST node kinds of the expression language.

The set below is closed: the parser can only ever build these, and the
evaluator has a handler for each one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union


@dataclass(frozen=True, slots=True)
class Number:
    value: float
    offset: int = 0


@dataclass(frozen=True, slots=True)
class String:
    value: str
    offset: int = 0


@dataclass(frozen=True, slots=True)
class Boolean:
    value: bool
    offset: int = 0


@dataclass(frozen=True, slots=True)
class ArrayLiteral:
    items: tuple[Node, ...]
    offset: int = 0


@dataclass(frozen=True, slots=True)
class PathRef:
    alias: str
    segments: tuple[str, ...]
    offset: int = 0


@dataclass(frozen=True, slots=True)
class Unary:
    op: str
    operand: Node
    offset: int = 0


@dataclass(frozen=True, slots=True)
class Binary:
    op: str
    left: Node
    right: Node
    offset: int = 0


@dataclass(frozen=True, slots=True)
class Logical:
    op: str
    left: Node
    right: Node
    offset: int = 0


@dataclass(frozen=True, slots=True)
class Conditional:
    test: Node
    then: Node
    otherwise: Node
    offset: int = 0


@dataclass(frozen=True, slots=True)
class Call:
    namespace: str
    name: str
    args: tuple[Node, ...]
    offset: int = 0

    @property
    def qualname(self) -> str:
        return f"{self.namespace}.{self.name}"


Node = Union[
    Number, String, Boolean, ArrayLiteral, PathRef, Unary, Binary, Logical, Conditional, Call
]

_OP_NAMES = {
    "+": "Add",
    "-": "Sub",
    "*": "Mul",
    "/": "Div",
    "%": "Mod",
    "<": "Lt",
    "<=": "Le",
    ">": "Gt",
    ">=": "Ge",
    "==": "Eq",
    "!=": "Ne",
    "&&": "And",
    "||": "Or",
}


def _fmt_number(value: float) -> str:
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def dump(node: Node) -> str:
    """Render a tree compactly, e.g. ``Div(Sub(PathRef[a, x], 32), 1.8)``."""
    if isinstance(node, Number):
        return _fmt_number(node.value)
    if isinstance(node, String):
        return repr(node.value)
    if isinstance(node, Boolean):
        return "true" if node.value else "false"
    if isinstance(node, ArrayLiteral):
        return "Array(" + ", ".join(dump(i) for i in node.items) + ")"
    if isinstance(node, PathRef):
        return "PathRef[" + ", ".join((node.alias, *node.segments)) + "]"
    if isinstance(node, Unary):
        return ("Not(" if node.op == "!" else "Neg(") + dump(node.operand) + ")"
    if isinstance(node, (Binary, Logical)):
        return f"{_OP_NAMES[node.op]}({dump(node.left)}, {dump(node.right)})"
    if isinstance(node, Conditional):
        return f"Cond({dump(node.test)}, {dump(node.then)}, {dump(node.otherwise)})"
    if isinstance(node, Call):
        return f"{node.qualname}(" + ", ".join(dump(a) for a in node.args) + ")"
    raise TypeError(f"not an expression node: {node!r}")
