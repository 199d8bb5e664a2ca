"""Sandboxed expression language for user-supplied stream code.

Example::

    >>> e = parse("({$fahrenheit.channels.temp.current-value} - 32) / 1.8")
    >>> doc = {"channels": [{"name": "temp", "current-value": 14}], "lastUpdate": 1}
    >>> e.evaluate({"fahrenheit": doc})
    -10.0

The language has literals, ``{$alias.path}`` references into bound update
documents, arithmetic/comparison/logical operators, ``?:`` and a fixed set of
builtins. It has no assignment, loops, definitions or host access, so every
evaluation is bounded by the size of the tree.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from . import nodes
from .builtins import BUILTINS, tag
from .errors import EvalError, ExprSyntaxError, FilterError, UnboundAlias, UnknownFunction
from .evaluator import Binding, evaluate_node, navigate, resolve_path
from .nodes import dump
from .parser import parse_tree

__all__ = [
    "BUILTINS",
    "Binding",
    "EvalError",
    "ExprSyntaxError",
    "Expression",
    "FilterError",
    "UnboundAlias",
    "UnknownFunction",
    "dump",
    "evaluate",
    "evaluate_filter",
    "navigate",
    "nodes",
    "parse",
    "resolve_path",
    "tag",
]


def _aliases(node: nodes.Node) -> set[str]:
    found: set[str] = set()
    stack = [node]
    while stack:
        cur = stack.pop()
        if isinstance(cur, nodes.PathRef):
            found.add(cur.alias)
        elif isinstance(cur, nodes.Unary):
            stack.append(cur.operand)
        elif isinstance(cur, (nodes.Binary, nodes.Logical)):
            stack.extend((cur.left, cur.right))
        elif isinstance(cur, nodes.Conditional):
            stack.extend((cur.test, cur.then, cur.otherwise))
        elif isinstance(cur, nodes.Call):
            stack.extend(cur.args)
        elif isinstance(cur, nodes.ArrayLiteral):
            stack.extend(cur.items)
    return found


@dataclass(frozen=True)
class Expression:
    source: str
    ast: nodes.Node = field(compare=False)
    aliases: frozenset[str] = field(compare=False)

    def evaluate(self, binding: Binding):
        return evaluate_node(self.ast, binding)

    def evaluate_filter(self, binding: Binding) -> bool:
        return evaluate_filter(self, binding)

    def __str__(self) -> str:
        return self.source


def parse(text: str) -> Expression:
    tree = parse_tree(text)
    return Expression(text, tree, frozenset(_aliases(tree)))


def evaluate(expr: Expression, binding: Binding):
    return evaluate_node(expr.ast, binding)


def evaluate_filter(expr: Expression, binding: Binding) -> bool:
    try:
        result = evaluate_node(expr.ast, binding)
    except EvalError as exc:
        raise FilterError(f"filter '{expr.source}' failed: {exc}") from exc
    if not isinstance(result, bool):
        raise FilterError(f"filter '{expr.source}' produced {tag(result)}, not boolean")
    return result
