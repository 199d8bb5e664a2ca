"""Whitelisted builtin functions.

Semantics follow the JavaScript Math/String/Array methods of the same name
where one exists (index truncation and clamping for ``substring``/``slice``,
half-up ``round``).
"""
from __future__ import annotations

import math
from typing import Any, Callable

from .errors import EvalError

Value = Any  # float | bool | str | list | None


def tag(value: Value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, (int, float)):
        return "number"
    if isinstance(value, str):
        return "string"
    if isinstance(value, list):
        return "array"
    return type(value).__name__


def finite(x: float) -> float:
    if not math.isfinite(x):
        raise EvalError("Domain", "non-finite numeric result")
    return float(x)


def _expect(fn: str, value: Value, kind: str) -> Value:
    if value is None:
        raise EvalError("NullOperand", f"{fn}: null argument")
    if tag(value) != kind:
        raise EvalError("TypeMismatch", f"{fn}: expected {kind}, got {tag(value)}")
    return value


def values_equal(a: Value, b: Value) -> bool:
    ta, tb = tag(a), tag(b)
    if ta != tb:
        return False
    if ta == "array":
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    return a == b


def _to_int(x: float) -> int:
    # ToIntegerOrInfinity: truncate toward zero
    return int(x)


def _abs(x):
    return abs(float(_expect("math.abs", x, "number")))


def _min(*xs):
    return min(float(_expect("math.min", x, "number")) for x in xs)


def _max(*xs):
    return max(float(_expect("math.max", x, "number")) for x in xs)


def _floor(x):
    return float(math.floor(_expect("math.floor", x, "number")))


def _ceil(x):
    return float(math.ceil(_expect("math.ceil", x, "number")))


def _round(x):
    return float(math.floor(_expect("math.round", x, "number") + 0.5))


def _sqrt(x):
    x = _expect("math.sqrt", x, "number")
    if x < 0:
        raise EvalError("Domain", "math.sqrt of a negative number")
    return math.sqrt(x)


def _pow(base, exp):
    base = _expect("math.pow", base, "number")
    exp = _expect("math.pow", exp, "number")
    try:
        result = math.pow(base, exp)
    except (ValueError, OverflowError, ZeroDivisionError) as exc:
        raise EvalError("Domain", f"math.pow({base}, {exp}): {exc}") from None
    return finite(result)


def _str_length(s):
    return float(len(_expect("str.length", s, "string")))


def _upper(s):
    return _expect("str.upper", s, "string").upper()


def _lower(s):
    return _expect("str.lower", s, "string").lower()


def _substring(s, start, end=None):
    s = _expect("str.substring", s, "string")
    n = len(s)
    a = min(max(_to_int(_expect("str.substring", start, "number")), 0), n)
    b = n if end is None else min(max(_to_int(_expect("str.substring", end, "number")), 0), n)
    if a > b:
        a, b = b, a
    return s[a:b]


def _str_index_of(s, sub):
    return float(_expect("str.indexOf", s, "string").find(_expect("str.indexOf", sub, "string")))


def _str_concat(*parts):
    return "".join(_expect("str.concat", p, "string") for p in parts)


def _arr_length(a):
    return float(len(_expect("arr.length", a, "array")))


def _arr_concat(*arrays):
    out: list = []
    for a in arrays:
        out.extend(_expect("arr.concat", a, "array"))
    return out


def _relative(index: float, n: int) -> int:
    i = _to_int(index)
    return max(n + i, 0) if i < 0 else min(i, n)


def _slice(a, start, end=None):
    a = _expect("arr.slice", a, "array")
    n = len(a)
    lo = _relative(_expect("arr.slice", start, "number"), n)
    hi = n if end is None else _relative(_expect("arr.slice", end, "number"), n)
    return list(a[lo:hi])


def _arr_index_of(a, value):
    a = _expect("arr.indexOf", a, "array")
    if value is None:
        raise EvalError("NullOperand", "arr.indexOf: null argument")
    for i, item in enumerate(a):
        if values_equal(item, value):
            return float(i)
    return -1.0


def _numbers(fn: str, a) -> list[float]:
    return [float(_expect(fn, x, "number")) for x in _expect(fn, a, "array")]


def _sum(a):
    return finite(math.fsum(_numbers("arr.sum", a)))


def _avg(a):
    xs = _numbers("arr.avg", a)
    if not xs:
        raise EvalError("Domain", "arr.avg of an empty array")
    return finite(math.fsum(xs) / len(xs))


# name -> (implementation, min arity, max arity or None for variadic)
BUILTINS: dict[str, tuple[Callable[..., Value], int, int | None]] = {
    "math.abs": (_abs, 1, 1),
    "math.min": (_min, 1, None),
    "math.max": (_max, 1, None),
    "math.floor": (_floor, 1, 1),
    "math.ceil": (_ceil, 1, 1),
    "math.round": (_round, 1, 1),
    "math.sqrt": (_sqrt, 1, 1),
    "math.pow": (_pow, 2, 2),
    "str.length": (_str_length, 1, 1),
    "str.upper": (_upper, 1, 1),
    "str.lower": (_lower, 1, 1),
    "str.substring": (_substring, 2, 3),
    "str.indexOf": (_str_index_of, 2, 2),
    "str.concat": (_str_concat, 1, None),
    "arr.length": (_arr_length, 1, 1),
    "arr.concat": (_arr_concat, 1, None),
    "arr.slice": (_slice, 2, 3),
    "arr.indexOf": (_arr_index_of, 2, 2),
    "arr.sum": (_sum, 1, 1),
    "arr.avg": (_avg, 1, 1),
}

NAMESPACES = frozenset(name.split(".")[0] for name in BUILTINS)
