from __future__ import annotations


class ExprSyntaxError(ValueError):
    """Raised by the parser; ``offset`` is a byte offset into the UTF-8 source."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} at offset {offset}")
        self.detail = message


class UnknownFunction(ExprSyntaxError):
    pass


class EvalError(ValueError):
    """Runtime failure of an expression.

    ``kind`` is one of TypeMismatch, NullOperand, DivByZero, Domain, UnboundAlias.
    """

    def __init__(self, kind: str, message: str):
        self.kind = kind
        super().__init__(f"{kind}: {message}")


class UnboundAlias(EvalError):
    def __init__(self, alias: str):
        self.alias = alias
        super().__init__("UnboundAlias", f"alias '{alias}' is not bound")


class FilterError(ValueError):
    """A filter failed to produce a boolean; callers treat it as filter-false."""
