"""Tokenizer and recursive-descent parser.

Precedence, lowest first::

    ?:   ||   &&   == !=   < <= > >=   + -   * / %   unary ! -   call   primary

Path references are written ``{$alias.seg.seg}``; whitespace inside the braces
is ignored so long references can be wrapped across lines.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from . import nodes as n
from .builtins import BUILTINS, NAMESPACES
from .errors import ExprSyntaxError, UnknownFunction

MAX_DEPTH = 200

_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_SEGMENT = re.compile(r"[A-Za-z0-9_\-]+")
_OPERATORS = ("||", "&&", "==", "!=", "<=", ">=", "<", ">", "+", "-", "*", "/", "%", "!",
              "?", ":", "(", ")", "[", "]", ",", ".")
_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", "'": "'", '"': '"', "0": "\0"}


@dataclass(frozen=True, slots=True)
class Token:
    kind: str  # "num" | "str" | "ident" | "path" | "op" | "eof"
    value: object
    pos: int  # character index


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.i = 0

    def error(self, message: str, pos: int) -> ExprSyntaxError:
        return ExprSyntaxError(message, byte_offset(self.text, pos))

    def tokens(self) -> list[Token]:
        out = []
        text = self.text
        while True:
            while self.i < len(text) and text[self.i].isspace():
                self.i += 1
            if self.i >= len(text):
                out.append(Token("eof", None, self.i))
                return out
            c = text[self.i]
            start = self.i
            if c.isdigit() or (c == "." and text[self.i + 1 : self.i + 2].isdigit()):
                m = _NUMBER.match(text, self.i)
                self.i = m.end()
                out.append(Token("num", float(m.group()), start))
            elif c in "'\"":
                out.append(Token("str", self._string(c), start))
            elif c == "{":
                out.append(Token("path", self._path(), start))
            elif c.isalpha() or c == "_":
                m = _IDENT.match(text, self.i)
                self.i = m.end()
                out.append(Token("ident", m.group(), start))
            else:
                for op in _OPERATORS:
                    if text.startswith(op, self.i):
                        self.i += len(op)
                        out.append(Token("op", op, start))
                        break
                else:
                    raise self.error(f"unexpected character {c!r}", start)

    def _string(self, quote: str) -> str:
        start = self.i
        self.i += 1
        chars = []
        text = self.text
        while self.i < len(text):
            c = text[self.i]
            if c == quote:
                self.i += 1
                return "".join(chars)
            if c == "\\":
                esc = text[self.i + 1 : self.i + 2]
                if esc not in _ESCAPES:
                    raise self.error("invalid escape sequence", self.i)
                chars.append(_ESCAPES[esc])
                self.i += 2
                continue
            chars.append(c)
            self.i += 1
        raise self.error("unterminated string literal", start)

    def _skip_ws(self) -> None:
        while self.i < len(self.text) and self.text[self.i].isspace():
            self.i += 1

    def _path(self) -> tuple[str, tuple[str, ...]]:
        start = self.i
        text = self.text
        if not text.startswith("{$", self.i):
            raise self.error("expected '{$' to open a path reference", start)
        self.i += 2
        self._skip_ws()
        m = _IDENT.match(text, self.i)
        if not m:
            raise self.error("path reference needs an alias", start)
        alias = m.group()
        self.i = m.end()
        segments = []
        while True:
            self._skip_ws()
            if self.i >= len(text):
                raise self.error("unterminated path reference", start)
            c = text[self.i]
            if c == "}":
                self.i += 1
                return alias, tuple(segments)
            if c != ".":
                raise self.error("malformed path reference", start)
            self.i += 1
            self._skip_ws()
            m = _SEGMENT.match(text, self.i)
            if not m:
                raise self.error("empty path segment", start)
            segments.append(m.group())
            self.i = m.end()


def byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _Lexer(text).tokens()
        self.k = 0
        self.depth = 0

    def error(self, message: str, tok: Token | None = None) -> ExprSyntaxError:
        tok = tok or self.peek()
        return ExprSyntaxError(message, byte_offset(self.text, tok.pos))

    def peek(self) -> Token:
        return self.toks[self.k]

    def advance(self) -> Token:
        tok = self.toks[self.k]
        self.k += 1
        return tok

    def at(self, *ops: str) -> bool:
        tok = self.peek()
        return tok.kind == "op" and tok.value in ops

    def expect(self, op: str) -> Token:
        if not self.at(op):
            tok = self.peek()
            found = "end of input" if tok.kind == "eof" else repr(tok.value)
            raise self.error(f"expected '{op}', found {found}")
        return self.advance()

    def parse(self) -> n.Node:
        node = self.ternary()
        if self.peek().kind != "eof":
            raise self.error(f"unexpected token {self.peek().value!r}")
        return node

    def ternary(self) -> n.Node:
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise self.error("expression nested too deeply")
        try:
            test = self.binary(0)
            if self.at("?"):
                tok = self.advance()
                then = self.ternary()
                self.expect(":")
                otherwise = self.ternary()
                return n.Conditional(test, then, otherwise, tok.pos)
            return test
        finally:
            self.depth -= 1

    _LEVELS = (("||",), ("&&",), ("==", "!="), ("<", "<=", ">", ">="), ("+", "-"), ("*", "/", "%"))

    def binary(self, level: int) -> n.Node:
        if level == len(self._LEVELS):
            return self.unary()
        ops = self._LEVELS[level]
        left = self.binary(level + 1)
        while self.at(*ops):
            tok = self.advance()
            right = self.binary(level + 1)
            cls = n.Logical if tok.value in ("&&", "||") else n.Binary
            left = cls(tok.value, left, right, tok.pos)
        return left

    def unary(self) -> n.Node:
        if self.at("!", "-"):
            tok = self.advance()
            self.depth += 1
            if self.depth > MAX_DEPTH:
                raise self.error("expression nested too deeply")
            try:
                return n.Unary(tok.value, self.unary(), tok.pos)
            finally:
                self.depth -= 1
        return self.primary()

    def primary(self) -> n.Node:
        tok = self.advance()
        if tok.kind == "num":
            return n.Number(tok.value, tok.pos)
        if tok.kind == "str":
            return n.String(tok.value, tok.pos)
        if tok.kind == "path":
            alias, segments = tok.value
            return n.PathRef(alias, segments, tok.pos)
        if tok.kind == "ident":
            if tok.value in ("true", "false"):
                return n.Boolean(tok.value == "true", tok.pos)
            return self.call(tok)
        if tok.kind == "op" and tok.value == "(":
            inner = self.ternary()
            self.expect(")")
            return inner
        if tok.kind == "op" and tok.value == "[":
            items = self.arguments("]")
            return n.ArrayLiteral(tuple(items), tok.pos)
        self.k -= 1
        found = "end of input" if tok.kind == "eof" else repr(tok.value)
        raise self.error(f"unexpected {found}")

    def arguments(self, closer: str) -> list[n.Node]:
        items: list[n.Node] = []
        if self.at(closer):
            self.advance()
            return items
        while True:
            items.append(self.ternary())
            if self.at(","):
                self.advance()
                continue
            self.expect(closer)
            return items

    def call(self, ident: Token) -> n.Node:
        offset = byte_offset(self.text, ident.pos)
        if ident.value not in NAMESPACES:
            raise UnknownFunction(f"unknown name '{ident.value}'", offset)
        self.expect(".")
        name_tok = self.advance()
        if name_tok.kind != "ident":
            raise self.error("expected a function name", name_tok)
        qualname = f"{ident.value}.{name_tok.value}"
        if qualname not in BUILTINS:
            raise UnknownFunction(f"unknown function '{qualname}'", offset)
        self.expect("(")
        args = self.arguments(")")
        _, lo, hi = BUILTINS[qualname]
        if len(args) < lo or (hi is not None and len(args) > hi):
            if hi == lo:
                arity = str(lo)
            elif hi is None:
                arity = f"at least {lo}"
            else:
                arity = f"{lo} to {hi}"
            raise ExprSyntaxError(f"{qualname} takes {arity} argument(s), got {len(args)}", offset)
        return n.Call(ident.value, name_tok.value, tuple(args), ident.pos)


def parse_tree(text: str) -> n.Node:
    if not isinstance(text, str):
        raise ExprSyntaxError("expression must be a string", 0)
    if not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    try:
        return _Parser(text).parse()
    except RecursionError:
        raise ExprSyntaxError("expression nested too deeply", 0) from None
