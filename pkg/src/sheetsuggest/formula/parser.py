"""Tokenizer and recursive-descent parser for spreadsheet formulas.

Grammar (binary operators left-associative, loosest to tightest):

    formula := "=" expr
    expr    := cmp
    cmp     := concat (("=" | "<>" | "<" | "<=" | ">" | ">=") concat)*
    concat  := add ("&" add)*
    add     := mul (("+" | "-") mul)*
    mul     := unary (("*" | "/") unary)*
    unary   := ("+" | "-") unary | primary
    primary := NUMBER | STRING | call | reference | "(" expr ")"

References may be sheet-qualified (``Sheet2!B5``, ``'My Sheet'!A1:A9``) and
may carry ``$`` absolute markers.  Bare names (named ranges) and scientific
notation are not part of the language and raise a syntax error.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..grid import A1ParseError, CellAddr, parse_a1_component
from .nodes import (
    BINARY_OPS,
    Binary,
    Call,
    CellRef,
    Node,
    NumberLit,
    RangeRef,
    SheetRef,
    StringLit,
    Unary,
)


class FormulaSyntaxError(Exception):
    """Formula text that does not parse; carries the character position."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


# Token kinds
_NUMBER = "number"
_STRING = "string"
_IDENT = "ident"
_REF = "ref"
_QUOTED_NAME = "quoted_name"
_SYMBOL = "symbol"
_END = "end"

_NUMBER_RE = re.compile(r"\d+(?:\.\d+)?|\.\d+")
_REF_RE = re.compile(r"\$?[A-Za-z]{1,3}\$?\d+(?![\w.])")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*")
_SYMBOLS = ("<=", ">=", "<>", "=", "<", ">", "+", "-", "*", "/", "&", "(", ")", ",", ":", "!")


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str, base: int = 0) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == '"':
            j = i + 1
            chunks = []
            while True:
                if j >= n:
                    raise FormulaSyntaxError("unterminated string literal", base + i)
                if text[j] == '"':
                    if j + 1 < n and text[j + 1] == '"':
                        chunks.append('"')
                        j += 2
                        continue
                    break
                chunks.append(text[j])
                j += 1
            tokens.append(_Token(_STRING, "".join(chunks), base + i))
            i = j + 1
            continue
        if ch == "'":
            j = text.find("'", i + 1)
            if j < 0:
                raise FormulaSyntaxError("unterminated quoted sheet name", base + i)
            tokens.append(_Token(_QUOTED_NAME, text[i + 1 : j], base + i))
            i = j + 1
            continue
        m = _NUMBER_RE.match(text, i)
        if m:
            tokens.append(_Token(_NUMBER, m.group(), base + i))
            i = m.end()
            continue
        m = _REF_RE.match(text, i)
        if m:
            tokens.append(_Token(_REF, m.group(), base + i))
            i = m.end()
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            tokens.append(_Token(_IDENT, m.group(), base + i))
            i = m.end()
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(_Token(_SYMBOL, sym, base + i))
                i += len(sym)
                break
        else:
            raise FormulaSyntaxError(f"unexpected character {ch!r}", base + i)
    tokens.append(_Token(_END, "", base + n))
    return tokens


def _parse_ref_component(token: _Token) -> tuple[CellAddr, bool, bool]:
    try:
        return parse_a1_component(token.text)
    except A1ParseError as exc:
        raise FormulaSyntaxError(str(exc), token.pos) from None


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self._tokens = tokens
        self._i = 0

    def _peek(self) -> _Token:
        return self._tokens[self._i]

    def _next(self) -> _Token:
        tok = self._tokens[self._i]
        self._i += 1
        return tok

    def _expect_symbol(self, sym: str) -> _Token:
        tok = self._peek()
        if tok.kind != _SYMBOL or tok.text != sym:
            raise FormulaSyntaxError(f"expected {sym!r}", tok.pos)
        return self._next()

    def _match_symbol(self, *syms: str) -> _Token | None:
        tok = self._peek()
        if tok.kind == _SYMBOL and tok.text in syms:
            return self._next()
        return None

    # -- precedence ladder --------------------------------------------------

    def parse_expr(self) -> Node:
        return self._binary(1)

    def _binary(self, prec: int) -> Node:
        if prec > 4:
            return self._unary()
        ops = [sym for sym, p in BINARY_OPS.items() if p == prec]
        node = self._binary(prec + 1)
        while True:
            tok = self._match_symbol(*ops)
            if tok is None:
                return node
            right = self._binary(prec + 1)
            node = Binary(tok.text, node, right)

    def _unary(self) -> Node:
        tok = self._match_symbol("+", "-")
        if tok is not None:
            op = "UPLUS" if tok.text == "+" else "UMINUS"
            return Unary(op, self._unary())
        return self._primary()

    # -- atoms ---------------------------------------------------------------

    def _primary(self) -> Node:
        tok = self._peek()
        if tok.kind == _NUMBER:
            self._next()
            return NumberLit(tok.text)
        if tok.kind == _STRING:
            self._next()
            return StringLit(tok.text)
        if tok.kind == _SYMBOL and tok.text == "(":
            self._next()
            node = self.parse_expr()
            self._expect_symbol(")")
            return node
        if tok.kind == _QUOTED_NAME:
            self._next()
            self._expect_symbol("!")
            return SheetRef(tok.text, self._plain_ref())
        if tok.kind == _IDENT:
            self._next()
            if self._match_symbol("("):
                return self._call(tok)
            if self._match_symbol("!"):
                return SheetRef(tok.text, self._plain_ref())
            raise FormulaSyntaxError(f"unknown name {tok.text!r}", tok.pos)
        if tok.kind == _REF:
            self._next()
            # A short all-letters+digits name can lex as a reference yet be a
            # sheet qualifier ("AB1!C2").
            if self._match_symbol("!"):
                return SheetRef(tok.text, self._plain_ref())
            return self._ref_or_range(tok)
        raise FormulaSyntaxError(f"expected an expression, found {tok.text or 'end'!r}", tok.pos)

    def _call(self, name_tok: _Token) -> Node:
        name = name_tok.text.upper()
        args: list[Node] = []
        if not self._match_symbol(")"):
            args.append(self.parse_expr())
            while self._match_symbol(","):
                args.append(self.parse_expr())
            self._expect_symbol(")")
        return Call(name, tuple(args))

    def _plain_ref(self) -> CellRef | RangeRef:
        tok = self._peek()
        if tok.kind != _REF:
            raise FormulaSyntaxError("expected a cell reference after '!'", tok.pos)
        self._next()
        node = self._ref_or_range(tok)
        return node

    def _ref_or_range(self, first: _Token) -> CellRef | RangeRef:
        a, a_col, a_row = _parse_ref_component(first)
        if self._match_symbol(":"):
            second = self._peek()
            if second.kind != _REF:
                raise FormulaSyntaxError("expected a cell reference after ':'", second.pos)
            self._next()
            b, b_col, b_row = _parse_ref_component(second)
            # Normalize componentwise; absolute flags follow their coordinate.
            (r1, fr1), (r2, fr2) = sorted([(a.row, a_row), (b.row, b_row)])
            (c1, fc1), (c2, fc2) = sorted([(a.col, a_col), (b.col, b_col)])
            return RangeRef(CellAddr(r1, c1), CellAddr(r2, c2), (fc1, fr1, fc2, fr2))
        return CellRef(a, a_col, a_row)


def parse_formula(text: str) -> Node:
    """Parse formula source (must start with ``=``) into an AST."""
    if not isinstance(text, str):
        raise FormulaSyntaxError("formula must be a string", 0)
    stripped = text.lstrip()
    if not stripped.startswith("="):
        raise FormulaSyntaxError("formula must start with '='", 0)
    offset = len(text) - len(stripped) + 1
    parser = _Parser(_tokenize(text[offset:], base=offset))
    node = parser.parse_expr()
    trailing = parser._peek()
    if trailing.kind != _END:
        raise FormulaSyntaxError(f"unexpected trailing input {trailing.text!r}", trailing.pos)
    return node
