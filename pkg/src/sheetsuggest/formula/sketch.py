"""Sketch/range IR: prefix-order sketch tokens plus relative range groups.

A formula is represented as a flat token stream

    <sketch tokens> $ENDSKETCH$ <one group per RANGE token> EOF

where each group is ``$R$ R[dr] C[dc] $ENDR$`` for a single cell or
``$R$ R[dr1] C[dc1] $SEP$ R[dr2] C[dc2] $ENDR$`` for a rectangle, offsets
relative to the target cell.  Sketch tokens are plain strings: function
names, operator symbols, ``UPLUS``/``UMINUS``, numeric literal text, string
literals in double quotes (with ``""`` escapes), and the ``RANGE``
placeholder.  String literals are atomic, so the text form of a stream is
*not* plain space-separated: use :func:`parse_stream` to read it back.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator

from ..grid import CellAddr, render_a1
from .filters import classify_formula
from .nodes import (
    BINARY_OPS,
    FUNCTIONS,
    UNARY_OPS,
    UNARY_PREC,
    Binary,
    Call,
    CellRef,
    FormulaError,
    Node,
    NumberLit,
    RangeRef,
    SheetRef,
    StringLit,
    Unary,
)

RANGE_TOK = "RANGE"
END_SKETCH = "$ENDSKETCH$"
EOF = "EOF"
GROUP_OPEN = "$R$"
GROUP_SEP = "$SEP$"
GROUP_CLOSE = "$ENDR$"

_NUMBER_TOKEN_RE = re.compile(r"^(?:\d+(?:\.\d+)?|\.\d+)$")
_OFFSET_TOKEN_RE = re.compile(r"^([RC])\[(-?\d+)\]$")


class IneligibleFormulaError(FormulaError):
    """``to_ir`` was handed a formula the filters reject."""


class RenderError(FormulaError):
    """An IR that cannot be turned back into formula text at this target."""


class StreamFormatError(FormulaError):
    """Token-stream text that does not follow the stream grammar."""


def row_offset_token(k: int) -> str:
    return f"R[{k}]"


def col_offset_token(k: int) -> str:
    return f"C[{k}]"


def parse_offset_token(tok: str) -> tuple[str, int]:
    """``"R[-5]"`` -> ("R", -5); raises StreamFormatError otherwise."""
    m = _OFFSET_TOKEN_RE.match(tok)
    if m is None:
        raise StreamFormatError(f"not an offset token: {tok!r}")
    return m.group(1), int(m.group(2))


def range_grammar_tokens(radius: int) -> list[str]:
    """The closed range-stage vocabulary: 2*(2*radius+1) + 4 tokens."""
    toks = [GROUP_OPEN, GROUP_SEP, GROUP_CLOSE, EOF]
    toks += [row_offset_token(k) for k in range(-radius, radius + 1)]
    toks += [col_offset_token(k) for k in range(-radius, radius + 1)]
    return toks


@dataclass(frozen=True)
class RelRange:
    """Offsets from the target: a single cell or a normalized rectangle."""

    start: tuple[int, int]  # (d_row, d_col)
    end: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.end is not None and (
            self.end[0] < self.start[0] or self.end[1] < self.start[1]
        ):
            raise FormulaError(f"range offsets not normalized: {self.start}..{self.end}")

    def group_tokens(self) -> list[str]:
        toks = [GROUP_OPEN, row_offset_token(self.start[0]), col_offset_token(self.start[1])]
        if self.end is not None:
            toks += [GROUP_SEP, row_offset_token(self.end[0]), col_offset_token(self.end[1])]
        toks.append(GROUP_CLOSE)
        return toks


@dataclass(frozen=True)
class FormulaIR:
    """A sketch (terminated by ``$ENDSKETCH$``) plus one RelRange per RANGE."""

    sketch: tuple[str, ...]
    ranges: tuple[RelRange, ...]

    def __post_init__(self) -> None:
        if not self.sketch or self.sketch[-1] != END_SKETCH:
            raise FormulaError("sketch must end with $ENDSKETCH$")
        if self.sketch.count(END_SKETCH) != 1:
            raise FormulaError("sketch must contain exactly one $ENDSKETCH$")
        n_range = self.sketch.count(RANGE_TOK)
        if n_range != len(self.ranges):
            raise FormulaError(
                f"sketch has {n_range} RANGE tokens but {len(self.ranges)} range groups"
            )


def sketch_length(ir: FormulaIR) -> int:
    """Number of sketch tokens excluding the ``$ENDSKETCH$`` terminator."""
    return len(ir.sketch) - 1


def stream_tokens(ir: FormulaIR) -> list[str]:
    toks = list(ir.sketch)
    for rel in ir.ranges:
        toks += rel.group_tokens()
    toks.append(EOF)
    return toks


def format_stream(ir: FormulaIR) -> str:
    return " ".join(stream_tokens(ir))


# ---------------------------------------------------------------------------
# AST -> IR
# ---------------------------------------------------------------------------


def escape_string_literal(value: str) -> str:
    return '"' + value.replace('"', '""') + '"'


def _offsets(addr: CellAddr, target: CellAddr) -> tuple[int, int]:
    return (addr.row - target.row, addr.col - target.col)


def _emit(node: Node, target: CellAddr, sketch: list[str], ranges: list[RelRange]) -> None:
    if isinstance(node, NumberLit):
        sketch.append(node.text)
    elif isinstance(node, StringLit):
        sketch.append(escape_string_literal(node.value))
    elif isinstance(node, CellRef):
        sketch.append(RANGE_TOK)
        ranges.append(RelRange(_offsets(node.addr, target)))
    elif isinstance(node, RangeRef):
        sketch.append(RANGE_TOK)
        ranges.append(RelRange(_offsets(node.start, target), _offsets(node.end, target)))
    elif isinstance(node, Call):
        sketch.append(node.name)
        for arg in node.args:
            _emit(arg, target, sketch, ranges)
    elif isinstance(node, Binary):
        sketch.append(node.op)
        _emit(node.left, target, sketch, ranges)
        _emit(node.right, target, sketch, ranges)
    elif isinstance(node, Unary):
        sketch.append(node.op)
        _emit(node.operand, target, sketch, ranges)
    elif isinstance(node, SheetRef):  # pragma: no cover - filtered upstream
        raise IneligibleFormulaError("cross-sheet reference reached to_ir")
    else:  # pragma: no cover
        raise FormulaError(f"unknown AST node: {node!r}")


def to_ir(ast: Node, target: CellAddr, radius: int = 10) -> FormulaIR:
    """Lower an eligible AST to IR; raises on anything the filters reject."""
    reason = classify_formula(ast, target, radius)
    if reason is not None:
        raise IneligibleFormulaError(f"formula is filtered ({reason.value})")
    sketch: list[str] = []
    ranges: list[RelRange] = []
    _emit(ast, target, sketch, ranges)
    sketch.append(END_SKETCH)
    return FormulaIR(tuple(sketch), tuple(ranges))


# ---------------------------------------------------------------------------
# IR -> formula text
# ---------------------------------------------------------------------------


def _rel_to_node(rel: RelRange, target: CellAddr) -> CellRef | RangeRef:
    def addr(off: tuple[int, int]) -> CellAddr:
        row, col = target.row + off[0], target.col + off[1]
        if row < 1 or col < 1:
            raise RenderError(
                f"range offset ({off[0]}, {off[1]}) resolves off-sheet from {render_a1(target)}"
            )
        return CellAddr(row, col)

    if rel.end is None:
        return CellRef(addr(rel.start))
    return RangeRef(addr(rel.start), addr(rel.end))


def _rebuild(tokens: Iterator[str], ranges: Iterator[RelRange], target: CellAddr) -> Node:
    tok = next(tokens, None)
    if tok is None:
        raise RenderError("sketch ends mid-expression")
    if tok == RANGE_TOK:
        return _rel_to_node(next(ranges), target)
    if tok.startswith('"'):
        if len(tok) < 2 or not tok.endswith('"'):
            raise RenderError(f"malformed string token {tok!r}")
        return StringLit(tok[1:-1].replace('""', '"'))
    if _NUMBER_TOKEN_RE.match(tok):
        return NumberLit(tok)
    if tok in BINARY_OPS:
        left = _rebuild(tokens, ranges, target)
        right = _rebuild(tokens, ranges, target)
        return Binary(tok, left, right)
    if tok in UNARY_OPS:
        return Unary(tok, _rebuild(tokens, ranges, target))
    if tok in FUNCTIONS:
        args = tuple(_rebuild(tokens, ranges, target) for _ in range(FUNCTIONS[tok]))
        return Call(tok, args)
    raise RenderError(f"cannot interpret sketch token {tok!r}")


def ir_to_ast(ir: FormulaIR, target: CellAddr) -> Node:
    """Rebuild the AST; fails when the sketch is not a complete expression."""
    tokens = iter(ir.sketch[:-1])
    ranges = iter(ir.ranges)
    node = _rebuild(tokens, ranges, target)
    extra = next(tokens, None)
    if extra is not None:
        raise RenderError(f"sketch has trailing tokens starting at {extra!r}")
    return node


def _render_node(node: Node, parent_prec: int, right_side: bool) -> str:
    if isinstance(node, NumberLit):
        return node.text
    if isinstance(node, StringLit):
        return escape_string_literal(node.value)
    if isinstance(node, CellRef):
        return render_a1(node.addr)
    if isinstance(node, RangeRef):
        # Always keep the colon so a degenerate one-cell rectangle survives
        # a round trip.
        return f"{render_a1(node.start)}:{render_a1(node.end)}"
    if isinstance(node, Call):
        args = ",".join(_render_node(a, 0, False) for a in node.args)
        return f"{node.name}({args})"
    if isinstance(node, Binary):
        prec = BINARY_OPS[node.op]
        text = (
            _render_node(node.left, prec, False)
            + node.op
            + _render_node(node.right, prec, True)
        )
        if prec < parent_prec or (prec == parent_prec and right_side):
            return f"({text})"
        return text
    if isinstance(node, Unary):
        sign = "+" if node.op == "UPLUS" else "-"
        return sign + _render_node(node.operand, UNARY_PREC, False)
    raise RenderError(f"cannot render node {node!r}")


def render_ast(node: Node) -> str:
    return "=" + _render_node(node, 0, False)


def render_formula(ir: FormulaIR, target: CellAddr) -> str:
    """IR back to formula text at ``target``; exact inverse of ``to_ir``."""
    return render_ast(ir_to_ast(ir, target))


# ---------------------------------------------------------------------------
# Token-stream text form
# ---------------------------------------------------------------------------


def tokenize_stream(text: str) -> list[str]:
    """Split stream text into tokens; string tokens may contain spaces."""
    toks: list[str] = []
    i, n = 0, len(text)
    while i < n:
        if text[i] == " ":
            i += 1
            continue
        if text[i] == '"':
            j = i + 1
            while True:
                if j >= n:
                    raise StreamFormatError(f"unterminated string token in stream: {text!r}")
                if text[j] == '"':
                    if j + 1 < n and text[j + 1] == '"':
                        j += 2
                        continue
                    break
                j += 1
            toks.append(text[i : j + 1])
            i = j + 1
        else:
            j = text.find(" ", i)
            if j < 0:
                j = n
            toks.append(text[i:j])
            i = j
    return toks


def parse_stream_tokens(tokens: list[str]) -> FormulaIR:
    if END_SKETCH not in tokens:
        raise StreamFormatError("stream has no $ENDSKETCH$")
    cut = tokens.index(END_SKETCH)
    sketch = tuple(tokens[: cut + 1])
    rest = tokens[cut + 1 :]
    if not rest or rest[-1] != EOF:
        raise StreamFormatError("stream must end with EOF")
    body = rest[:-1]
    if EOF in body or END_SKETCH in body:
        raise StreamFormatError("stray terminator inside range groups")

    ranges: list[RelRange] = []
    i = 0
    while i < len(body):
        if body[i] != GROUP_OPEN:
            raise StreamFormatError(f"expected {GROUP_OPEN}, found {body[i]!r}")

        def offset(j: int, axis: str) -> int:
            if j >= len(body):
                raise StreamFormatError("range group ends mid-offset")
            kind, k = parse_offset_token(body[j])
            if kind != axis:
                raise StreamFormatError(f"expected {axis} offset, found {body[j]!r}")
            return k

        dr, dc = offset(i + 1, "R"), offset(i + 2, "C")
        i += 3
        end: tuple[int, int] | None = None
        if i < len(body) and body[i] == GROUP_SEP:
            end = (offset(i + 1, "R"), offset(i + 2, "C"))
            i += 3
        if i >= len(body) or body[i] != GROUP_CLOSE:
            raise StreamFormatError("range group not closed with $ENDR$")
        i += 1
        ranges.append(RelRange((dr, dc), end))

    try:
        return FormulaIR(sketch, tuple(ranges))
    except FormulaError as exc:
        raise StreamFormatError(str(exc)) from None


def parse_stream(text: str) -> FormulaIR:
    """Inverse of :func:`format_stream`."""
    return parse_stream_tokens(tokenize_stream(text))
