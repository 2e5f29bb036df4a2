"""Formula language: parsing, eligibility filtering, and the sketch/range IR."""

from .nodes import (
    BINARY_OPS,
    FUNCTIONS,
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
from .parser import FormulaSyntaxError, parse_formula
from .filters import FilterReason, classify_formula
from .sketch import (
    END_SKETCH,
    EOF,
    RANGE_TOK,
    FormulaIR,
    IneligibleFormulaError,
    RelRange,
    RenderError,
    StreamFormatError,
    format_stream,
    parse_stream,
    render_formula,
    sketch_length,
    stream_tokens,
    to_ir,
)

__all__ = [
    "BINARY_OPS",
    "FUNCTIONS",
    "Binary",
    "Call",
    "CellRef",
    "END_SKETCH",
    "EOF",
    "FilterReason",
    "FormulaError",
    "FormulaIR",
    "FormulaSyntaxError",
    "IneligibleFormulaError",
    "Node",
    "NumberLit",
    "RANGE_TOK",
    "RangeRef",
    "RelRange",
    "RenderError",
    "SheetRef",
    "StreamFormatError",
    "StringLit",
    "Unary",
    "classify_formula",
    "format_stream",
    "parse_formula",
    "parse_stream",
    "render_formula",
    "sketch_length",
    "stream_tokens",
    "to_ir",
]
