"""Formula AST nodes and the closed function/operator vocabulary.

Every supported function has exactly one arity.  That makes the prefix-order
sketch uniquely decodable (classic Polish-notation property), which is what
lets ``render_formula`` invert ``to_ir`` exactly.  Calls with any other
argument count are treated as vocabulary-external and filtered upstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from ..grid import CellAddr


class FormulaError(Exception):
    """Base error for formula handling."""


# name -> arity.  Aggregations take a single argument (one cell or rectangle),
# which is by far their dominant spreadsheet usage.
FUNCTIONS: dict[str, int] = {
    "TODAY": 0,
    # one argument
    "SUM": 1,
    "AVERAGE": 1,
    "AVERAGEA": 1,
    "MEDIAN": 1,
    "STDEV": 1,
    "COUNT": 1,
    "COUNTA": 1,
    "MIN": 1,
    "MAX": 1,
    "ABS": 1,
    "SQRT": 1,
    "LEN": 1,
    "TRIM": 1,
    "UPPER": 1,
    "LOWER": 1,
    "COS": 1,
    "SIN": 1,
    "SINH": 1,
    "YEAR": 1,
    "MONTH": 1,
    "DAY": 1,
    "WEEKNUM": 1,
    # two arguments
    "ROUND": 2,
    "MOD": 2,
    "LEFT": 2,
    "RIGHT": 2,
    "CONCATENATE": 2,
    "IFERROR": 2,
    "HYPERLINK": 2,
    # three arguments
    "IF": 3,
}

# symbol -> precedence; all binary operators are left-associative.
# comparison < concatenation < additive < multiplicative.
BINARY_OPS: dict[str, int] = {
    "=": 1,
    "<>": 1,
    "<": 1,
    "<=": 1,
    ">": 1,
    ">=": 1,
    "&": 2,
    "+": 3,
    "-": 3,
    "*": 4,
    "/": 4,
}

UNARY_PREC = 5
UNARY_OPS = ("UPLUS", "UMINUS")  # sketch spellings of unary + and -


@dataclass(frozen=True)
class NumberLit:
    """Numeric literal; the source text is preserved verbatim."""

    text: str


@dataclass(frozen=True)
class StringLit:
    """String literal; ``value`` is the unescaped content."""

    value: str


@dataclass(frozen=True)
class CellRef:
    addr: CellAddr
    abs_col: bool = False
    abs_row: bool = False

    @property
    def absolute(self) -> bool:
        return self.abs_col or self.abs_row


@dataclass(frozen=True)
class RangeRef:
    """Rectangle with normalized endpoints (start <= end componentwise).

    ``abs_flags`` is (start_col, start_row, end_col, end_row); flags travel
    with their coordinate if normalization swapped endpoints.
    """

    start: CellAddr
    end: CellAddr
    abs_flags: tuple[bool, bool, bool, bool] = (False, False, False, False)

    def __post_init__(self) -> None:
        if self.start.row > self.end.row or self.start.col > self.end.col:
            raise FormulaError(f"range endpoints not normalized: {self.start}..{self.end}")

    @property
    def absolute(self) -> bool:
        return any(self.abs_flags)


@dataclass(frozen=True)
class SheetRef:
    """A reference qualified with another sheet's name."""

    sheet: str
    inner: Union[CellRef, RangeRef]


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Node", ...]


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Unary:
    op: str  # "UPLUS" | "UMINUS"
    operand: "Node"


Node = Union[NumberLit, StringLit, CellRef, RangeRef, SheetRef, Call, Binary, Unary]


def walk(node: Node):
    """Yield every node in pre-order."""
    yield node
    if isinstance(node, Call):
        for arg in node.args:
            yield from walk(arg)
    elif isinstance(node, Binary):
        yield from walk(node.left)
        yield from walk(node.right)
    elif isinstance(node, Unary):
        yield from walk(node.operand)
    elif isinstance(node, SheetRef):
        yield from walk(node.inner)
