"""Sparse sheet model, A1 addressing, and the canonical ``.grid.json`` format.

Coordinates are 1-based everywhere: row 1 is the top row, column 1 is "A".
Merged cells do not exist in this model; a merged region in a source document
must be materialized as its anchor cell before import.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path


class GridError(Exception):
    """Base error for grid loading/validation problems."""


class GridFormatError(GridError):
    """A ``.grid.json`` document that cannot be decoded or validated."""


class A1ParseError(GridError):
    """An A1-style reference that does not parse."""


class CellKind(str, Enum):
    NUM = "num"
    STR = "str"
    FORMULA = "formula"
    EMPTY = "empty"


EMPTY_LITERAL = ""

# ---------------------------------------------------------------------------
# Core value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellValue:
    """One cell: its kind, display literal, and (for formula cells) source.

    ``literal`` is the display text (what a user sees in the cell).  Formula
    cells carry their source text in ``formula``; every other kind has
    ``formula is None``.
    """

    kind: CellKind
    literal: str = EMPTY_LITERAL
    formula: str | None = None

    def __post_init__(self) -> None:
        if self.kind is CellKind.FORMULA:
            if not self.formula:
                raise GridError("formula cell requires formula source text")
        elif self.formula is not None:
            raise GridError(f"{self.kind.value} cell must not carry formula text")
        if self.kind is CellKind.EMPTY and self.literal != EMPTY_LITERAL:
            raise GridError("empty cell must have empty literal")


EMPTY_CELL = CellValue(CellKind.EMPTY)


@dataclass(frozen=True, order=True)
class CellAddr:
    """1-based (row, column) position."""

    row: int
    col: int

    def __post_init__(self) -> None:
        if self.row < 1 or self.col < 1:
            raise GridError(f"cell address out of range: ({self.row}, {self.col})")


@dataclass
class Sheet:
    """A named sparse grid with ``frozen_rows`` leading header rows."""

    name: str
    frozen_rows: int = 0
    cells: dict[tuple[int, int], CellValue] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.frozen_rows < 0:
            raise GridError(f"sheet {self.name!r}: frozen_rows must be >= 0")
        for row, col in self.cells:
            if row < 1 or col < 1:
                raise GridError(
                    f"sheet {self.name!r}: cell coordinate ({row}, {col}) out of range"
                )
        max_row, _ = self.bounds
        if self.frozen_rows > max_row:
            raise GridError(
                f"sheet {self.name!r}: frozen_rows={self.frozen_rows} exceeds "
                f"last occupied row {max_row}"
            )

    @property
    def bounds(self) -> tuple[int, int]:
        """(max occupied row, max occupied column); (0, 0) when empty."""
        if not self.cells:
            return (0, 0)
        return (max(r for r, _ in self.cells), max(c for _, c in self.cells))

    def cell_at(self, row: int, col: int) -> CellValue:
        """Total lookup: any in-range address answers, absent cells are Empty."""
        if row < 1 or col < 1:
            raise GridError(f"cell address out of range: ({row}, {col})")
        return self.cells.get((row, col), EMPTY_CELL)

    def formula_cells(self) -> list[tuple[CellAddr, CellValue]]:
        """Formula cells in (row, col) order."""
        out = []
        for (row, col), value in sorted(self.cells.items()):
            if value.kind is CellKind.FORMULA:
                out.append((CellAddr(row, col), value))
        return out


def cell_at(sheet: Sheet, addr: CellAddr) -> CellValue:
    return sheet.cell_at(addr.row, addr.col)


# ---------------------------------------------------------------------------
# A1 addressing
# ---------------------------------------------------------------------------

_A1_PART = re.compile(r"^(\$?)([A-Za-z]+)(\$?)([0-9]+)$")


def col_number(letters: str) -> int:
    """Base-26 column letters to number: A=1, Z=26, AA=27."""
    n = 0
    for ch in letters.upper():
        if not "A" <= ch <= "Z":
            raise A1ParseError(f"bad column letters: {letters!r}")
        n = n * 26 + (ord(ch) - ord("A") + 1)
    return n


def col_letters(number: int) -> str:
    """Column number to letters (inverse of :func:`col_number`)."""
    if number < 1:
        raise A1ParseError(f"column number must be >= 1, got {number}")
    out = []
    n = number
    while n > 0:
        n, rem = divmod(n - 1, 26)
        out.append(chr(ord("A") + rem))
    return "".join(reversed(out))


@dataclass(frozen=True)
class A1Ref:
    """Parsed A1 reference: a single cell or a normalized rectangle.

    ``absolute`` is set when any ``$`` appeared anywhere in the source text.
    """

    start: CellAddr
    end: CellAddr | None = None
    absolute: bool = False

    @property
    def is_range(self) -> bool:
        return self.end is not None


def parse_a1_component(part: str) -> tuple[CellAddr, bool, bool]:
    """Parse one endpoint like ``$B$5`` -> (addr, abs_col, abs_row)."""
    m = _A1_PART.match(part)
    if m is None:
        raise A1ParseError(f"malformed A1 reference: {part!r}")
    dollar_col, letters, dollar_row, digits = m.groups()
    row = int(digits)
    if row < 1:
        raise A1ParseError(f"row must be >= 1 in A1 reference: {part!r}")
    return CellAddr(row, col_number(letters)), bool(dollar_col), bool(dollar_row)


def parse_a1(text: str) -> A1Ref:
    """Parse ``"D4"``, ``"$A$1"``, or ``"C6:C2"`` (endpoints normalized).

    Column letters are case-insensitive.  Any ``$`` sets ``absolute``.
    Malformed text (digits first, empty parts, stray characters) raises
    :class:`A1ParseError` naming the input.
    """
    if not isinstance(text, str) or not text:
        raise A1ParseError(f"malformed A1 reference: {text!r}")
    parts = text.split(":")
    try:
        if len(parts) == 1:
            addr, abs_col, abs_row = parse_a1_component(parts[0])
            return A1Ref(addr, None, abs_col or abs_row)
        if len(parts) == 2:
            a, ac1, ar1 = parse_a1_component(parts[0])
            b, ac2, ar2 = parse_a1_component(parts[1])
            start = CellAddr(min(a.row, b.row), min(a.col, b.col))
            end = CellAddr(max(a.row, b.row), max(a.col, b.col))
            return A1Ref(start, end, ac1 or ar1 or ac2 or ar2)
    except A1ParseError:
        raise A1ParseError(f"malformed A1 reference: {text!r}") from None
    raise A1ParseError(f"malformed A1 reference: {text!r}")


def render_a1(addr: CellAddr) -> str:
    return f"{col_letters(addr.col)}{addr.row}"


def render_a1_range(start: CellAddr, end: CellAddr | None = None) -> str:
    if end is None or end == start:
        return render_a1(start)
    return f"{render_a1(start)}:{render_a1(end)}"


# ---------------------------------------------------------------------------
# Canonical .grid.json serialization
# ---------------------------------------------------------------------------

GRID_SUFFIX = ".grid.json"
_KIND_VALUES = {k.value for k in CellKind}


def _sheet_to_doc(sheet: Sheet) -> dict:
    cells = []
    for (row, col), value in sorted(sheet.cells.items()):
        entry: dict = {"row": row, "col": col, "kind": value.kind.value, "value": value.literal}
        if value.formula is not None:
            entry["formula"] = value.formula
        cells.append(entry)
    return {"name": sheet.name, "frozen_rows": sheet.frozen_rows, "cells": cells}


def _cell_from_doc(entry: dict, sheet_name: str, index: int) -> tuple[tuple[int, int], CellValue]:
    where = f"sheet {sheet_name!r} cells[{index}]"
    if not isinstance(entry, dict):
        raise GridFormatError(f"{where}: cell must be an object")
    try:
        row, col = entry["row"], entry["col"]
        kind_name = entry["kind"]
        literal = entry.get("value", EMPTY_LITERAL)
    except KeyError as exc:
        raise GridFormatError(f"{where}: missing key {exc.args[0]!r}") from None
    if kind_name not in _KIND_VALUES:
        raise GridFormatError(f"{where}: unknown cell kind {kind_name!r}")
    if not isinstance(row, int) or not isinstance(col, int):
        raise GridFormatError(f"{where}: row/col must be integers")
    if not isinstance(literal, str):
        raise GridFormatError(f"{where}: value must be a string")
    kind = CellKind(kind_name)
    formula = entry.get("formula")
    if kind is CellKind.FORMULA and formula is None:
        raise GridFormatError(f"{where}: formula cell is missing formula text")
    try:
        cell = CellValue(kind, literal, formula if kind is CellKind.FORMULA else None)
    except GridError as exc:
        raise GridFormatError(f"{where}: {exc}") from None
    return (row, col), cell


def sheets_from_doc(doc: object) -> list[Sheet]:
    """Validate a decoded grid document and build sheets."""
    if not isinstance(doc, dict) or "sheets" not in doc:
        raise GridFormatError("grid document must be an object with a 'sheets' array")
    raw_sheets = doc["sheets"]
    if not isinstance(raw_sheets, list):
        raise GridFormatError("'sheets' must be an array")
    sheets = []
    for i, raw in enumerate(raw_sheets):
        if not isinstance(raw, dict):
            raise GridFormatError(f"sheets[{i}] must be an object")
        name = raw.get("name")
        if not isinstance(name, str) or not name:
            raise GridFormatError(f"sheets[{i}]: missing or empty sheet name")
        frozen = raw.get("frozen_rows", 0)
        if not isinstance(frozen, int):
            raise GridFormatError(f"sheet {name!r}: frozen_rows must be an integer")
        raw_cells = raw.get("cells", [])
        if not isinstance(raw_cells, list):
            raise GridFormatError(f"sheet {name!r}: cells must be an array")
        cells: dict[tuple[int, int], CellValue] = {}
        for j, entry in enumerate(raw_cells):
            key, cell = _cell_from_doc(entry, name, j)
            if key in cells:
                raise GridFormatError(f"sheet {name!r}: duplicate cell at {key}")
            cells[key] = cell
        try:
            sheets.append(Sheet(name=name, frozen_rows=frozen, cells=cells))
        except GridError as exc:
            raise GridFormatError(str(exc)) from None
    return sheets


def sheets_to_doc(sheets: list[Sheet]) -> dict:
    return {"sheets": [_sheet_to_doc(s) for s in sheets]}


def dumps_grid(sheets: list[Sheet]) -> str:
    """Canonical text: alphabetical keys, cells in (row, col) order."""
    return json.dumps(sheets_to_doc(sheets), sort_keys=True, indent=1) + "\n"


def loads_grid(text: str) -> list[Sheet]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GridFormatError(
            f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None
    return sheets_from_doc(doc)


def load_grid_file(path: str | Path) -> list[Sheet]:
    return loads_grid(Path(path).read_text(encoding="utf-8"))


def save_grid_file(path: str | Path, sheets: list[Sheet]) -> None:
    Path(path).write_text(dumps_grid(sheets), encoding="utf-8")
