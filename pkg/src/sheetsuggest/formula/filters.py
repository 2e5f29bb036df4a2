"""Eligibility filters applied to parsed formulas before IR lowering.

Filters run in a fixed order and the first hit wins, so counts in the
preprocessing report are stable: hyperlink-with-literal-URL, cross-sheet
reference, out-of-window reference, absolute reference, unsupported token.
"""

from __future__ import annotations

from enum import Enum

from ..grid import CellAddr
from .nodes import (
    FUNCTIONS,
    Call,
    CellRef,
    Node,
    RangeRef,
    SheetRef,
    StringLit,
    walk,
)


class FilterReason(str, Enum):
    HYPERLINK_LITERAL_URL = "hyperlink_literal_url"
    CROSS_SHEET_REF = "cross_sheet_ref"
    OUT_OF_WINDOW = "out_of_window"
    ABSOLUTE_REF = "absolute_ref"
    UNSUPPORTED_TOKEN = "unsupported_token"


def _offset_in_window(addr: CellAddr, target: CellAddr, radius: int) -> bool:
    return abs(addr.row - target.row) <= radius and abs(addr.col - target.col) <= radius


def classify_formula(ast: Node, target: CellAddr, radius: int = 10) -> FilterReason | None:
    """Return the first matching filter reason, or None when eligible."""
    nodes = list(walk(ast))

    for node in nodes:
        if isinstance(node, Call) and node.name == "HYPERLINK" and node.args:
            if isinstance(node.args[0], StringLit):
                return FilterReason.HYPERLINK_LITERAL_URL

    for node in nodes:
        if isinstance(node, SheetRef):
            return FilterReason.CROSS_SHEET_REF

    for node in nodes:
        if isinstance(node, CellRef):
            if not _offset_in_window(node.addr, target, radius):
                return FilterReason.OUT_OF_WINDOW
        elif isinstance(node, RangeRef):
            if not (
                _offset_in_window(node.start, target, radius)
                and _offset_in_window(node.end, target, radius)
            ):
                return FilterReason.OUT_OF_WINDOW

    for node in nodes:
        if isinstance(node, (CellRef, RangeRef)) and node.absolute:
            return FilterReason.ABSOLUTE_REF

    for node in nodes:
        if isinstance(node, Call):
            arity = FUNCTIONS.get(node.name)
            if arity is None or arity != len(node.args):
                return FilterReason.UNSUPPORTED_TOKEN

    return None
