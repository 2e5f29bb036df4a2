"""Synthetic grids and formulas for demos, tests, and toy training runs.

Everything here is seeded and deterministic: the same generator arguments
and seed produce byte-identical corpora.
"""

from __future__ import annotations

import numpy as np

from .formula.nodes import (
    BINARY_OPS,
    FUNCTIONS,
    Binary,
    Call,
    CellRef,
    Node,
    NumberLit,
    RangeRef,
    StringLit,
    Unary,
)
from .grid import CellAddr, CellKind, CellValue, Sheet

_WORDS = (
    "total", "price", "score", "tax", "net", "qty", "rate", "name", "open",
    "due", "paid", "item", "max bid", 'say ""hi""'.replace('""', '"'),
)

_AGG_FUNCS = ("SUM", "AVERAGE", "MIN", "MAX", "COUNT", "MEDIAN", "STDEV")


def _rand_number(rng: np.random.Generator) -> NumberLit:
    if rng.random() < 0.3:
        return NumberLit(f"{int(rng.integers(0, 100))}.{int(rng.integers(0, 100)):02d}")
    return NumberLit(str(int(rng.integers(0, 1000))))


def _rand_string(rng: np.random.Generator) -> StringLit:
    return StringLit(str(rng.choice(_WORDS)))


def _rand_cell_ref(rng: np.random.Generator, target: CellAddr, radius: int) -> CellRef:
    dr = int(rng.integers(max(-radius, 1 - target.row), radius + 1))
    dc = int(rng.integers(max(-radius, 1 - target.col), radius + 1))
    return CellRef(CellAddr(target.row + dr, target.col + dc))


def _rand_range_ref(rng: np.random.Generator, target: CellAddr, radius: int) -> RangeRef:
    a = _rand_cell_ref(rng, target, radius).addr
    b = _rand_cell_ref(rng, target, radius).addr
    start = CellAddr(min(a.row, b.row), min(a.col, b.col))
    end = CellAddr(max(a.row, b.row), max(a.col, b.col))
    return RangeRef(start, end)


def random_eligible_ast(
    rng: np.random.Generator, target: CellAddr, radius: int = 10, depth: int = 5
) -> Node:
    """Random AST that is guaranteed to pass every eligibility filter.

    References stay within ``radius`` of the target and on-sheet, functions
    are called at their declared arity, and HYPERLINK never gets a literal
    first argument.
    """
    if depth <= 0:
        kind = rng.choice(["num", "str", "ref", "range"], p=[0.35, 0.15, 0.3, 0.2])
        if kind == "num":
            return _rand_number(rng)
        if kind == "str":
            return _rand_string(rng)
        if kind == "ref":
            return _rand_cell_ref(rng, target, radius)
        return _rand_range_ref(rng, target, radius)

    roll = rng.random()
    if roll < 0.35:
        return random_eligible_ast(rng, target, radius, 0)
    if roll < 0.65:
        name = str(rng.choice(sorted(FUNCTIONS)))
        arity = FUNCTIONS[name]
        args = []
        for i in range(arity):
            if name == "HYPERLINK" and i == 0:
                args.append(_rand_cell_ref(rng, target, radius))
            else:
                args.append(random_eligible_ast(rng, target, radius, depth - 1))
        return Call(name, tuple(args))
    if roll < 0.9:
        op = str(rng.choice(sorted(BINARY_OPS)))
        return Binary(
            op,
            random_eligible_ast(rng, target, radius, depth - 1),
            random_eligible_ast(rng, target, radius, depth - 1),
        )
    op = "UMINUS" if rng.random() < 0.5 else "UPLUS"
    return Unary(op, random_eligible_ast(rng, target, radius, depth - 1))


def scramble_formula_text(text: str, rng: np.random.Generator) -> str:
    """Inject cosmetic variation (case, whitespace) that parsing normalizes.

    Quoted regions are left untouched.
    """
    out = []
    in_string = False
    for ch in text:
        if ch == '"':
            in_string = not in_string
            out.append(ch)
            continue
        if in_string:
            out.append(ch)
            continue
        if ch.isalpha() and rng.random() < 0.3:
            ch = ch.lower()
        out.append(ch)
        if ch in "(,+*" and rng.random() < 0.2:
            out.append(" ")
    return "".join(out)


# ---------------------------------------------------------------------------
# Toy corpora for training/eval tests and demos
# ---------------------------------------------------------------------------

HEADER_TASK_FUNCTIONS = {
    "Total": "SUM",
    "Average": "AVERAGE",
    "Largest": "MAX",
    "Smallest": "MIN",
    "Tally": "COUNT",
}


def header_task_sheet(
    rng: np.random.Generator,
    *,
    header_word: str,
    extent: int,
    target_col: int = 2,
    n_noise_cols: int = 2,
    name: str = "S",
) -> Sheet:
    """One sheet whose single formula is determined by its header word.

    The target sits at the bottom of a numeric column under ``header_word``;
    the gold formula applies that header's function to the ``extent`` cells
    above.  Other columns carry look-alike numbers so the header is the only
    signal for *which* function to use.
    """
    func = HEADER_TASK_FUNCTIONS[header_word]
    cells: dict[tuple[int, int], CellValue] = {}
    cells[(1, 1)] = CellValue(CellKind.STR, "item")
    cells[(1, target_col)] = CellValue(CellKind.STR, header_word)
    for j in range(n_noise_cols):
        col = target_col + 1 + j
        cells[(1, col)] = CellValue(CellKind.STR, str(rng.choice(["note", "flag", "misc"])))
    target_row = 2 + extent
    for i in range(extent):
        row = 2 + i
        cells[(row, 1)] = CellValue(CellKind.STR, str(rng.choice(["pen", "ink", "pad", "tape"])))
        cells[(row, target_col)] = CellValue(CellKind.NUM, str(int(rng.integers(1, 99))))
        for j in range(n_noise_cols):
            cells[(row, target_col + 1 + j)] = CellValue(
                CellKind.NUM, str(int(rng.integers(1, 99)))
            )
    col_a1 = f"{chr(ord('A') + target_col - 1)}"
    src = f"={func}({col_a1}2:{col_a1}{target_row - 1})"
    cells[(target_row, target_col)] = CellValue(CellKind.FORMULA, "0", src)
    return Sheet(name=name, frozen_rows=1, cells=cells)


def memorization_sheet(rng: np.random.Generator, pattern_id: int, *, name: str = "S") -> Sheet:
    """A sheet with a distinctive marker context and one of 50 formula shapes.

    Pattern identity is carried by a marker word in the cell left of the
    target plus the column header, so a model can key each formula to its
    context.
    """
    markers = [f"mk{pattern_id:02d}"]
    funcs = ("SUM", "AVERAGE", "MIN", "MAX", "COUNT")
    extent = 2 + pattern_id % 4  # 2..5
    func = funcs[pattern_id % len(funcs)]
    variant = pattern_id % 3
    cells: dict[tuple[int, int], CellValue] = {
        (1, 1): CellValue(CellKind.STR, "tag"),
        (1, 2): CellValue(CellKind.STR, f"col{pattern_id:02d}"),
    }
    target_row = 2 + extent
    for i in range(extent):
        cells[(2 + i, 2)] = CellValue(CellKind.NUM, str(int(rng.integers(1, 9))))
    cells[(target_row, 1)] = CellValue(CellKind.STR, markers[0])
    if variant == 0:
        src = f"={func}(B2:B{target_row - 1})"
    elif variant == 1:
        src = f"={func}(B2:B{target_row - 1})*{1 + pattern_id % 7}"
    else:
        # Compare against the top of the column so the extent shows up in the
        # relative reference; 11 is coprime with the variant cycle, so the
        # constant varies across every pattern id that lands here.
        src = f'=IF(B2<={pattern_id % 11},"lo","hi")'
    cells[(target_row, 2)] = CellValue(CellKind.FORMULA, "0", src)
    return Sheet(name=name, frozen_rows=1, cells=cells)
