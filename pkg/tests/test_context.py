"""Context window extraction, cell tokenization, trimming, and bundles."""

import pytest

from sheetsuggest.context import (
    PAD,
    SEP,
    Bundle,
    TokenSeq,
    apply_row_mask,
    assemble_col_seq,
    assemble_header_seq,
    assemble_row_seq,
    build_bundles,
    bundle_members,
    extract_window,
    tokenize_cell,
    tokenize_text,
)
from sheetsuggest.grid import CellAddr, CellKind, CellValue, Sheet


class TestTokenize:
    def test_numeric_cell(self):
        assert tokenize_cell(CellValue(CellKind.NUM, "0")) == ["num", "0"]

    def test_string_cell_lowercased_and_split(self):
        assert tokenize_cell(CellValue(CellKind.STR, "Total Price")) == ["str", "total", "price"]

    def test_empty_emits_nothing(self):
        assert tokenize_cell(CellValue(CellKind.EMPTY)) == []

    def test_formula_cell_uses_display_value(self):
        cell = CellValue(CellKind.FORMULA, "12.5", "=SUM(A1:A3)")
        assert tokenize_cell(cell) == ["formula", "12.5"]

    def test_decimals_stay_whole(self):
        assert tokenize_text("3.5 units") == ["3.5", "units"]

    def test_punctuation_separates(self):
        assert tokenize_text("n/a; $1,000") == ["n", "a", "1", "000"]


def _small_sheet():
    return Sheet(
        "S",
        frozen_rows=1,
        cells={
            (1, 1): CellValue(CellKind.STR, "Item"),
            (1, 2): CellValue(CellKind.STR, "Score"),
            (2, 1): CellValue(CellKind.STR, "pen"),
            (2, 2): CellValue(CellKind.NUM, "4"),
            (3, 1): CellValue(CellKind.STR, "ink"),
            (3, 2): CellValue(CellKind.NUM, "6"),
            (4, 2): CellValue(CellKind.FORMULA, "10", "=SUM(B2:B3)"),
        },
    )


class TestWindow:
    def test_dimensions(self):
        w = extract_window(_small_sheet(), CellAddr(4, 2), radius=2)
        assert len(w.header) == 5
        assert len(w.cells) == 5 and all(len(r) == 5 for r in w.cells)

    def test_header_from_frozen_row(self):
        w = extract_window(_small_sheet(), CellAddr(4, 2), radius=2)
        assert w.header_tokens(0) == ("str", "score")
        assert w.header_tokens(-1) == ("str", "item")

    def test_no_header_when_not_frozen(self):
        sheet = _small_sheet()
        sheet = Sheet(sheet.name, frozen_rows=0, cells=sheet.cells)
        w = extract_window(sheet, CellAddr(4, 2), radius=2)
        assert all(h == () for h in w.header)
        assert not any(w.header_valid)

    def test_target_cell_blanked_but_valid(self):
        w = extract_window(_small_sheet(), CellAddr(4, 2), radius=2)
        assert w.cell_tokens(0, 0) == ()
        assert w.cell_valid(0, 0)

    def test_neighbor_formula_cell_shows_display_only(self):
        sheet = _small_sheet()
        w = extract_window(sheet, CellAddr(4, 3), radius=2)
        assert w.cell_tokens(0, -1) == ("formula", "10")

    def test_off_sheet_positions_invalid(self):
        w = extract_window(_small_sheet(), CellAddr(1, 1), radius=2)
        assert not w.cell_valid(-1, 0)  # row 0 does not exist
        assert not w.cell_valid(0, -1)  # column 0 does not exist
        assert w.cell_valid(1, 1)

    def test_row_mask_clears_hidden_rows(self):
        w = extract_window(_small_sheet(), CellAddr(4, 2), radius=2)
        masked = apply_row_mask(w, {-1, 0})
        assert masked.cell_tokens(-1, 0) == w.cell_tokens(-1, 0)
        assert masked.cell_tokens(-2, 0) == ()
        assert not masked.cell_valid(-2, 0)
        assert masked.header == w.header  # header untouched

    def test_row_mask_validates_offsets(self):
        w = extract_window(_small_sheet(), CellAddr(4, 2), radius=2)
        with pytest.raises(ValueError):
            apply_row_mask(w, {5})


def _window_with_row(cells_by_dc, radius=3):
    """Build a single-row window directly for trim tests."""
    width = 2 * radius + 1
    header = tuple(() for _ in range(width))
    rows = []
    for dr in range(-radius, radius + 1):
        row = []
        for dc in range(-radius, radius + 1):
            row.append(tuple(cells_by_dc.get(dc, ())) if dr == 0 else ())
        rows.append(tuple(row))
    from sheetsuggest.context import ContextWindow

    return ContextWindow(
        radius=radius,
        header=header,
        header_valid=tuple(False for _ in range(width)),
        cells=tuple(rows),
        valid=tuple(tuple(True for _ in range(width)) for _ in range(width)),
    )


def _oracle_trim(cells, length):
    """Independent drop-based trim: remove farthest (ties: left) until fit."""
    kept = list(cells)

    def total(cs):
        return sum(len(t) for _, t in cs) + max(0, len(cs) - 1)

    while kept and total(kept) > length:
        drop = max(kept, key=lambda c: (abs(c[0]), -c[0]))
        kept.remove(drop)
    return kept


class TestAssembly:
    def test_sep_between_cells_then_pad(self):
        w = _window_with_row({-1: ("a",), 0: ("b",), 1: ("c",)})
        seq = assemble_row_seq(w, 0, 8)
        assert seq.tokens == ("a", SEP, "b", SEP, "c", PAD, PAD, PAD)
        assert seq.mask == (True,) * 5 + (False,) * 3

    def test_all_empty_row_is_all_pad(self):
        w = _window_with_row({})
        seq = assemble_row_seq(w, 0, 4)
        assert seq.tokens == (PAD,) * 4
        assert not any(seq.mask)

    def test_farthest_cells_dropped_first(self):
        cells = {-3: ("f", "f"), -1: ("n",), 0: ("t",), 2: ("m", "m", "m")}
        w = _window_with_row(cells)
        seq = assemble_row_seq(w, 0, 5)
        expected_kept = _oracle_trim(sorted(cells.items()), 5)
        expected = []
        for _, toks in expected_kept:
            if expected:
                expected.append(SEP)
            expected.extend(toks)
        assert list(seq.tokens[: len(expected)]) == expected

    def test_tie_drops_left_cell_first(self):
        w = _window_with_row({-2: ("l",), 0: ("t",), 2: ("r",)})
        seq = assemble_row_seq(w, 0, 3)
        # Only one of the distance-2 cells fits; the right one is kept.
        assert seq.tokens == ("t", SEP, "r")

    def test_sep_counts_against_budget(self):
        w = _window_with_row({0: ("a", "b"), 1: ("c",)})
        # 3 tokens + 1 SEP = 4 > 3, so the distance-1 cell is dropped.
        seq = assemble_row_seq(w, 0, 3)
        assert seq.tokens == ("a", "b", PAD)

    def test_oversized_single_cell_drops_to_empty(self):
        w = _window_with_row({0: tuple("abcdef")})
        seq = assemble_row_seq(w, 0, 4)
        assert seq.tokens == (PAD,) * 4

    def test_random_rows_match_drop_oracle(self):
        import numpy as np

        rng = np.random.default_rng(11)
        for _ in range(200):
            cells = {}
            for dc in range(-3, 4):
                n = int(rng.integers(0, 4))
                if n:
                    cells[dc] = tuple(f"t{dc}_{k}" for k in range(n))
            length = int(rng.integers(1, 14))
            seq = assemble_row_seq(_window_with_row(cells), 0, length)
            kept = _oracle_trim(sorted(cells.items()), length)
            expected = []
            for _, toks in kept:
                if expected:
                    expected.append(SEP)
                expected.extend(toks)
            expected += [PAD] * (length - len(expected))
            assert list(seq.tokens) == expected

    def test_column_assembly_vertical(self):
        sheet = _small_sheet()
        w = extract_window(sheet, CellAddr(4, 2), radius=2)
        seq = assemble_col_seq(w, 0, 8)
        # Column B data rows 2..6 with the target (row 4) blanked.
        assert seq.tokens[:5] == ("num", "4", SEP, "num", "6")

    def test_header_assembly(self):
        w = extract_window(_small_sheet(), CellAddr(4, 2), radius=2)
        seq = assemble_header_seq(w, 10)
        assert seq.tokens[:5] == ("str", "item", SEP, "str", "score")


class TestBundles:
    def test_reference_tiling_partition(self):
        members = bundle_members(10, 3)
        assert members == [[3 * b - 1, 3 * b, 3 * b + 1] for b in range(-3, 4)]
        flat = sorted(m for ms in members for m in ms)
        assert flat == list(range(-10, 11))

    def test_group_of_one(self):
        assert bundle_members(2, 1) == [[-2], [-1], [0], [1], [2]]

    def test_invalid_groups_rejected(self):
        with pytest.raises(ValueError):
            bundle_members(10, 2)  # even
        with pytest.raises(ValueError):
            bundle_members(10, 5)  # 21 % 5 != 0

    def test_bundle_shapes_and_segments(self):
        w = extract_window(_small_sheet(), CellAddr(4, 2), radius=2)
        bundles = build_bundles(w, length=6, group=1)
        assert len(bundles.row_bundles) == 5 and len(bundles.col_bundles) == 5
        b = bundles.row_bundles[0]
        assert len(b.members) == 2  # header + one data row
        assert b.segment_ids == (0,) * 6 + (1,) * 6
        assert b.member_offsets == (-2,)

    def test_row_bundles_share_header_member(self):
        w = extract_window(_small_sheet(), CellAddr(4, 2), radius=2)
        bundles = build_bundles(w, length=6, group=1)
        headers = {id(b.members[0]) for b in bundles.row_bundles}
        assert len(headers) == 1

    def test_col_header_is_target_column(self):
        w = extract_window(_small_sheet(), CellAddr(4, 2), radius=2)
        bundles = build_bundles(w, length=8, group=1)
        assert bundles.col_bundles[0].members[0] == assemble_col_seq(w, 0, 8)

    def test_token_seq_validates(self):
        with pytest.raises(ValueError):
            TokenSeq(("a",), (True, False))
        assert Bundle((TokenSeq((PAD,), (False,)),), ()).segment_ids == (0,)
