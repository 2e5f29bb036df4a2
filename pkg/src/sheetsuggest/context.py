"""Tabular context around a target cell: window, token sequences, bundles.

The window is (2D+2) x (2D+1): one header row (the sheet's first row when at
least one row is frozen, empty otherwise) above a (2D+1) x (2D+1) block of
data cells centered on the target.  The target cell itself is blanked — its
formula is what we are predicting.

Row/column sequences concatenate cell token lists with a ``[SEP]`` between
non-empty cells and are trimmed to length L by dropping whole cells farthest
from the target first (ties drop the left/upper cell), then padded.  The
``[SEP]`` tokens count against L.

Bundles tile the window: with group size N (odd, dividing 2D+1) there are
K = (2D+1)/N row bundles, bundle b holding the header plus data rows
{N*b - (N-1)/2 .. N*b + (N-1)/2}; the K bundle member sets partition
-D..D exactly.  Column bundles are built the same way with the target's own
column standing in as the header member.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .grid import CellAddr, CellKind, CellValue, Sheet

PAD = "[PAD]"
SEP = "[SEP]"
SEG_HEADER = 0
SEG_DATA = 1

_VALUE_TOKEN_RE = re.compile(r"\d+(?:\.\d+)?|[^\W\d_]+")

TokenList = tuple[str, ...]


def tokenize_text(text: str) -> list[str]:
    """Lower-cased whitespace-and-punctuation split; decimals stay whole."""
    return _VALUE_TOKEN_RE.findall(text.lower())


def tokenize_cell(cell: CellValue) -> list[str]:
    """``[kind token] ++ value tokens``; empty cells emit nothing."""
    if cell.kind is CellKind.EMPTY:
        return []
    return [cell.kind.value] + tokenize_text(cell.literal)


@dataclass(frozen=True)
class ContextWindow:
    """Tokenized cells around a target; indices are offsets in [-D, D]."""

    radius: int
    header: tuple[TokenList, ...]  # 2D+1 columns, left to right
    header_valid: tuple[bool, ...]
    cells: tuple[tuple[TokenList, ...], ...]  # [row offset][col offset]
    valid: tuple[tuple[bool, ...], ...]

    def __post_init__(self) -> None:
        width = 2 * self.radius + 1
        if len(self.header) != width or len(self.cells) != width:
            raise ValueError("window dimensions do not match radius")

    def _idx(self, off: int) -> int:
        if abs(off) > self.radius:
            raise IndexError(f"offset {off} outside +/-{self.radius}")
        return off + self.radius

    def cell_tokens(self, d_row: int, d_col: int) -> TokenList:
        return self.cells[self._idx(d_row)][self._idx(d_col)]

    def cell_valid(self, d_row: int, d_col: int) -> bool:
        return self.valid[self._idx(d_row)][self._idx(d_col)]

    def header_tokens(self, d_col: int) -> TokenList:
        return self.header[self._idx(d_col)]


def extract_window(sheet: Sheet, target: CellAddr, radius: int = 10) -> ContextWindow:
    """Tokenize the (2D+2) x (2D+1) neighborhood of ``target``.

    Positions at row/column < 1 are invalid; everything else on the sparse
    sheet is addressable (absent cells are empty).  The target cell is
    blanked but stays valid.
    """
    offs = range(-radius, radius + 1)
    has_header = sheet.frozen_rows >= 1

    header: list[TokenList] = []
    header_valid: list[bool] = []
    for dc in offs:
        col = target.col + dc
        if has_header and col >= 1:
            header.append(tuple(tokenize_cell(sheet.cell_at(1, col))))
            header_valid.append(True)
        else:
            header.append(())
            header_valid.append(False)

    rows: list[tuple[TokenList, ...]] = []
    valid: list[tuple[bool, ...]] = []
    for dr in offs:
        row = target.row + dr
        row_tokens: list[TokenList] = []
        row_valid: list[bool] = []
        for dc in offs:
            col = target.col + dc
            if row < 1 or col < 1:
                row_tokens.append(())
                row_valid.append(False)
            elif dr == 0 and dc == 0:
                row_tokens.append(())  # the cell being predicted
                row_valid.append(True)
            else:
                row_tokens.append(tuple(tokenize_cell(sheet.cell_at(row, col))))
                row_valid.append(True)
        rows.append(tuple(row_tokens))
        valid.append(tuple(row_valid))

    return ContextWindow(
        radius=radius,
        header=tuple(header),
        header_valid=tuple(header_valid),
        cells=tuple(rows),
        valid=tuple(valid),
    )


def apply_row_mask(window: ContextWindow, visible_rows: set[int]) -> ContextWindow:
    """Keep only the given data-row offsets (header untouched).

    Supports autofill-style evaluation where only rows at and above the
    target are revealed.
    """
    for off in visible_rows:
        if abs(off) > window.radius:
            raise ValueError(f"visible row offset {off} outside +/-{window.radius}")
    width = 2 * window.radius + 1
    cells = []
    valid = []
    for i in range(width):
        off = i - window.radius
        if off in visible_rows:
            cells.append(window.cells[i])
            valid.append(window.valid[i])
        else:
            cells.append(tuple(() for _ in range(width)))
            valid.append(tuple(False for _ in range(width)))
    return replace(window, cells=tuple(cells), valid=tuple(valid))


# ---------------------------------------------------------------------------
# Sequence assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TokenSeq:
    """Fixed-length token sequence; mask is True at real (non-PAD) positions."""

    tokens: TokenList
    mask: tuple[bool, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.mask):
            raise ValueError("tokens/mask length mismatch")

    @property
    def length(self) -> int:
        return len(self.tokens)


def _assemble(cells: list[tuple[int, TokenList]], length: int) -> TokenSeq:
    """Join cells (offset, tokens) with [SEP]; trim whole cells to fit.

    ``cells`` must be pre-filtered to non-empty token lists in display order.
    The keep priority is nearest-to-target first, ties prefer the cell on the
    positive-offset side (so the left/upper one is dropped first); the kept
    set is the longest priority prefix that fits, which matches dropping
    farthest cells one at a time until the sequence fits.
    """
    priority = sorted(range(len(cells)), key=lambda k: (abs(cells[k][0]), -cells[k][0]))
    kept: set[int] = set()
    used = 0
    for k in priority:
        cost = len(cells[k][1]) + (1 if kept else 0)
        if used + cost > length:
            break
        kept.add(k)
        used += cost

    tokens: list[str] = []
    for k in range(len(cells)):
        if k not in kept:
            continue
        if tokens:
            tokens.append(SEP)
        tokens.extend(cells[k][1])
    mask = [True] * len(tokens)
    while len(tokens) < length:
        tokens.append(PAD)
        mask.append(False)
    return TokenSeq(tuple(tokens), tuple(mask))


def assemble_row_seq(window: ContextWindow, d_row: int, length: int) -> TokenSeq:
    cells = []
    for dc in range(-window.radius, window.radius + 1):
        toks = window.cell_tokens(d_row, dc)
        if toks and window.cell_valid(d_row, dc):
            cells.append((dc, toks))
    return _assemble(cells, length)


def assemble_col_seq(window: ContextWindow, d_col: int, length: int) -> TokenSeq:
    cells = []
    for dr in range(-window.radius, window.radius + 1):
        toks = window.cell_tokens(dr, d_col)
        if toks and window.cell_valid(dr, d_col):
            cells.append((dr, toks))
    return _assemble(cells, length)


def assemble_header_seq(window: ContextWindow, length: int) -> TokenSeq:
    cells = []
    for dc in range(-window.radius, window.radius + 1):
        toks = window.header_tokens(dc)
        if toks and window.header_valid[dc + window.radius]:
            cells.append((dc, toks))
    return _assemble(cells, length)


# ---------------------------------------------------------------------------
# Bundles
# ---------------------------------------------------------------------------


def bundle_members(radius: int, group: int) -> list[list[int]]:
    """Member offsets per bundle; the lists partition -radius..radius.

    Raises ValueError when (2*radius+1) is not an odd multiple of the odd
    group size — the partition property is a startup invariant.
    """
    width = 2 * radius + 1
    if group < 1 or group % 2 == 0:
        raise ValueError(f"bundle group size must be odd, got {group}")
    if width % group != 0:
        raise ValueError(f"2*radius+1 = {width} not divisible by group size {group}")
    count = width // group
    half = (count - 1) // 2
    wing = (group - 1) // 2
    members = [
        [group * b + j for j in range(-wing, wing + 1)] for b in range(-half, half + 1)
    ]
    flat = [m for ms in members for m in ms]
    if sorted(flat) != list(range(-radius, radius + 1)) or len(set(flat)) != len(flat):
        raise ValueError("bundle members do not partition the window")  # pragma: no cover
    return members


@dataclass(frozen=True)
class Bundle:
    """Header member followed by ``group`` data members, each of length L."""

    members: tuple[TokenSeq, ...]
    member_offsets: tuple[int, ...]  # data member offsets, header excluded

    @property
    def segment_ids(self) -> tuple[int, ...]:
        length = self.members[0].length
        segs: list[int] = [SEG_HEADER] * length
        for _ in self.member_offsets:
            segs.extend([SEG_DATA] * length)
        return tuple(segs)


@dataclass(frozen=True)
class BundleSet:
    radius: int
    group: int
    seq_len: int
    row_bundles: tuple[Bundle, ...]
    col_bundles: tuple[Bundle, ...]


def build_bundles(window: ContextWindow, length: int, group: int = 3) -> BundleSet:
    """Assemble all row and column bundles for one window."""
    plan = bundle_members(window.radius, group)

    header = assemble_header_seq(window, length)
    row_seqs = {
        off: assemble_row_seq(window, off, length)
        for off in range(-window.radius, window.radius + 1)
    }
    row_bundles = tuple(
        Bundle(
            members=(header, *(row_seqs[m] for m in ms)),
            member_offsets=tuple(ms),
        )
        for ms in plan
    )

    col_header = assemble_col_seq(window, 0, length)
    col_seqs = {
        off: assemble_col_seq(window, off, length)
        for off in range(-window.radius, window.radius + 1)
    }
    col_bundles = tuple(
        Bundle(
            members=(col_header, *(col_seqs[m] for m in ms)),
            member_offsets=tuple(ms),
        )
        for ms in plan
    )

    return BundleSet(
        radius=window.radius,
        group=group,
        seq_len=length,
        row_bundles=row_bundles,
        col_bundles=col_bundles,
    )
