"""Corpus mining, splits, vocabularies, and the encoded-example format.

One encoded example per formula cell: provenance, the tokenized context
window (stored sparsely; row/column sequences are derived at load time), and
the gold token stream in its text form.  Records are JSON, one per line.

Mining accounting is exact:

    total formula cells = parse failures + filtered (per reason)
                        + dedup dropped + emitted

Per (file, sheet, column, token-stream) only the first 10 occurrences in row
order are emitted; later copies count as dedup drops.  Examples whose gold
sketch contains a token missing from the sketch vocabulary are removed after
vocabulary construction and reported per split.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .context import PAD, SEP, ContextWindow, extract_window
from .formula import (
    END_SKETCH,
    RANGE_TOK,
    FilterReason,
    classify_formula,
    format_stream,
    parse_formula,
    parse_stream,
    to_ir,
)
from .formula.parser import FormulaSyntaxError
from .formula.sketch import range_grammar_tokens
from .grid import CellAddr, Sheet, load_grid_file, parse_a1, render_a1

UNK = "[UNK]"
DEDUP_KEEP = 10


class DatasetError(Exception):
    pass


# ---------------------------------------------------------------------------
# Encoded examples
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExampleRecord:
    """One target cell: provenance, sparse tokenized window, gold stream."""

    file: str
    sheet: str
    target: str  # A1
    radius: int
    frozen: bool
    header: tuple[tuple[int, tuple[str, ...]], ...]  # (d_col, tokens)
    cells: tuple[tuple[int, int, tuple[str, ...]], ...]  # (d_row, d_col, tokens)
    gold: str  # token-stream text form

    def to_json(self) -> str:
        doc = {
            "file": self.file,
            "sheet": self.sheet,
            "target": self.target,
            "radius": self.radius,
            "frozen": self.frozen,
            "header": [[dc, list(toks)] for dc, toks in self.header],
            "cells": [[dr, dc, list(toks)] for dr, dc, toks in self.cells],
            "gold": self.gold,
        }
        return json.dumps(doc, sort_keys=True, ensure_ascii=False)

    @staticmethod
    def from_json(line: str) -> "ExampleRecord":
        doc = json.loads(line)
        return ExampleRecord(
            file=doc["file"],
            sheet=doc["sheet"],
            target=doc["target"],
            radius=doc["radius"],
            frozen=doc["frozen"],
            header=tuple((dc, tuple(toks)) for dc, toks in doc["header"]),
            cells=tuple((dr, dc, tuple(toks)) for dr, dc, toks in doc["cells"]),
            gold=doc["gold"],
        )

    def window(self) -> ContextWindow:
        """Rebuild the full window; validity is derived from the target."""
        target = parse_a1(self.target).start
        width = 2 * self.radius + 1
        header = [()] * width
        header_valid = [False] * width
        for dc, toks in self.header:
            header[dc + self.radius] = tuple(toks)
        for i in range(width):
            dc = i - self.radius
            header_valid[i] = self.frozen and target.col + dc >= 1
        cells = [[() for _ in range(width)] for _ in range(width)]
        for dr, dc, toks in self.cells:
            cells[dr + self.radius][dc + self.radius] = tuple(toks)
        valid = [
            [
                target.row + (i - self.radius) >= 1 and target.col + (j - self.radius) >= 1
                for j in range(width)
            ]
            for i in range(width)
        ]
        return ContextWindow(
            radius=self.radius,
            header=tuple(header),
            header_valid=tuple(header_valid),
            cells=tuple(tuple(row) for row in cells),
            valid=tuple(tuple(row) for row in valid),
        )

    def context_tokens(self) -> list[str]:
        """Every context token in this record (for vocabulary counting)."""
        out: list[str] = []
        for _, toks in self.header:
            out.extend(toks)
        for _, _, toks in self.cells:
            out.extend(toks)
        return out


def record_from_sheet(
    file: str, sheet: Sheet, target: CellAddr, gold: str, radius: int
) -> ExampleRecord:
    window = extract_window(sheet, target, radius)
    header = tuple(
        (dc, window.header_tokens(dc))
        for dc in range(-radius, radius + 1)
        if window.header_tokens(dc)
    )
    cells = tuple(
        (dr, dc, window.cell_tokens(dr, dc))
        for dr in range(-radius, radius + 1)
        for dc in range(-radius, radius + 1)
        if window.cell_tokens(dr, dc)
    )
    return ExampleRecord(
        file=file,
        sheet=sheet.name,
        target=render_a1(target),
        radius=radius,
        frozen=sheet.frozen_rows >= 1,
        header=header,
        cells=cells,
        gold=gold,
    )


def write_records(path: str | Path, records: list[ExampleRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def read_records(path: str | Path) -> list[ExampleRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(ExampleRecord.from_json(line))
    return out


# ---------------------------------------------------------------------------
# Mining
# ---------------------------------------------------------------------------


@dataclass
class MiningStats:
    total_formula_cells: int = 0
    parse_failures: int = 0
    filtered: dict[str, int] = field(
        default_factory=lambda: {reason.value: 0 for reason in FilterReason}
    )
    dedup_dropped: int = 0
    emitted: int = 0

    def check_identity(self) -> None:
        accounted = (
            self.parse_failures
            + sum(self.filtered.values())
            + self.dedup_dropped
            + self.emitted
        )
        if accounted != self.total_formula_cells:
            raise DatasetError(
                f"mining accounting broken: {accounted} accounted "
                f"vs {self.total_formula_cells} total"
            )

    def merge(self, other: "MiningStats") -> None:
        self.total_formula_cells += other.total_formula_cells
        self.parse_failures += other.parse_failures
        self.dedup_dropped += other.dedup_dropped
        self.emitted += other.emitted
        for k, v in other.filtered.items():
            self.filtered[k] = self.filtered.get(k, 0) + v

    def to_doc(self) -> dict:
        return {
            "total_formula_cells": self.total_formula_cells,
            "parse_failures": self.parse_failures,
            "filtered": dict(sorted(self.filtered.items())),
            "dedup_dropped": self.dedup_dropped,
            "emitted": self.emitted,
        }


def mine_sheet(file: str, sheet: Sheet, radius: int) -> tuple[list[ExampleRecord], MiningStats]:
    """Mine every formula cell of one sheet, in row order."""
    stats = MiningStats()
    records: list[ExampleRecord] = []
    seen: Counter[tuple[int, str]] = Counter()
    for addr, cell in sheet.formula_cells():
        stats.total_formula_cells += 1
        assert cell.formula is not None
        try:
            ast = parse_formula(cell.formula)
        except FormulaSyntaxError:
            stats.parse_failures += 1
            continue
        reason = classify_formula(ast, addr, radius)
        if reason is not None:
            stats.filtered[reason.value] += 1
            continue
        gold = format_stream(to_ir(ast, addr, radius))
        key = (addr.col, gold)
        seen[key] += 1
        if seen[key] > DEDUP_KEEP:
            stats.dedup_dropped += 1
            continue
        records.append(record_from_sheet(file, sheet, addr, gold, radius))
        stats.emitted += 1
    stats.check_identity()
    return records, stats


def mine_files(
    files: list[Path], radius: int, *, corpus_root: Path | None = None
) -> tuple[list[ExampleRecord], MiningStats]:
    """Mine a list of grid files in the given (already deterministic) order."""
    stats = MiningStats()
    records: list[ExampleRecord] = []
    for path in files:
        label = str(path.relative_to(corpus_root)) if corpus_root else path.name
        for sheet in load_grid_file(path):
            recs, s = mine_sheet(label, sheet, radius)
            records.extend(recs)
            stats.merge(s)
    stats.check_identity()
    return records, stats


def split_corpus(
    files: list[Path], ratios: tuple[float, float, float], seed: int
) -> tuple[list[Path], list[Path], list[Path]]:
    """Seeded shuffle, then split at file granularity."""
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise DatasetError(f"split ratios must be three non-negatives summing to 1: {ratios}")
    order = np.random.default_rng(seed).permutation(len(files))
    shuffled = [files[i] for i in order]
    n = len(files)
    n_train = int(n * ratios[0])
    n_valid = int(n * (ratios[0] + ratios[1])) - n_train
    return (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_valid],
        shuffled[n_train + n_valid :],
    )


# ---------------------------------------------------------------------------
# Vocabularies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Vocabulary:
    """Dense-id vocabulary: reserved tokens first, then by (-count, token)."""

    tokens: tuple[str, ...]
    counts: tuple[int, ...]
    index: dict[str, int]

    @staticmethod
    def build(counter: Counter[str], *, reserved: tuple[str, ...], min_count: int) -> "Vocabulary":
        kept = sorted(
            (
                (tok, cnt)
                for tok, cnt in counter.items()
                if cnt >= min_count and tok not in reserved
            ),
            key=lambda tc: (-tc[1], tc[0]),
        )
        tokens = tuple(reserved) + tuple(t for t, _ in kept)
        counts = tuple(counter.get(t, 0) for t in reserved) + tuple(c for _, c in kept)
        return Vocabulary(tokens, counts, {t: i for i, t in enumerate(tokens)})

    @staticmethod
    def closed(tokens: list[str]) -> "Vocabulary":
        return Vocabulary(tuple(tokens), tuple(0 for _ in tokens), {t: i for i, t in enumerate(tokens)})

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int | None:
        return self.index.get(token)

    def id_or_unk(self, token: str) -> int:
        got = self.index.get(token)
        if got is None:
            unk = self.index.get(UNK)
            if unk is None:
                raise DatasetError(f"token {token!r} unknown and vocabulary has no {UNK}")
            return unk
        return got

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for i, (tok, cnt) in enumerate(zip(self.tokens, self.counts)):
                fh.write(json.dumps([tok, i, cnt], ensure_ascii=False) + "\n")

    @staticmethod
    def load(path: str | Path) -> "Vocabulary":
        tokens: list[str] = []
        counts: list[int] = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                tok, idx, cnt = json.loads(line)
                if idx != len(tokens):
                    raise DatasetError(f"vocabulary ids not dense at {tok!r}")
                tokens.append(tok)
                counts.append(cnt)
        return Vocabulary(tuple(tokens), tuple(counts), {t: i for i, t in enumerate(tokens)})


INPUT_RESERVED = (PAD, UNK, SEP)
SKETCH_RESERVED = (RANGE_TOK, END_SKETCH)


def build_input_vocab(records: list[ExampleRecord], min_count: int) -> Vocabulary:
    counter: Counter[str] = Counter()
    for rec in records:
        counter.update(rec.context_tokens())
    return Vocabulary.build(counter, reserved=INPUT_RESERVED, min_count=min_count)


def build_sketch_vocab(records: list[ExampleRecord], min_count: int) -> Vocabulary:
    counter: Counter[str] = Counter()
    for rec in records:
        ir = parse_stream(rec.gold)
        counter.update(tok for tok in ir.sketch if tok not in SKETCH_RESERVED)
    return Vocabulary.build(counter, reserved=SKETCH_RESERVED, min_count=min_count)


def build_range_vocab(radius: int) -> Vocabulary:
    return Vocabulary.closed(range_grammar_tokens(radius))


def drop_unk_gold(
    records: list[ExampleRecord], sketch_vocab: Vocabulary
) -> tuple[list[ExampleRecord], int]:
    """Remove examples whose gold sketch has out-of-vocabulary tokens."""
    kept = []
    dropped = 0
    for rec in records:
        ir = parse_stream(rec.gold)
        if all(sketch_vocab.id_of(tok) is not None for tok in ir.sketch):
            kept.append(rec)
        else:
            dropped += 1
    return kept, dropped


# ---------------------------------------------------------------------------
# End-to-end preprocess
# ---------------------------------------------------------------------------

SPLIT_NAMES = ("train", "valid", "test")


def preprocess_corpus(
    corpus_dir: str | Path,
    out_dir: str | Path,
    *,
    radius: int = 10,
    min_count: int = 10,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> dict:
    """Mine, split, build vocabularies, drop UNK-gold examples, write it all.

    Deterministic: the same corpus and flags produce byte-identical outputs.
    Returns the stats report (also written as report.json).
    """
    corpus = Path(corpus_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = sorted(corpus.rglob("*.grid.json"))
    if not files:
        raise DatasetError(f"no .grid.json files under {corpus}")

    split_files = split_corpus(files, ratios, seed)
    report: dict = {
        "config": {
            "radius": radius,
            "min_count": min_count,
            "ratios": list(ratios),
            "seed": seed,
        },
        "files": {name: len(fs) for name, fs in zip(SPLIT_NAMES, split_files)},
        "splits": {},
    }

    mined: dict[str, list[ExampleRecord]] = {}
    for name, fs in zip(SPLIT_NAMES, split_files):
        records, stats = mine_files(sorted(fs), radius, corpus_root=corpus)
        mined[name] = records
        report["splits"][name] = stats.to_doc()

    input_vocab = build_input_vocab(mined["train"], min_count)
    sketch_vocab = build_sketch_vocab(mined["train"], min_count)
    range_vocab = build_range_vocab(radius)

    for name in SPLIT_NAMES:
        kept, dropped = drop_unk_gold(mined[name], sketch_vocab)
        mined[name] = kept
        report["splits"][name]["unk_gold_dropped"] = dropped
        report["splits"][name]["written"] = len(kept)
        write_records(out / f"{name}.jsonl", kept)

    input_vocab.save(out / "input_vocab.jsonl")
    sketch_vocab.save(out / "sketch_vocab.jsonl")
    range_vocab.save(out / "range_vocab.jsonl")
    report["vocab"] = {
        "input": len(input_vocab),
        "sketch": len(sketch_vocab),
        "range": len(range_vocab),
    }

    (out / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return report
