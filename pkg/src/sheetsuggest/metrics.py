"""Exact-match evaluation: formula/sketch/range accuracy at k, size buckets.

All comparisons are over the canonical token stream — no semantic
equivalence is credited.  A full-formula match implies both the sketch match
and the ordered-range match by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .dataset import ExampleRecord
from .formula import FormulaIR, parse_stream, sketch_length
from .grid import parse_a1

BUCKET_LABELS = ("1", "2", "3", "4-5", "6+")

DEFAULT_KS = (1, 5, 10)


def bucket_label(length: int) -> str:
    if length <= 1:
        return "1"
    if length == 2:
        return "2"
    if length == 3:
        return "3"
    if length <= 5:
        return "4-5"
    return "6+"


def match_formula(pred: FormulaIR, gold: FormulaIR) -> bool:
    return pred.sketch == gold.sketch and pred.ranges == gold.ranges


def match_sketch(pred: FormulaIR, gold: FormulaIR) -> bool:
    return pred.sketch == gold.sketch


def match_ranges(pred: FormulaIR, gold: FormulaIR) -> bool:
    return pred.ranges == gold.ranges


def dedup_ranked(ranked: list[FormulaIR]) -> list[FormulaIR]:
    """Collapse duplicate streams to their highest (earliest) rank."""
    seen: set = set()
    out = []
    for ir in ranked:
        key = (ir.sketch, ir.ranges)
        if key in seen:
            continue
        seen.add(key)
        out.append(ir)
    return out


def topk_hit(ranked: list[FormulaIR], gold: FormulaIR, k: int, matcher=match_formula) -> bool:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return any(matcher(p, gold) for p in ranked[:k])


def topk_accuracy(
    ranked_lists: list[list[FormulaIR]],
    golds: list[FormulaIR],
    k: int,
    matcher=match_formula,
) -> float:
    """Fraction of examples whose gold appears in the first k predictions."""
    if len(ranked_lists) != len(golds):
        raise ValueError("ranked lists and golds differ in length")
    if not golds:
        return 0.0
    hits = sum(topk_hit(r, g, k, matcher) for r, g in zip(ranked_lists, golds))
    return hits / len(golds)


@dataclass
class EvalReport:
    n: int
    ks: tuple[int, ...]
    formula_at: dict[int, float]
    sketch_at: dict[int, float]
    range_at: dict[int, float]
    buckets: dict[str, dict]  # label -> {"n": int, "top1": float}
    notes: dict = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {
            "n": self.n,
            "ks": list(self.ks),
            "formula": {str(k): v for k, v in self.formula_at.items()},
            "sketch": {str(k): v for k, v in self.sketch_at.items()},
            "range": {str(k): v for k, v in self.range_at.items()},
            "buckets": self.buckets,
            "notes": self.notes,
        }

    def format_table(self) -> str:
        lines = [f"examples: {self.n}"]
        header = "metric  " + "".join(f"top-{k:<6}" for k in self.ks)
        lines.append(header)
        for name, acc in (
            ("formula", self.formula_at),
            ("sketch", self.sketch_at),
            ("range", self.range_at),
        ):
            lines.append(f"{name:<8}" + "".join(f"{acc[k]:<10.4f}" for k in self.ks))
        lines.append("sketch-length buckets (top-1 formula):")
        for label in BUCKET_LABELS:
            info = self.buckets.get(label)
            if info and info["n"]:
                lines.append(f"  {label:<4} n={info['n']:<6} {info['top1']:.4f}")
        for key, value in sorted(self.notes.items()):
            lines.append(f"{key}: {value}")
        return "\n".join(lines)


def blank_header(record: ExampleRecord) -> ExampleRecord:
    """The same example with its header tokens removed (ablation input)."""
    return replace(record, header=())


def evaluate(
    predictor,
    records: list[ExampleRecord],
    ks: tuple[int, ...] = DEFAULT_KS,
    beam_size: int | None = None,
    blank_headers: bool = False,
) -> EvalReport:
    """Run the predictor over preprocessed examples and score exact matches."""
    if not records:
        raise ValueError("no examples to evaluate")
    ks = tuple(sorted(set(ks)))
    if any(k < 1 for k in ks):
        raise ValueError("every k must be >= 1")
    top_k = max(ks)

    ranked_lists: list[list[FormulaIR]] = []
    golds: list[FormulaIR] = []
    dropped = 0
    for record in records:
        if blank_headers:
            record = blank_header(record)
        suggestions, diagnostics = predictor.predict_record(
            record, top_k=top_k, beam_size=beam_size
        )
        dropped += diagnostics.get("dropped_unrenderable", 0)
        ranked_lists.append(dedup_ranked([s.ir for s in suggestions]))
        golds.append(parse_stream(record.gold))

    formula_at = {k: topk_accuracy(ranked_lists, golds, k, match_formula) for k in ks}
    sketch_at = {k: topk_accuracy(ranked_lists, golds, k, match_sketch) for k in ks}
    range_at = {k: topk_accuracy(ranked_lists, golds, k, match_ranges) for k in ks}

    buckets: dict[str, dict] = {
        label: {"n": 0, "hits": 0} for label in BUCKET_LABELS
    }
    for ranked, gold in zip(ranked_lists, golds):
        label = bucket_label(sketch_length(gold))
        buckets[label]["n"] += 1
        buckets[label]["hits"] += int(topk_hit(ranked, gold, 1, match_formula))
    bucket_out = {
        label: {"n": info["n"], "top1": (info["hits"] / info["n"]) if info["n"] else 0.0}
        for label, info in buckets.items()
    }

    return EvalReport(
        n=len(records),
        ks=ks,
        formula_at=formula_at,
        sketch_at=sketch_at,
        range_at=range_at,
        buckets=bucket_out,
        notes={"dropped_unrenderable": dropped, "blank_headers": blank_headers},
    )
