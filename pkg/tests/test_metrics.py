"""Exact-match scoring: matchers, top-k accuracy, buckets, report identities."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sheetsuggest import metrics, synth
from sheetsuggest.formula import (
    FormulaIR,
    parse_formula,
    sketch_length,
    to_ir,
)
from sheetsuggest.grid import CellAddr

TARGET = CellAddr(10, 10)


def ir_of(text: str) -> FormulaIR:
    return to_ir(parse_formula(text), TARGET)


SUM_BELOW = ir_of("=SUM(J5:J9)")
SUM_SHIFTED = ir_of("=SUM(J4:J8)")
AVG_BELOW = ir_of("=AVERAGE(J5:J9)")
CONCAT_PAIR = ir_of('=G10&"/"&H10')
ADD_PAIR = ir_of("=G10+H10")


class TestMatchers:
    def test_identical_formulas_match_everywhere(self):
        assert metrics.match_formula(SUM_BELOW, SUM_BELOW)
        assert metrics.match_sketch(SUM_BELOW, SUM_BELOW)
        assert metrics.match_ranges(SUM_BELOW, SUM_BELOW)

    def test_same_sketch_different_ranges(self):
        assert metrics.match_sketch(SUM_SHIFTED, SUM_BELOW)
        assert not metrics.match_ranges(SUM_SHIFTED, SUM_BELOW)
        assert not metrics.match_formula(SUM_SHIFTED, SUM_BELOW)

    def test_same_ranges_different_sketch(self):
        assert metrics.match_ranges(AVG_BELOW, SUM_BELOW)
        assert not metrics.match_sketch(AVG_BELOW, SUM_BELOW)
        assert not metrics.match_formula(AVG_BELOW, SUM_BELOW)

    def test_literal_argument_breaks_sketch_only(self):
        # Both reference the same two neighbours; the operator tree differs.
        assert metrics.match_ranges(CONCAT_PAIR, ADD_PAIR)
        assert not metrics.match_sketch(CONCAT_PAIR, ADD_PAIR)

    def test_range_count_mismatch_is_a_non_match(self):
        one = ir_of("=SUM(J5:J9)")
        two = ir_of("=SUM(J5:J9)+A1")
        assert not metrics.match_ranges(one, two)
        assert not metrics.match_formula(one, two)

    def test_full_match_implies_component_matches(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            a = to_ir(synth.random_eligible_ast(rng, TARGET, depth=3), TARGET)
            b = to_ir(synth.random_eligible_ast(rng, TARGET, depth=3), TARGET)
            for pred, gold in ((a, a), (a, b)):
                if metrics.match_formula(pred, gold):
                    assert metrics.match_sketch(pred, gold)
                    assert metrics.match_ranges(pred, gold)


class TestTopK:
    def test_rank_three_hit_counts_at_five_not_one(self):
        ranked = [[AVG_BELOW, SUM_SHIFTED, SUM_BELOW]]
        assert metrics.topk_accuracy(ranked, [SUM_BELOW], 1) == 0.0
        assert metrics.topk_accuracy(ranked, [SUM_BELOW], 5) == 1.0

    def test_empty_prediction_list_scores_zero_without_error(self):
        assert metrics.topk_accuracy([[]], [SUM_BELOW], 5) == 0.0

    def test_k_below_one_rejected(self):
        with pytest.raises(ValueError, match=">= 1"):
            metrics.topk_accuracy([[SUM_BELOW]], [SUM_BELOW], 0)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="length"):
            metrics.topk_accuracy([[SUM_BELOW]], [], 1)

    @given(st.data())
    @settings(max_examples=50, deadline=None)
    def test_accuracy_is_monotone_in_k(self, data):
        pool = [SUM_BELOW, SUM_SHIFTED, AVG_BELOW, CONCAT_PAIR, ADD_PAIR]
        n = data.draw(st.integers(min_value=1, max_value=6))
        ranked, golds = [], []
        for _ in range(n):
            perm = data.draw(st.permutations(pool))
            cut = data.draw(st.integers(min_value=0, max_value=len(pool)))
            ranked.append(list(perm)[:cut])
            golds.append(data.draw(st.sampled_from(pool)))
        accs = [metrics.topk_accuracy(ranked, golds, k) for k in (1, 2, 3, 5, 10)]
        assert all(lo <= hi + 1e-15 for lo, hi in zip(accs, accs[1:]))

    def test_duplicates_collapse_to_highest_rank(self):
        padded = [SUM_SHIFTED, SUM_SHIFTED, SUM_SHIFTED, SUM_BELOW]
        deduped = metrics.dedup_ranked(padded)
        assert deduped == [SUM_SHIFTED, SUM_BELOW]
        # After collapsing, the true formula sits at rank 2 and k=2 credits it.
        assert metrics.topk_accuracy([deduped], [SUM_BELOW], 2) == 1.0
        assert metrics.topk_accuracy([padded], [SUM_BELOW], 2) == 0.0


class TestBuckets:
    def test_bucket_labels(self):
        assert metrics.bucket_label(1) == "1"
        assert metrics.bucket_label(2) == "2"
        assert metrics.bucket_label(3) == "3"
        assert metrics.bucket_label(4) == "4-5"
        assert metrics.bucket_label(5) == "4-5"
        assert metrics.bucket_label(6) == "6+"
        assert metrics.bucket_label(40) == "6+"

    def test_sum_formula_lands_in_bucket_two(self):
        # Sketch tokens: SUM RANGE (terminator excluded from the length).
        assert sketch_length(SUM_BELOW) == 2
        assert metrics.bucket_label(sketch_length(SUM_BELOW)) == "2"


@pytest.fixture(scope="module")
def toy_eval():
    from sheetsuggest.dataset import (
        build_input_vocab,
        build_range_vocab,
        build_sketch_vocab,
        mine_sheet,
    )
    from sheetsuggest.model import Network, Predictor, Vocabs, toy_config

    rng = np.random.default_rng(0)
    records = []
    # Only extent-2 patterns fit inside radius 2.
    for i in (0, 4, 8):
        sheet = synth.memorization_sheet(rng, i)
        recs, _ = mine_sheet(f"toy{i}", sheet, radius=2)
        records.extend(recs)
    assert len(records) == 3
    vocabs = Vocabs(
        build_input_vocab(records, min_count=1),
        build_sketch_vocab(records, min_count=1),
        build_range_vocab(2),
    )
    config = toy_config(seed=3)
    predictor = Predictor(Network(config, vocabs, seed=3))
    return predictor, records


class TestEvaluate:
    def test_report_identities(self, toy_eval):
        predictor, records = toy_eval
        report = metrics.evaluate(predictor, records, ks=(1, 2, 5), beam_size=8)
        assert report.n == len(records)
        # Monotone in k for every matcher.
        for acc in (report.formula_at, report.sketch_at, report.range_at):
            assert acc[1] <= acc[2] + 1e-15 <= acc[5] + 2e-15
        # Formula accuracy can never exceed its components.
        assert report.formula_at[1] <= report.sketch_at[1] + 1e-15
        assert report.formula_at[1] <= report.range_at[1] + 1e-15
        # Bucket counts partition the set and weighted-average back to top-1.
        total = sum(b["n"] for b in report.buckets.values())
        assert total == report.n
        weighted = sum(b["n"] * b["top1"] for b in report.buckets.values()) / report.n
        assert abs(weighted - report.formula_at[1]) <= 1e-12

    def test_blank_headers_flag_runs_and_is_recorded(self, toy_eval):
        predictor, records = toy_eval
        report = metrics.evaluate(
            predictor, records[:2], ks=(1,), beam_size=4, blank_headers=True
        )
        assert report.notes["blank_headers"] is True
        assert report.n == 2

    def test_empty_record_list_rejected(self, toy_eval):
        predictor, _ = toy_eval
        with pytest.raises(ValueError, match="no examples"):
            metrics.evaluate(predictor, [], ks=(1,))

    def test_format_table_mentions_counts(self, toy_eval):
        predictor, records = toy_eval
        report = metrics.evaluate(predictor, records[:2], ks=(1, 5), beam_size=8)
        table = report.format_table()
        assert "examples: 2" in table
        assert "formula" in table and "sketch" in table and "range" in table
        doc = report.to_doc()
        assert doc["n"] == 2
        assert set(doc["formula"]) == {"1", "5"}
