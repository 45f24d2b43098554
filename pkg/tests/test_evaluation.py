"""F1 math on hand-counted fixtures and alignment contracts."""

import numpy as np
import pytest

from labelpath import evaluation as ev
from labelpath.taxonomy import LabelPathSequence, Taxonomy


def seq(sets):
    frozen = [frozenset(s) for s in sets]
    return LabelPathSequence(sets=frozen, stop_at=len(frozen) - 1)


@pytest.fixture
def taxonomy():
    # root(0) -> A(1), B(2); A -> A1(3), B -> B1(4)
    return Taxonomy(levels=[[0], [1, 2], [3, 4]],
                    codes={0: "root", 1: "A", 2: "B", 3: "A1", 4: "B1"},
                    parents={0: frozenset(), 1: frozenset({0}),
                             2: frozenset({0}), 3: frozenset({1}),
                             4: frozenset({2})})


class TestFlatten:
    def test_perfect_prediction(self):
        pairs = [(seq([{0}, {1}, {3}]), seq([{0}, {1}, {3}]))]
        counts = ev.flatten_counts(pairs)
        tp, fp, fn = counts.totals()
        assert (tp, fp, fn) == (2, 0, 0)

    def test_empty_prediction_counts_misses(self):
        pairs = [(seq([{0}]), seq([{0}, {1}, {3}]))]
        counts = ev.flatten_counts(pairs)
        assert counts.totals() == (0, 0, 2)

    def test_partial_overlap_hand_counts(self):
        pairs = [(seq([{0}, {1, 2}]), seq([{0}, {1}]))]
        # pred {A, B}, gold {A} -> TP=1 FP=1 FN=0
        assert ev.flatten_counts(pairs).totals() == (1, 1, 0)

    def test_mixed_example(self):
        pred = seq([{0}, {1}, {4}])   # {A, B1}
        gold = seq([{0}, {1}, {3}])   # {A, A1}
        counts = ev.flatten_counts([(pred, gold)])
        assert counts.totals() == (1, 1, 1)


class TestF1:
    def test_micro_half(self):
        counts = ev.ConfusionCounts(tp={1: 1}, fp={2: 1}, fn={3: 1})
        assert ev.micro_f1(counts) == pytest.approx(0.5)

    def test_perfect_is_one(self):
        counts = ev.ConfusionCounts(tp={1: 4, 2: 2})
        assert ev.micro_f1(counts) == 1.0
        assert ev.macro_f1(counts) == 1.0

    def test_all_wrong_is_zero(self):
        counts = ev.ConfusionCounts(fp={1: 3}, fn={2: 3})
        assert ev.micro_f1(counts) == 0.0
        assert ev.macro_f1(counts) == 0.0

    def test_micro_bounds_and_exactness(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            counts = ev.ConfusionCounts(
                tp={1: int(rng.integers(0, 5))},
                fp={1: int(rng.integers(0, 5))},
                fn={1: int(rng.integers(0, 5))})
            f1 = ev.micro_f1(counts)
            assert 0.0 <= f1 <= 1.0
            tp, fp, fn = counts.totals()
            assert (f1 == 1.0) == (fp == 0 and fn == 0 and tp > 0)

    def test_macro_excludes_unseen_by_default(self):
        counts = ev.ConfusionCounts(tp={1: 1})
        assert ev.macro_f1(counts) == 1.0
        assert ev.macro_f1(counts, include_unseen={1, 2, 3}) == pytest.approx(1 / 3)

    def test_order_independence(self):
        pairs_a = [(seq([{0}, {1}]), seq([{0}, {1}])),
                   (seq([{0}, {2}]), seq([{0}, {1}]))]
        pairs_b = list(reversed(pairs_a))
        assert ev.micro_f1(ev.flatten_counts(pairs_a)) == \
            ev.micro_f1(ev.flatten_counts(pairs_b))


class TestLevelReport:
    def test_per_level_restriction(self, taxonomy):
        pred = {"p1": seq([{0}, {1}, {4}])}
        gold = {"p1": seq([{0}, {1}, {3}])}
        report = ev.level_report(pred, gold, taxonomy)
        assert report["levels"][1]["micro_f1"] == 1.0
        assert report["levels"][2]["micro_f1"] == 0.0
        assert report["flattened"]["micro_f1"] == pytest.approx(0.5)

    def test_pred_stops_early_gold_continues(self, taxonomy):
        pred = {"p1": seq([{0}, {1}])}
        gold = {"p1": seq([{0}, {1}, {3}])}
        report = ev.level_report(pred, gold, taxonomy)
        assert report["levels"][2]["support"] == 1
        assert report["levels"][2]["micro_f1"] == 0.0

    def test_id_mismatch_rejected(self, taxonomy):
        with pytest.raises(ev.EvaluationError):
            ev.level_report({"p1": seq([{0}, {1}])},
                            {"p2": seq([{0}, {1}])}, taxonomy)

    def test_format_report_is_aligned_table(self, taxonomy):
        pred = {"p1": seq([{0}, {1}, {3}])}
        report = ev.level_report(pred, dict(pred), taxonomy)
        text = ev.format_report(report)
        lines = text.splitlines()
        assert lines[0].startswith("scope")
        assert len({len(l) for l in lines if l.strip()}) <= 2
        assert "flattened" in text and "level 1" in text
