from __future__ import annotations

import math

import numpy as np
import pytest

from oracles import bf_confusion, bf_krippendorff_alpha, bf_ndcg, bf_spearman
from topicjudge.errors import UndefinedMetricError
from topicjudge.metrics import (
    MetricSpec,
    bootstrap_correlation,
    classification_metrics,
    default_bootstrap_seeds,
    krippendorff_alpha_nominal,
    ndcg_at_k,
    ndcg_at_k_detail,
    rank_systems,
    spearman_rho,
)
from topicjudge.seeding import make_rng
from topicjudge.trec_io import Judgment, JudgmentSet, RunSet


def labels_to_set(labels: dict[str, int], topic_id: str = "t", source: str = "human") -> JudgmentSet:
    return JudgmentSet(
        [Judgment(topic_id, doc, grade, source if source == "human" else source) for doc, grade in labels.items()]
    )


class TestClassificationMetrics:
    def test_perfect_prediction(self):
        truth = labels_to_set({"d1": 1, "d2": 0, "d3": 1})
        metrics = classification_metrics(truth, truth, "t")
        assert metrics.precision == metrics.recall == metrics.f1 == metrics.accuracy == 1.0

    def test_hand_computed_confusion(self):
        truth = labels_to_set(
            {f"p{i}": 1 for i in range(8)}
            | {f"q{i}": 0 for i in range(2)}
            | {f"n{i}": 0 for i in range(90)}
        )
        predicted = labels_to_set(
            {f"p{i}": 1 for i in range(8)}
            | {f"q{i}": 1 for i in range(2)}
            | {f"n{i}": 0 for i in range(90)}
        )
        metrics = classification_metrics(predicted, truth, "t")
        assert metrics.tp == 8 and metrics.fp == 2 and metrics.fn == 0 and metrics.tn == 90
        assert metrics.precision == pytest.approx(0.8)
        assert metrics.recall == pytest.approx(1.0)
        assert metrics.f1 == pytest.approx(8 / 9)
        assert metrics.accuracy == pytest.approx(0.98)

    def test_all_nonrelevant_predictor(self):
        truth = labels_to_set({"d1": 1, "d2": 0})
        predicted = labels_to_set({"d1": 0, "d2": 0})
        metrics = classification_metrics(predicted, truth, "t")
        assert metrics.recall == 0.0
        assert metrics.precision is None
        assert "precision_undefined_no_positive_predictions" in metrics.flags

    def test_no_positive_truth_flags_recall(self):
        truth = labels_to_set({"d1": 0, "d2": 0})
        predicted = labels_to_set({"d1": 0, "d2": 1})
        metrics = classification_metrics(predicted, truth, "t")
        assert metrics.recall is None
        assert "recall_undefined_no_positive_truth" in metrics.flags

    def test_missing_prediction_rejected(self):
        truth = labels_to_set({"d1": 1})
        with pytest.raises(ValueError, match="missing"):
            classification_metrics(JudgmentSet(), truth, "t")

    def test_f1_zero_iff_tp_zero(self):
        truth = labels_to_set({"d1": 1, "d2": 0, "d3": 0})
        predicted = labels_to_set({"d1": 0, "d2": 1, "d3": 0})
        metrics = classification_metrics(predicted, truth, "t")
        assert metrics.tp == 0
        assert metrics.f1 == 0.0


class TestNdcg:
    def test_ideal_ranking_is_one(self):
        judgments = labels_to_set({"d1": 1, "d2": 1, "d3": 0, "d4": 0})
        assert ndcg_at_k(["d1", "d2", "d3"], judgments, "t", 3) == pytest.approx(1.0)

    def test_hand_computed_example(self):
        # ranking rels (1, 0, 1) with exactly two relevant judged documents:
        # DCG = 1 + 0 + 1/log2(4) = 1.5, IDCG = 1 + 1/log2(3)
        judgments = labels_to_set({"d1": 1, "d2": 0, "d3": 1})
        value = ndcg_at_k(["d1", "d2", "d3"], judgments, "t", 3)
        expected = 1.5 / (1.0 + 1.0 / math.log2(3))
        assert value == pytest.approx(expected, abs=1e-12)
        assert value == pytest.approx(0.9197, abs=5e-4)

    def test_unretrieved_relevant_lowers_ideal(self):
        judgments = labels_to_set({"d1": 1, "d2": 0, "d3": 1, "d4": 1})
        value = ndcg_at_k(["d1", "d2", "d3"], judgments, "t", 3)
        expected = 1.5 / (1.0 + 1.0 / math.log2(3) + 0.5)
        assert value == pytest.approx(expected, abs=1e-12)

    def test_zero_relevant_topic_degenerate(self):
        judgments = labels_to_set({"d1": 0, "d2": 0})
        detail = ndcg_at_k_detail(["d1", "d2"], judgments, "t", 2)
        assert detail.value == 0.0
        assert detail.degenerate

    def test_unjudged_documents_contribute_zero(self):
        judgments = labels_to_set({"d1": 1})
        with_unjudged = ndcg_at_k(["x1", "d1"], judgments, "t", 2)
        assert with_unjudged == pytest.approx((1 / math.log2(3)) / 1.0)

    def test_appending_below_k_never_changes_value(self):
        rng = make_rng(2)
        judgments = labels_to_set({f"d{i}": int(rng.uniform() < 0.4) for i in range(20)})
        ranking = [f"d{i}" for i in rng.permutation(20)]
        k = 5
        base = ndcg_at_k(ranking[:k], judgments, "t", k)
        assert ndcg_at_k(ranking, judgments, "t", k) == pytest.approx(base, abs=1e-15)

    def test_one_iff_top_positions_relevant(self):
        rng = make_rng(3)
        for _ in range(50):
            n = int(rng.integers(2, 10))
            grades = {f"d{i}": int(rng.uniform() < 0.5) for i in range(n)}
            judgments = labels_to_set(grades)
            ranking = [f"d{i}" for i in rng.permutation(n)]
            k = int(rng.integers(1, n + 1))
            n_relevant = sum(grades.values())
            value = ndcg_at_k(ranking, judgments, "t", k)
            top = ranking[: min(k, n_relevant)]
            ideal_top = n_relevant > 0 and all(grades[d] == 1 for d in top)
            if n_relevant == 0:
                assert value == 0.0
            elif ideal_top:
                assert value == pytest.approx(1.0)
            else:
                assert value < 1.0

    def test_graded_gain(self):
        judgments = labels_to_set({"d1": 3, "d2": 1})
        value = ndcg_at_k(["d2", "d1"], judgments, "t", 2, gain="graded")
        expected = (1.0 + 7.0 / math.log2(3)) / (7.0 + 1.0 / math.log2(3))
        assert value == pytest.approx(expected)


class TestRankSystems:
    def test_dominant_run_first(self):
        judgments = labels_to_set({"d1": 1, "d2": 0})
        runs = RunSet.from_scores(
            {"good": {"t": [("d1", 2.0), ("d2", 1.0)]}, "bad": {"t": [("d2", 2.0), ("d1", 1.0)]}}
        )
        ranking = rank_systems(runs, judgments, k=2)
        assert ranking[0][0] == "good"
        assert ranking[0][1] > ranking[1][1]

    def test_tie_breaks_lexicographically(self):
        judgments = labels_to_set({"d1": 1})
        scores = {"t": [("d1", 1.0)]}
        runs = RunSet.from_scores({"zeta": scores, "alpha": scores})
        assert [tag for tag, _ in rank_systems(runs, judgments, 1)] == ["alpha", "zeta"]

    def test_planted_quality_recovered(self):
        rng = make_rng(17)
        n_docs = 40
        grades = {f"d{i:02d}": int(i < 10) for i in range(n_docs)}
        judgments = labels_to_set(grades)
        affinity = {doc: 1.0 - i / n_docs for i, doc in enumerate(sorted(grades, key=lambda d: -grades[d]))}
        runs = {}
        for tag, noise in (("s_best", 0.0), ("s_mid", 0.3), ("s_worst", 3.0)):
            runs[tag] = {
                "t": [(doc, affinity[doc] + noise * float(rng.normal())) for doc in grades]
            }
        ranking = [tag for tag, _ in rank_systems(RunSet.from_scores(runs), judgments, k=10)]
        assert ranking == ["s_best", "s_mid", "s_worst"]

    def test_mean_matches_per_topic_ndcg(self):
        rng = make_rng(23)
        judgments = JudgmentSet(
            [
                Judgment(topic, f"d{i}", int(rng.uniform() < 0.3))
                for topic in ("t1", "t2", "t3")
                for i in range(12)
            ]
        )
        runs = RunSet.from_scores(
            {
                tag: {
                    topic: [(f"d{i}", float(s)) for i, s in enumerate(rng.uniform(0, 1, 12))]
                    for topic in ("t1", "t2")
                }
                for tag in ("a", "b")
            }
        )
        for tag, mean in rank_systems(runs, judgments, k=5):
            direct = np.mean(
                [
                    ndcg_at_k(runs.ranking(tag, topic), judgments, topic, 5)
                    for topic in ("t1", "t2", "t3")
                ]
            )
            assert mean == pytest.approx(float(direct), abs=1e-12)

    def test_binary_gain_invariant_to_grade_transform(self):
        rng = make_rng(29)
        base = {f"d{i}": int(rng.integers(0, 2)) for i in range(15)}
        transformed = {doc: grade * 3 for doc, grade in base.items()}
        runs = RunSet.from_scores(
            {
                tag: {"t": [(f"d{i}", float(s)) for i, s in enumerate(rng.uniform(0, 1, 15))]}
                for tag in ("a", "b", "c")
            }
        )
        first = rank_systems(runs, labels_to_set(base), 5)
        second = rank_systems(runs, labels_to_set(transformed), 5)
        assert first == second


class TestSpearman:
    def test_identical_orderings_exactly_one(self):
        values = [0.3, 0.1, 0.9, 0.4, 0.4]
        assert spearman_rho(values, list(values)) == 1.0

    def test_reversed_is_minus_one(self):
        a = [1.0, 2.0, 3.0, 4.0]
        assert spearman_rho(a, a[::-1]) == pytest.approx(-1.0)

    def test_hand_computed_example(self):
        assert spearman_rho([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)

    def test_constant_vector_rejected(self):
        with pytest.raises(UndefinedMetricError):
            spearman_rho([1, 1, 1], [1, 2, 3])
        with pytest.raises(UndefinedMetricError):
            spearman_rho([1, 2, 3], [2, 2, 2])

    def test_symmetry_and_bounds(self):
        rng = make_rng(31)
        for _ in range(50):
            n = int(rng.integers(2, 9))
            a = rng.integers(0, 4, n).astype(float)
            b = rng.integers(0, 4, n).astype(float)
            if np.all(a == a[0]) or np.all(b == b[0]):
                continue
            rho = spearman_rho(a, b)
            assert -1.0 - 1e-12 <= rho <= 1.0 + 1e-12
            assert rho == pytest.approx(spearman_rho(b, a), abs=1e-15)

    def test_invariant_under_monotone_transform(self):
        rng = make_rng(37)
        a = rng.uniform(0, 1, 8)
        b = rng.uniform(0, 1, 8)
        base = spearman_rho(a, b)
        assert spearman_rho(np.exp(3 * a), b) == pytest.approx(base, abs=1e-12)
        assert spearman_rho(a, 5 * b + 2) == pytest.approx(base, abs=1e-12)

    def test_matches_bruteforce_with_ties(self):
        rng = make_rng(41)
        for _ in range(200):
            n = int(rng.integers(2, 9))
            a = rng.integers(0, 5, n).astype(float)
            b = rng.integers(0, 5, n).astype(float)
            if np.all(a == a[0]) or np.all(b == b[0]):
                continue
            assert spearman_rho(a, b) == pytest.approx(bf_spearman(a, b), abs=1e-9)


class TestKrippendorff:
    def test_identical_labelings(self):
        a = labels_to_set({"d1": 1, "d2": 0, "d3": 1})
        assert krippendorff_alpha_nominal(a, a) == pytest.approx(1.0)

    def test_hand_computed_example(self):
        a = labels_to_set({"d1": 1, "d2": 1, "d3": 0, "d4": 0})
        b = labels_to_set({"d1": 1, "d2": 0, "d3": 0, "d4": 0})
        alpha = krippendorff_alpha_nominal(a, b)
        assert alpha == pytest.approx(1 - 0.25 / (30 / 56), abs=1e-9)
        assert alpha == pytest.approx(0.5333, abs=1e-4)

    def test_all_values_identical_undefined(self):
        a = labels_to_set({"d1": 1, "d2": 1})
        with pytest.raises(UndefinedMetricError):
            krippendorff_alpha_nominal(a, a)

    def test_too_few_units(self):
        a = labels_to_set({"d1": 1})
        with pytest.raises(ValueError):
            krippendorff_alpha_nominal(a, a)

    def test_symmetric_and_relabel_invariant(self):
        rng = make_rng(43)
        labels_a = {f"d{i}": int(rng.uniform() < 0.5) for i in range(30)}
        labels_b = {f"d{i}": int(rng.uniform() < 0.5) for i in range(30)}
        a, b = labels_to_set(labels_a), labels_to_set(labels_b)
        alpha = krippendorff_alpha_nominal(a, b)
        assert krippendorff_alpha_nominal(b, a) == pytest.approx(alpha, abs=1e-15)
        flipped_a = labels_to_set({d: 1 - v for d, v in labels_a.items()})
        flipped_b = labels_to_set({d: 1 - v for d, v in labels_b.items()})
        assert krippendorff_alpha_nominal(flipped_a, flipped_b) == pytest.approx(alpha, abs=1e-12)

    def test_restricted_to_common_units(self):
        a = labels_to_set({"d1": 1, "d2": 0, "only_a": 1})
        b = labels_to_set({"d1": 1, "d2": 1, "only_b": 0})
        alpha = krippendorff_alpha_nominal(a, b)
        assert alpha == pytest.approx(bf_krippendorff_alpha([(1, 1), (0, 1)]), abs=1e-12)

    def test_chance_level_near_zero(self):
        rng = make_rng(47)
        labels_a = {f"d{i}": int(rng.uniform() < 0.5) for i in range(4000)}
        labels_b = {f"d{i}": int(rng.uniform() < 0.5) for i in range(4000)}
        alpha = krippendorff_alpha_nominal(labels_to_set(labels_a), labels_to_set(labels_b))
        assert abs(alpha) < 0.05

    def test_matches_bruteforce(self):
        rng = make_rng(53)
        for _ in range(200):
            n = int(rng.integers(2, 9))
            pairs = [(int(rng.integers(0, 2)), int(rng.integers(0, 2))) for _ in range(n)]
            pooled = [v for pair in pairs for v in pair]
            if len(set(pooled)) < 2:
                continue
            a = labels_to_set({f"d{i}": pair[0] for i, pair in enumerate(pairs)})
            b = labels_to_set({f"d{i}": pair[1] for i, pair in enumerate(pairs)})
            assert krippendorff_alpha_nominal(a, b) == pytest.approx(
                bf_krippendorff_alpha(pairs), abs=1e-9
            )


class TestBootstrap:
    def test_perfect_judge_fixed_point(self):
        def simulate(seed):
            return [1.0, 2.0, 3.0], [1.0, 2.0, 3.0]

        result = bootstrap_correlation(simulate, default_bootstrap_seeds())
        assert result.mean == 1.0
        assert result.std == 0.0
        assert len(result.per_seed) == 20

    def test_default_seed_list_has_twenty(self):
        assert len(default_bootstrap_seeds()) == 20

    def test_single_seed(self):
        result = bootstrap_correlation(lambda s: ([1, 2, 3], [3, 2, 1]), [7])
        assert result.mean == pytest.approx(-1.0)
        assert result.std == 0.0

    def test_undefined_seeds_recorded_and_excluded(self):
        def simulate(seed):
            if seed == 0:
                return [1.0, 1.0, 1.0], [1.0, 2.0, 3.0]
            return [1.0, 2.0, 3.0], [1.0, 2.0, 3.0]

        result = bootstrap_correlation(simulate, [0, 1, 2])
        assert result.n_undefined == 1
        assert result.mean == pytest.approx(1.0)
        assert result.per_seed[0] == (0, None)

    def test_all_undefined_is_error(self):
        with pytest.raises(UndefinedMetricError):
            bootstrap_correlation(lambda s: ([1, 1], [1, 2]), [0, 1])

    def test_empty_seed_list_rejected(self):
        with pytest.raises(ValueError):
            bootstrap_correlation(lambda s: ([1, 2], [1, 2]), [])


class TestMetricSpec:
    def test_defaults(self):
        spec = MetricSpec()
        assert spec.ndcg_depths == (5, 10, 50)
        assert spec.gain == "binary"

    def test_depths_must_increase(self):
        with pytest.raises(ValueError):
            MetricSpec(ndcg_depths=(10, 5))

    def test_depths_positive(self):
        with pytest.raises(ValueError):
            MetricSpec(ndcg_depths=(0, 5))

    def test_gain_validated(self):
        with pytest.raises(ValueError):
            MetricSpec(gain="exponential")


class TestBruteForceRandomInstances:
    def test_ndcg_matches_direct_summation(self):
        rng = make_rng(59)
        for _ in range(300):
            n = int(rng.integers(1, 9))
            grades = {f"d{i}": int(rng.integers(0, 2)) for i in range(n)}
            judgments = labels_to_set(grades)
            ranking = [f"d{i}" for i in rng.permutation(n)]
            k = int(rng.integers(1, 9))
            mine = ndcg_at_k(ranking, judgments, "t", k)
            reference = bf_ndcg(
                [grades[d] for d in ranking], list(grades.values()), k
            )
            assert mine == pytest.approx(reference, abs=1e-9)

    def test_classification_matches_counting(self):
        rng = make_rng(61)
        for _ in range(300):
            n = int(rng.integers(1, 9))
            truth_labels = [int(rng.integers(0, 2)) for _ in range(n)]
            predicted_labels = [int(rng.integers(0, 2)) for _ in range(n)]
            truth = labels_to_set({f"d{i}": v for i, v in enumerate(truth_labels)})
            predicted = labels_to_set({f"d{i}": v for i, v in enumerate(predicted_labels)})
            metrics = classification_metrics(predicted, truth, "t")
            precision, recall, f1, accuracy = bf_confusion(predicted_labels, truth_labels)
            for mine, reference in (
                (metrics.precision, precision),
                (metrics.recall, recall),
                (metrics.f1, f1),
                (metrics.accuracy, accuracy),
            ):
                if reference is None:
                    assert mine is None
                else:
                    assert mine == pytest.approx(reference, abs=1e-9)
