"""Evaluation mathematics.

Classification quality against held-out judgments, nDCG at fixed depths,
system rankings by mean nDCG, Spearman's rank correlation between system
orderings, Krippendorff's alpha for nominal agreement between two labelings,
and bootstrap aggregation over seeded simulations.

Unjudged documents in a ranking contribute zero gain, which makes the 0-fill
baseline a special case of the general pipeline. Ideal DCG is computed from
the full judged set of the topic, not the retrieved set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import UndefinedMetricError
from .trec_io import JudgmentSet, RunSet

GAIN_MODES = ("binary", "graded")
DEFAULT_NDCG_DEPTHS = (5, 10, 50)
BOOTSTRAP_REPETITIONS = 20


@dataclass(frozen=True)
class MetricSpec:
    """Which nDCG depths to evaluate and how document gain is computed."""

    ndcg_depths: tuple[int, ...] = DEFAULT_NDCG_DEPTHS
    gain: str = "binary"

    def __post_init__(self) -> None:
        if not self.ndcg_depths:
            raise ValueError("ndcg_depths must not be empty")
        if any(d < 1 for d in self.ndcg_depths):
            raise ValueError(f"ndcg depths must be >= 1, got {self.ndcg_depths}")
        if list(self.ndcg_depths) != sorted(set(self.ndcg_depths)):
            raise ValueError(f"ndcg depths must be strictly increasing, got {self.ndcg_depths}")
        if self.gain not in GAIN_MODES:
            raise ValueError(f"gain must be one of {GAIN_MODES}, got {self.gain!r}")


@dataclass(frozen=True)
class ClassificationMetrics:
    """Confusion-matrix metrics; undefined values are None with an explaining flag."""

    precision: float | None
    recall: float | None
    f1: float | None
    accuracy: float
    tp: int
    fp: int
    fn: int
    tn: int
    flags: tuple[str, ...] = ()


def classification_metrics(
    predicted: JudgmentSet, truth: JudgmentSet, topic_id: str
) -> ClassificationMetrics:
    """Precision, recall, F1, and accuracy of predicted labels against truth.

    Scores every truth key of the topic; each must be covered by a prediction.
    The positive class is "relevant" under each set's own binarization rule.
    Undefined metrics (no positive truth labels, or no positive predictions)
    are reported as None plus a flag, never as a silent zero.
    """
    tp = fp = fn = tn = 0
    scored = 0
    for judgment in truth:
        if judgment.topic_id != topic_id:
            continue
        scored += 1
        prediction = predicted.get(topic_id, judgment.doc_id)
        if prediction is None:
            raise ValueError(
                f"prediction missing for topic {topic_id!r}, doc {judgment.doc_id!r}"
            )
        actual = truth.binary_label(judgment)
        guessed = predicted.binary_label(prediction)
        if guessed and actual:
            tp += 1
        elif guessed and not actual:
            fp += 1
        elif not guessed and actual:
            fn += 1
        else:
            tn += 1
    if scored == 0:
        raise ValueError(f"no truth judgments for topic {topic_id!r}")

    flags: list[str] = []
    precision: float | None
    recall: float | None
    f1: float | None
    if tp + fp == 0:
        precision = None
        flags.append("precision_undefined_no_positive_predictions")
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = None
        flags.append("recall_undefined_no_positive_truth")
    else:
        recall = tp / (tp + fn)
    if precision is None or recall is None:
        f1 = None
        flags.append("f1_undefined")
    elif precision + recall == 0.0:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    accuracy = (tp + tn) / scored
    return ClassificationMetrics(precision, recall, f1, accuracy, tp, fp, fn, tn, tuple(flags))


def _gain(grade: int, relevant: bool, gain: str) -> float:
    if gain == "binary":
        return 1.0 if relevant else 0.0
    return float(2**grade - 1)


@dataclass(frozen=True)
class NdcgDetail:
    value: float
    dcg: float
    ideal_dcg: float
    degenerate: bool


def ndcg_at_k_detail(
    ranked_doc_ids: Sequence[str],
    judgments: JudgmentSet,
    topic_id: str,
    k: int,
    gain: str = "binary",
) -> NdcgDetail:
    """nDCG@k with the ideal computed over all judged documents of the topic.

    DCG sums gain(rel_i) / log2(i + 1) over the first min(k, len) ranked
    documents; unjudged documents contribute zero gain. A topic whose ideal
    DCG is zero yields 0 with the degenerate flag set.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if gain not in GAIN_MODES:
        raise ValueError(f"gain must be one of {GAIN_MODES}, got {gain!r}")

    dcg = 0.0
    for position, doc_id in enumerate(ranked_doc_ids[:k], start=1):
        judgment = judgments.get(topic_id, doc_id)
        if judgment is None:
            continue
        dcg += _gain(judgment.grade, judgments.binary_label(judgment) == 1, gain) / math.log2(
            position + 1
        )

    gains = sorted(
        (
            _gain(j.grade, judgments.binary_label(j) == 1, gain)
            for j in judgments
            if j.topic_id == topic_id
        ),
        reverse=True,
    )
    ideal = 0.0
    for position, g in enumerate(gains[:k], start=1):
        ideal += g / math.log2(position + 1)

    if ideal == 0.0:
        return NdcgDetail(0.0, dcg, 0.0, True)
    return NdcgDetail(dcg / ideal, dcg, ideal, False)


def ndcg_at_k(
    ranked_doc_ids: Sequence[str],
    judgments: JudgmentSet,
    topic_id: str,
    k: int,
    gain: str = "binary",
) -> float:
    return ndcg_at_k_detail(ranked_doc_ids, judgments, topic_id, k, gain).value


def system_means(
    runs: RunSet, judgments: JudgmentSet, depths: Sequence[int], gain: str = "binary"
) -> dict[int, np.ndarray]:
    """Mean nDCG per run at each depth, ordered by run_tag.

    One pass builds per-topic gain tables, so evaluating many runs and depths
    against the same judgment set stays cheap. Topics missing from a run
    contribute zero.
    """
    tags = runs.run_tags()
    if len(tags) < 2:
        raise ValueError(f"need at least 2 runs to rank, got {len(tags)}")
    topics = judgments.topic_ids()
    if not topics:
        raise ValueError("need at least 1 judged topic to rank systems")

    tables: dict[str, dict[str, float]] = {}
    for judgment in judgments:
        value = _gain(judgment.grade, judgments.binary_label(judgment) == 1, gain)
        tables.setdefault(judgment.topic_id, {})[judgment.doc_id] = value

    max_depth = max(depths)
    discounts = [1.0 / math.log2(i + 2) for i in range(max_depth)]
    means = {depth: np.zeros(len(tags)) for depth in depths}
    for topic_id in topics:
        table = tables.get(topic_id, {})
        ideal_gains = sorted(table.values(), reverse=True)[:max_depth]
        ideals = {}
        for depth in depths:
            ideals[depth] = sum(
                g * discounts[i] for i, g in enumerate(ideal_gains[:depth])
            )
        for tag_index, tag in enumerate(tags):
            gains = [table.get(d, 0.0) for d in runs.ranking(tag, topic_id)[:max_depth]]
            running = 0.0
            position = 0
            for depth in sorted(depths):
                while position < min(depth, len(gains)):
                    running += gains[position] * discounts[position]
                    position += 1
                if ideals[depth] > 0.0:
                    means[depth][tag_index] += running / ideals[depth]
    return {depth: values / len(topics) for depth, values in means.items()}


def rank_systems(
    runs: RunSet, judgments: JudgmentSet, k: int, gain: str = "binary"
) -> list[tuple[str, float]]:
    """Order runs by mean nDCG@k over the judged topic set.

    Topics missing from a run contribute zero. Ties in the mean break by
    run_tag ascending.
    """
    values = system_means(runs, judgments, [k], gain)[k]
    means = list(zip(runs.run_tags(), (float(v) for v in values)))
    means.sort(key=lambda item: item[0])
    means.sort(key=lambda item: item[1], reverse=True)
    return means


def system_score_vector(
    runs: RunSet, judgments: JudgmentSet, k: int, gain: str = "binary"
) -> np.ndarray:
    """Mean nDCG@k per run, ordered by run_tag, for correlation between rankings."""
    return system_means(runs, judgments, [k], gain)[k]


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        average = (i + j) / 2.0 + 1.0
        for index in order[i : j + 1]:
            ranks[index] = average
        i = j + 1
    return ranks


def spearman_rho(scores_a: Sequence[float], scores_b: Sequence[float]) -> float:
    """Spearman rank correlation: Pearson correlation of average-ties ranks."""
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"score vectors must be 1-d and equal length, got {a.shape} and {b.shape}")
    if len(a) < 2:
        raise ValueError(f"need at least 2 paired scores, got {len(a)}")
    for name, values in (("first", a), ("second", b)):
        if np.all(values == values[0]):
            raise UndefinedMetricError(
                f"rank correlation undefined: {name} score vector is constant"
            )
    ranks_a = _average_ranks(a)
    ranks_b = _average_ranks(b)
    da = ranks_a - ranks_a.mean()
    db = ranks_b - ranks_b.mean()
    return float(np.dot(da, db) / math.sqrt(np.dot(da, da) * np.dot(db, db)))


def krippendorff_alpha_nominal(labels_a: JudgmentSet, labels_b: JudgmentSet) -> float:
    """Krippendorff's alpha for nominal binary labels over the common units.

    alpha = 1 - D_o / D_e, where D_o is the fraction of units on which the two
    labelings disagree and D_e the probability that two values drawn without
    replacement from the pooled label multiset disagree.
    """
    common = sorted(labels_a.keys() & labels_b.keys())
    if len(common) < 2:
        raise ValueError(f"need at least 2 overlapping units, got {len(common)}")
    disagreements = 0
    pooled_ones = 0
    for topic_id, doc_id in common:
        value_a = labels_a.binary_label(labels_a.get(topic_id, doc_id))
        value_b = labels_b.binary_label(labels_b.get(topic_id, doc_id))
        disagreements += int(value_a != value_b)
        pooled_ones += value_a + value_b
    n_units = len(common)
    n_values = 2 * n_units
    pooled_zeros = n_values - pooled_ones
    if pooled_ones == 0 or pooled_zeros == 0:
        raise UndefinedMetricError(
            "agreement undefined: all pooled labels share a single value"
        )
    observed = disagreements / n_units
    expected = 2.0 * pooled_ones * pooled_zeros / (n_values * (n_values - 1))
    return 1.0 - observed / expected


@dataclass(frozen=True)
class BootstrapCorrelation:
    """Correlation aggregated over seeded simulation repetitions."""

    mean: float
    std: float
    per_seed: tuple[tuple[int, float | None], ...]
    n_undefined: int


def default_bootstrap_seeds(base_seed: int = 0, n: int = BOOTSTRAP_REPETITIONS) -> list[int]:
    return [base_seed + i for i in range(n)]


def bootstrap_correlation(
    simulate: Callable[[int], tuple[Sequence[float], Sequence[float]]],
    seeds: Sequence[int],
) -> BootstrapCorrelation:
    """Run the simulation once per seed and aggregate the per-seed correlations.

    Seeds whose correlation is undefined are recorded and excluded from the
    mean; if every seed is undefined the aggregate itself is an error.
    Dispersion is the population standard deviation, so a single seed yields
    std 0.
    """
    if not seeds:
        raise ValueError("need at least one seed")
    per_seed: list[tuple[int, float | None]] = []
    defined: list[float] = []
    for seed in seeds:
        predicted, truth = simulate(seed)
        try:
            rho = spearman_rho(predicted, truth)
        except UndefinedMetricError:
            per_seed.append((seed, None))
            continue
        per_seed.append((seed, rho))
        defined.append(rho)
    if not defined:
        raise UndefinedMetricError("correlation undefined for every seed")
    values = np.asarray(defined, dtype=float)
    return BootstrapCorrelation(
        mean=float(values.mean()),
        std=float(values.std()),
        per_seed=tuple(per_seed),
        n_undefined=len(per_seed) - len(defined),
    )
