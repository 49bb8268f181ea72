"""Topic selection, stratified splitting, shallow sampling, and pool simulation.

The data machinery for judge training and reduced-pool experiments: pick
topics with enough relevant judgments, split one topic's judgments per label,
draw small class-balanced training samples, and simulate shallow pools by
subsampling contributing runs.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

from .errors import InsufficientPoolError, StratificationError
from .seeding import derive_seed, make_rng
from .trec_io import JudgmentSet, RunSet

logger = logging.getLogger(__name__)

# Empirical average share of relevant documents in shallow training samples;
# a target clamped by availability, not a hard constraint.
SHALLOW_RELEVANT_SHARE = 0.125


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


@dataclass(frozen=True)
class SplitSpec:
    """Parameters for a train/test split of one topic's judgments."""

    train_fraction: float = 0.8
    seed: int = 0
    stratify_by_label: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")


@dataclass(frozen=True)
class ShallowSampleSpec:
    """Parameters for drawing a small class-balanced training sample."""

    k: int
    seed: int = 0
    relevant_share: float = SHALLOW_RELEVANT_SHARE

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError(f"sample size k must be >= 2, got {self.k}")
        if not 0.0 < self.relevant_share < 1.0:
            raise ValueError(f"relevant_share must be in (0, 1), got {self.relevant_share}")


@dataclass(frozen=True)
class PoolSimulation:
    """A simulated shallow pool: chosen runs and their pooled documents."""

    chosen_runs: tuple[str, ...]
    subsampling_rate: float
    pool_depth: int
    seed: int
    pooled_docs: dict[str, frozenset[str]]

    def pool_sizes(self) -> dict[str, int]:
        return {topic: len(docs) for topic, docs in sorted(self.pooled_docs.items())}

    def to_manifest(self) -> str:
        """Serialize for audit and replay: seed, rate, chosen runs, pool sizes."""
        payload = {
            "seed": self.seed,
            "subsampling_rate": self.subsampling_rate,
            "pool_depth": self.pool_depth,
            "chosen_runs": list(self.chosen_runs),
            "pool_sizes": self.pool_sizes(),
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def select_topics(judgments: JudgmentSet, min_relevant: int) -> list[str]:
    """Topics with at least ``min_relevant`` binary-relevant judgments, sorted."""
    if min_relevant < 1:
        raise ValueError(f"min_relevant must be >= 1, got {min_relevant}")
    return [
        topic_id
        for topic_id in judgments.topic_ids()
        if judgments.relevant_count(topic_id) >= min_relevant
    ]


def _single_topic(judgments: JudgmentSet) -> str:
    topics = judgments.topic_ids()
    if len(topics) != 1:
        raise ValueError(f"expected judgments for exactly one topic, got {list(topics)}")
    return topics[0]


def _class_doc_ids(judgments: JudgmentSet, topic_id: str) -> tuple[list[str], list[str]]:
    relevant: list[str] = []
    nonrelevant: list[str] = []
    for judgment in judgments:
        if judgments.binary_label(judgment):
            relevant.append(judgment.doc_id)
        else:
            nonrelevant.append(judgment.doc_id)
    return sorted(relevant), sorted(nonrelevant)


def stratified_split(topic_judgments: JudgmentSet, spec: SplitSpec) -> tuple[JudgmentSet, JudgmentSet]:
    """Split one topic's judgments into train and test sets.

    With stratification, each label class is split at the train fraction so
    both sides keep a similar relevance distribution; per-class counts deviate
    from exact proportionality by at most one document. The split is a
    disjoint, exhaustive partition and deterministic in the seed.
    """
    topic_id = _single_topic(topic_judgments)
    relevant, nonrelevant = _class_doc_ids(topic_judgments, topic_id)
    rng = make_rng(derive_seed(spec.seed, "stratified_split", topic_id))

    if not spec.stratify_by_label:
        docs = sorted(relevant + nonrelevant)
        n_train = _round_half_up(spec.train_fraction * len(docs))
        order = rng.permutation(len(docs))
        train_ids = {docs[i] for i in order[:n_train]}
    else:
        for name, docs in (("relevant", relevant), ("non-relevant", nonrelevant)):
            if not docs:
                raise StratificationError(
                    f"topic {topic_id!r}: class {name!r} is empty, cannot stratify"
                )
        n_total = len(relevant) + len(nonrelevant)
        target_total = _round_half_up(spec.train_fraction * n_total)
        n_nonrel = min(
            max(_round_half_up(spec.train_fraction * len(nonrelevant)), 0), len(nonrelevant)
        )
        n_rel = min(max(target_total - n_nonrel, 0), len(relevant))
        train_ids = set()
        for docs, count in ((nonrelevant, n_nonrel), (relevant, n_rel)):
            order = rng.permutation(len(docs))
            train_ids.update(docs[i] for i in order[:count])

    train = topic_judgments.restrict((topic_id, d) for d in train_ids)
    test_ids = set(topic_judgments.doc_ids(topic_id)) - train_ids
    test = topic_judgments.restrict((topic_id, d) for d in test_ids)
    return train, test


def sample_shallow_train(topic_judgments: JudgmentSet, spec: ShallowSampleSpec) -> JudgmentSet:
    """Draw exactly ``k`` judged documents targeting the configured relevant share.

    The relevant count is the share target rounded, clamped by availability
    and to at least one document per class. Raises InsufficientPoolError when
    the topic has fewer than ``k`` judged documents or one class is missing,
    so callers may skip the topic.
    """
    topic_id = _single_topic(topic_judgments)
    relevant, nonrelevant = _class_doc_ids(topic_judgments, topic_id)
    total = len(relevant) + len(nonrelevant)
    if total < spec.k:
        raise InsufficientPoolError(
            f"topic {topic_id!r}: {total} judged documents available, need k={spec.k}"
        )
    if not relevant or not nonrelevant:
        missing = "relevant" if not relevant else "non-relevant"
        raise InsufficientPoolError(
            f"topic {topic_id!r}: no {missing} documents available for sampling"
        )

    n_rel = max(1, min(_round_half_up(spec.relevant_share * spec.k), len(relevant), spec.k - 1))
    n_nonrel = spec.k - n_rel
    if n_nonrel > len(nonrelevant):
        # Not enough non-relevant documents; top up with relevant ones.
        n_nonrel = len(nonrelevant)
        n_rel = spec.k - n_nonrel

    rng = make_rng(derive_seed(spec.seed, "shallow_sample", topic_id, spec.k))
    chosen: set[str] = set()
    for docs, count in ((relevant, n_rel), (nonrelevant, n_nonrel)):
        order = rng.permutation(len(docs))
        chosen.update(docs[i] for i in order[:count])
    return topic_judgments.restrict((topic_id, d) for d in chosen)


def build_pool(runs: RunSet, depth: int, run_tags: tuple[str, ...] | None = None) -> dict[str, frozenset[str]]:
    """Per-topic union of each chosen run's top-``depth`` documents."""
    if depth < 1:
        raise ValueError(f"pool depth must be >= 1, got {depth}")
    tags = runs.run_tags() if run_tags is None else tuple(run_tags)
    pooled: dict[str, set[str]] = {}
    for topic_id in runs.topic_ids():
        docs: set[str] = set()
        for tag in tags:
            docs.update(runs.top_docs(tag, topic_id, depth))
        if docs:
            pooled[topic_id] = docs
    return {topic: frozenset(docs) for topic, docs in pooled.items()}


def subsample_runs(runs: RunSet, rate: float, seed: int, depth: int = 100) -> PoolSimulation:
    """Choose a uniformly random subset of runs and pool their top documents.

    The subset has size max(1, round(rate * total runs)) and the result is
    deterministic in the seed.
    """
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"subsampling rate must be in (0, 1], got {rate}")
    tags = runs.run_tags()
    if not tags:
        raise ValueError("cannot subsample an empty RunSet")
    n_chosen = max(1, _round_half_up(rate * len(tags)))
    rng = make_rng(derive_seed(seed, "subsample_runs", rate))
    indices = rng.permutation(len(tags))[:n_chosen]
    chosen = tuple(sorted(tags[i] for i in indices))
    pooled = build_pool(runs, depth, chosen)
    return PoolSimulation(
        chosen_runs=chosen,
        subsampling_rate=rate,
        pool_depth=depth,
        seed=seed,
        pooled_docs=pooled,
    )
