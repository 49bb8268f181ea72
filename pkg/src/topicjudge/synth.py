"""Deterministic synthetic desk-scale collections.

Each topic gets its own document universe: relevant documents mix distinctive
per-topic signal tokens into background text in proportion to a latent
affinity, non-relevant documents are background text with occasional
distractor tokens from other topics. Systems are noisy rankers with strictly
increasing noise levels, so a planted quality order exists; optional
per-system visibility masks make systems retrieve partially disjoint
documents, which is what creates unjudged documents under pooling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seeding import derive_seed, make_rng
from .trec_io import DocumentStore, Judgment, JudgmentSet, RunSet, Topic


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator parameters; relevance balance defaults to 12.5 percent."""

    n_topics: int = 8
    n_systems: int = 10
    docs_per_topic: int = 250
    relevant_fraction: float = 0.125
    doc_length: int = 60
    background_vocab: int = 400
    signal_tokens_per_topic: int = 12
    signal_density: float = 0.35
    distractor_rate: float = 0.1
    run_length: int = 100
    max_system_noise: float = 1.2
    system_visibility: float = 1.0

    def __post_init__(self) -> None:
        if self.n_topics < 2:
            raise ValueError(f"need >= 2 topics, got {self.n_topics}")
        if self.n_systems < 2:
            raise ValueError(f"need >= 2 systems, got {self.n_systems}")
        if self.docs_per_topic < 200:
            raise ValueError(f"need >= 200 docs per topic pool, got {self.docs_per_topic}")
        if not 0.0 < self.relevant_fraction < 1.0:
            raise ValueError(f"relevant_fraction must be in (0, 1), got {self.relevant_fraction}")
        if not 0.0 < self.system_visibility <= 1.0:
            raise ValueError(f"system_visibility must be in (0, 1], got {self.system_visibility}")
        if self.run_length < 10:
            raise ValueError(f"run_length must be >= 10, got {self.run_length}")
        if self.max_system_noise < 0.0:
            raise ValueError("max_system_noise must be >= 0")


@dataclass(frozen=True)
class SyntheticCollection:
    documents: DocumentStore
    topics: tuple[Topic, ...]
    judgments: JudgmentSet
    runs: RunSet
    quality_order: tuple[str, ...]
    seed: int

    def topic_by_id(self) -> dict[str, Topic]:
        return {t.topic_id: t for t in self.topics}


def _topic_signal_vocab(topic_index: int, size: int) -> list[str]:
    return [f"t{topic_index:02d}sig{j:02d}" for j in range(size)]


def generate_synthetic_collection(spec: SyntheticSpec, seed: int) -> SyntheticCollection:
    """Generate documents, topics, full judgments, and planted-quality runs.

    The same (spec, seed) pair always yields an identical collection. Noise
    levels rise strictly with the system index, so ``sys00`` is the planted
    best; with zero noise and full visibility its rankings follow the oracle
    affinity exactly.
    """
    background = [f"w{j:04d}" for j in range(spec.background_vocab)]
    relevance_threshold = 1.0 - spec.relevant_fraction
    n_relevant = max(1, round(spec.relevant_fraction * spec.docs_per_topic))

    topics: list[Topic] = []
    documents: dict[str, str] = {}
    judgments: list[Judgment] = []
    affinities: dict[str, dict[str, float]] = {}

    for topic_index in range(spec.n_topics):
        topic_id = f"t{topic_index:02d}"
        signal = _topic_signal_vocab(topic_index, spec.signal_tokens_per_topic)
        topics.append(Topic(topic_id, " ".join(signal[: min(5, len(signal))])))
        rng = make_rng(derive_seed(seed, "topic_docs", topic_id))

        relevant_flags = np.zeros(spec.docs_per_topic, dtype=bool)
        relevant_flags[rng.permutation(spec.docs_per_topic)[:n_relevant]] = True
        affinities[topic_id] = {}
        for doc_index in range(spec.docs_per_topic):
            doc_id = f"{topic_id}-d{doc_index:04d}"
            relevant = bool(relevant_flags[doc_index])
            if relevant:
                affinity = relevance_threshold + rng.uniform(0.0, 1.0) * spec.relevant_fraction
                strength = (affinity - relevance_threshold) / spec.relevant_fraction
                n_signal = round(spec.doc_length * spec.signal_density * (0.4 + 0.6 * strength))
                n_signal = min(max(3, n_signal), spec.doc_length)
                tokens = [signal[i] for i in rng.integers(0, len(signal), n_signal)]
                tokens += [
                    background[i]
                    for i in rng.integers(0, len(background), spec.doc_length - n_signal)
                ]
            else:
                affinity = rng.uniform(0.0, 1.0) * relevance_threshold
                tokens = [background[i] for i in rng.integers(0, len(background), spec.doc_length)]
                if spec.n_topics > 1 and rng.uniform() < spec.distractor_rate:
                    other = (topic_index + 1 + int(rng.integers(0, spec.n_topics - 1))) % spec.n_topics
                    other_signal = _topic_signal_vocab(other, spec.signal_tokens_per_topic)
                    for slot in rng.integers(0, len(tokens), int(rng.integers(1, 4))):
                        tokens[slot] = other_signal[int(rng.integers(0, len(other_signal)))]
            order = rng.permutation(len(tokens))
            documents[doc_id] = " ".join(tokens[i] for i in order)
            judgments.append(Judgment(topic_id, doc_id, int(relevant), source="human"))
            affinities[topic_id][doc_id] = affinity

    noise_levels = [
        spec.max_system_noise * s / (spec.n_systems - 1) for s in range(spec.n_systems)
    ]
    scores: dict[str, dict[str, list[tuple[str, float]]]] = {}
    for system_index, noise in enumerate(noise_levels):
        tag = f"sys{system_index:02d}"
        scores[tag] = {}
        for topic in topics:
            rng = make_rng(derive_seed(seed, "system_scores", tag, topic.topic_id))
            doc_ids = sorted(affinities[topic.topic_id])
            if spec.system_visibility < 1.0:
                n_visible = min(len(doc_ids), max(1, round(spec.system_visibility * len(doc_ids))))
                visible = [doc_ids[i] for i in rng.permutation(len(doc_ids))[:n_visible]]
            else:
                visible = doc_ids
            noisy = [
                (doc_id, affinities[topic.topic_id][doc_id] + noise * rng.normal())
                for doc_id in sorted(visible)
            ]
            noisy.sort(key=lambda pair: pair[0], reverse=True)
            noisy.sort(key=lambda pair: pair[1], reverse=True)
            scores[tag][topic.topic_id] = noisy[: spec.run_length]

    return SyntheticCollection(
        documents=DocumentStore(documents),
        topics=tuple(topics),
        judgments=JudgmentSet(judgments, threshold=1),
        runs=RunSet.from_scores(scores),
        quality_order=tuple(f"sys{s:02d}" for s in range(spec.n_systems)),
        seed=seed,
    )
