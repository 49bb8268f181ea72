from __future__ import annotations

import pytest

from topicjudge.metrics import ndcg_at_k, rank_systems
from topicjudge.synth import SyntheticSpec, generate_synthetic_collection
from topicjudge.trec_io import write_qrels, write_run


SMALL = SyntheticSpec(
    n_topics=3,
    n_systems=4,
    docs_per_topic=200,
    relevant_fraction=0.125,
    doc_length=40,
    run_length=60,
)


class TestSpecValidation:
    def test_bounds(self):
        with pytest.raises(ValueError):
            SyntheticSpec(n_topics=1)
        with pytest.raises(ValueError):
            SyntheticSpec(n_systems=1)
        with pytest.raises(ValueError):
            SyntheticSpec(docs_per_topic=150)
        with pytest.raises(ValueError):
            SyntheticSpec(relevant_fraction=1.5)
        with pytest.raises(ValueError):
            SyntheticSpec(system_visibility=0.0)


class TestGeneration:
    def test_same_seed_identical_collection(self):
        first = generate_synthetic_collection(SMALL, seed=7)
        second = generate_synthetic_collection(SMALL, seed=7)
        assert write_qrels(first.judgments) == write_qrels(second.judgments)
        assert write_run(first.runs) == write_run(second.runs)
        assert first.documents.to_jsonl() == second.documents.to_jsonl()

    def test_different_seed_differs(self):
        first = generate_synthetic_collection(SMALL, seed=7)
        second = generate_synthetic_collection(SMALL, seed=8)
        assert first.documents.to_jsonl() != second.documents.to_jsonl()

    def test_exact_relevance_balance(self):
        collection = generate_synthetic_collection(SMALL, seed=3)
        for topic in collection.topics:
            relevant, nonrelevant = collection.judgments.counts(topic.topic_id)
            assert relevant == round(0.125 * SMALL.docs_per_topic)
            assert relevant + nonrelevant == SMALL.docs_per_topic

    def test_every_doc_judged_and_resolvable(self):
        collection = generate_synthetic_collection(SMALL, seed=3)
        assert len(collection.judgments) == SMALL.n_topics * SMALL.docs_per_topic
        for judgment in collection.judgments:
            assert collection.documents.require(judgment.doc_id)

    def test_planted_quality_order_strictly_monotone(self):
        collection = generate_synthetic_collection(SMALL, seed=3)
        assert collection.quality_order == ("sys00", "sys01", "sys02", "sys03")

    def test_noiseless_system_has_perfect_ndcg(self):
        collection = generate_synthetic_collection(SMALL, seed=5)
        for topic in collection.topics:
            ranking = collection.runs.ranking("sys00", topic.topic_id)
            assert ndcg_at_k(ranking, collection.judgments, topic.topic_id, 10) == pytest.approx(1.0)

    def test_noise_separated_systems_ranked_correctly(self):
        spec = SyntheticSpec(
            n_topics=4,
            n_systems=2,
            docs_per_topic=200,
            run_length=60,
            max_system_noise=2.0,
        )
        collection = generate_synthetic_collection(spec, seed=11)
        ranking = [tag for tag, _ in rank_systems(collection.runs, collection.judgments, 10)]
        assert ranking == ["sys00", "sys01"]

    def test_visibility_limits_run_coverage(self):
        spec = SyntheticSpec(
            n_topics=2,
            n_systems=4,
            docs_per_topic=200,
            run_length=200,
            system_visibility=0.5,
        )
        collection = generate_synthetic_collection(spec, seed=2)
        for topic in collection.topics:
            ranking = collection.runs.ranking("sys00", topic.topic_id)
            assert len(ranking) == 100

    def test_run_length_respected(self):
        collection = generate_synthetic_collection(SMALL, seed=9)
        for tag in collection.runs.run_tags():
            for topic in collection.topics:
                assert len(collection.runs.ranking(tag, topic.topic_id)) == SMALL.run_length

    def test_relevant_docs_carry_signal_tokens(self):
        collection = generate_synthetic_collection(SMALL, seed=13)
        topic = collection.topics[0]
        signal_prefix = f"{topic.topic_id}sig"
        for judgment in collection.judgments.for_topic(topic.topic_id):
            text = collection.documents.require(judgment.doc_id)
            has_signal = any(token.startswith(signal_prefix) for token in text.split())
            if collection.judgments.binary_label(judgment):
                assert has_signal
            else:
                assert not has_signal
