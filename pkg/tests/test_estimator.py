from __future__ import annotations

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import make_marker_topic
from topicjudge.errors import SingleClassError
from topicjudge.estimator import TopicJudgeClassifier, check_binary_labels, check_document_texts
from topicjudge.lora import LowRankAdapter
from topicjudge.scorer import ReferenceScorer


def marker_texts(n_docs: int = 90, seed: int = 2):
    topic, docs, judgments = make_marker_topic(n_docs=n_docs, seed=seed)
    texts = [docs.require(j.doc_id) for j in judgments]
    labels = np.array([judgments.binary_label(j) for j in judgments])
    return topic, texts, labels


class TestValidation:
    def test_single_string_rejected(self):
        with pytest.raises(ValueError, match="sequence"):
            check_document_texts("just one doc")

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            check_document_texts([])

    def test_non_string_entry(self):
        with pytest.raises(ValueError, match="X\\[1\\]"):
            check_document_texts(["ok", 17])

    def test_labels_length_checked(self):
        with pytest.raises(ValueError):
            check_binary_labels([0, 1], 3)

    def test_labels_values_checked(self):
        with pytest.raises(ValueError):
            check_binary_labels([0, 2, 1], 3)


class TestTopicJudgeClassifier:
    def _estimator(self, topic, **overrides):
        params = dict(
            scorer=ReferenceScorer(feature_dim=64, hidden_dim=16),
            topic_id=topic.topic_id,
            query_text=topic.query_text,
            epochs=20,
            batch_size=16,
            learning_rate=0.01,
            lora_rank=8,
            lora_alpha=16.0,
            seed=5,
        )
        params.update(overrides)
        return TopicJudgeClassifier(**params)

    def test_fit_predict_separable(self):
        topic, texts, labels = marker_texts()
        estimator = self._estimator(topic).fit(texts, labels)
        assert estimator.score(texts, labels) >= 0.95

    def test_predict_proba_shape_and_sum(self):
        topic, texts, labels = marker_texts()
        estimator = self._estimator(topic).fit(texts, labels)
        proba = estimator.predict_proba(texts[:5])
        assert proba.shape == (5, 2)
        assert np.allclose(proba.sum(axis=1), 1.0)

    def test_predict_thresholds_at_half(self):
        topic, texts, labels = marker_texts()
        estimator = self._estimator(topic).fit(texts, labels)
        scores = estimator.decision_function(texts[:10])
        assert np.array_equal(estimator.predict(texts[:10]), (scores >= 0.5).astype(int))

    def test_not_fitted_error(self):
        topic, texts, _ = marker_texts()
        with pytest.raises(NotFittedError):
            self._estimator(topic).predict(texts[:2])

    def test_get_params_round_trip(self):
        topic, _, _ = marker_texts()
        estimator = self._estimator(topic)
        params = estimator.get_params()
        assert params["epochs"] == 20
        assert params["topic_id"] == topic.topic_id
        estimator.set_params(epochs=7)
        assert estimator.epochs == 7

    def test_sklearn_clone(self):
        topic, texts, labels = marker_texts()
        estimator = self._estimator(topic)
        cloned = clone(estimator)
        assert cloned.get_params()["seed"] == 5
        cloned.fit(texts, labels)
        assert hasattr(cloned, "judge_")
        assert not hasattr(estimator, "judge_")

    def test_single_class_raises(self):
        topic, texts, labels = marker_texts()
        with pytest.raises(SingleClassError):
            self._estimator(topic).fit(texts, np.zeros(len(texts), dtype=int))

    def test_deterministic_in_seed(self):
        topic, texts, labels = marker_texts()
        first = self._estimator(topic).fit(texts, labels)
        second = self._estimator(topic).fit(texts, labels)
        assert np.array_equal(
            first.decision_function(texts[:8]), second.decision_function(texts[:8])
        )

    def test_fitted_judge_is_adapter(self):
        topic, texts, labels = marker_texts()
        estimator = self._estimator(topic).fit(texts, labels)
        assert isinstance(estimator.judge_, LowRankAdapter)
        assert estimator.judge_.topic_id == topic.topic_id

    def test_default_scorer_constructed(self):
        topic, texts, labels = marker_texts(n_docs=40)
        estimator = TopicJudgeClassifier(
            topic_id=topic.topic_id, query_text=topic.query_text, epochs=2, seed=1
        ).fit(texts, labels)
        assert isinstance(estimator.scorer_, ReferenceScorer)
        assert estimator.classes_.tolist() == [0, 1]

    def test_native_mode(self):
        topic, texts, labels = marker_texts(n_docs=60)
        estimator = self._estimator(topic, mode="native_finetune", epochs=10).fit(texts, labels)
        from topicjudge.training import NativeWeights

        assert isinstance(estimator.judge_, NativeWeights)
        assert estimator.score(texts, labels) >= 0.9
