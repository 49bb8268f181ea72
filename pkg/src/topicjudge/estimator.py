"""Scikit-learn style estimator wrapper around per-topic judge training.

``TopicJudgeClassifier`` exposes the fit/predict/predict_proba surface and
``get_params`` so a topic judge composes with the wider ecosystem (clone,
pipelines, model selection). X is a sequence of document texts; y holds the
binary relevance labels of one assessor for one topic.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .scorer import ReferenceScorer
from .training import PREDICTION_THRESHOLD, TrainConfig, train_topic_judge
from .trec_io import DocumentStore, Judgment, JudgmentSet, Topic


def check_document_texts(X) -> list[str]:
    """Validate X as a non-empty sequence of document strings."""
    if isinstance(X, str):
        raise ValueError("X must be a sequence of document texts, not a single string")
    texts = list(X)
    if not texts:
        raise ValueError("X must contain at least one document")
    for i, text in enumerate(texts):
        if not isinstance(text, str):
            raise ValueError(f"X[{i}] is {type(text).__name__}, expected str")
    return texts


def check_binary_labels(y, n_samples: int) -> np.ndarray:
    """Validate y as 0/1 labels aligned with the documents."""
    labels = np.asarray(y)
    if labels.ndim != 1 or len(labels) != n_samples:
        raise ValueError(f"y must be 1-d with {n_samples} entries, got shape {labels.shape}")
    values = set(np.unique(labels).tolist())
    if not values <= {0, 1}:
        raise ValueError(f"y must contain only 0/1 labels, got values {sorted(values)}")
    return labels.astype(int)


class TopicJudgeClassifier(BaseEstimator, ClassifierMixin):
    """Binary relevance classifier for a single topic.

    Fitting adapts a pointwise base scorer to the training judgments, by
    default through low-rank adaptation with the base weights frozen. The
    fitted judge is available as ``judge_`` and can be serialized with
    :func:`topicjudge.lora.save_adapter`.

    Parameters mirror TrainConfig; ``scorer=None`` builds a fresh
    ReferenceScorer.
    """

    def __init__(
        self,
        scorer: ReferenceScorer | None = None,
        topic_id: str = "topic",
        query_text: str = "",
        mode: str = "lora",
        epochs: int = 10,
        batch_size: int = 64,
        learning_rate: float = 1e-4,
        loss_weight_relevant: float = 0.95,
        loss_weight_nonrelevant: float = 0.05,
        lora_rank: int = 64,
        lora_alpha: float = 128.0,
        max_sequence_tokens: int = 512,
        seed: int = 0,
    ):
        self.scorer = scorer
        self.topic_id = topic_id
        self.query_text = query_text
        self.mode = mode
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.loss_weight_relevant = loss_weight_relevant
        self.loss_weight_nonrelevant = loss_weight_nonrelevant
        self.lora_rank = lora_rank
        self.lora_alpha = lora_alpha
        self.max_sequence_tokens = max_sequence_tokens
        self.seed = seed

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            loss_weight_relevant=self.loss_weight_relevant,
            loss_weight_nonrelevant=self.loss_weight_nonrelevant,
            lora_rank=self.lora_rank,
            lora_alpha=self.lora_alpha,
            max_sequence_tokens=self.max_sequence_tokens,
            seed=self.seed,
            mode=self.mode,
        )

    def fit(self, X: Sequence[str], y) -> "TopicJudgeClassifier":
        texts = check_document_texts(X)
        labels = check_binary_labels(y, len(texts))
        self.scorer_ = self.scorer or ReferenceScorer(
            max_sequence_tokens=self.max_sequence_tokens
        )
        self.topic_ = Topic(self.topic_id, self.query_text)
        doc_ids = [f"d{i:06d}" for i in range(len(texts))]
        store = DocumentStore(zip(doc_ids, texts))
        train = JudgmentSet(
            (
                Judgment(self.topic_id, doc_id, int(label), source="human")
                for doc_id, label in zip(doc_ids, labels)
            ),
            threshold=1,
        )
        self.judge_ = train_topic_judge(self.scorer_, self.topic_, train, store, self._train_config())
        self.classes_ = np.array([0, 1])
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "judge_"):
            raise NotFittedError(
                "This TopicJudgeClassifier instance is not fitted yet; call fit first."
            )

    def decision_function(self, X: Sequence[str]) -> np.ndarray:
        """Relevance scores in [0, 1] for each document."""
        self._check_fitted()
        texts = check_document_texts(X)
        from .lora import LowRankAdapter

        if isinstance(self.judge_, LowRankAdapter):
            return self.scorer_.score_batch(self.query_text, texts, adapter=self.judge_)
        return self.scorer_.score_batch(
            self.query_text, texts, weight_override=self.judge_.weights
        )

    def predict_proba(self, X: Sequence[str]) -> np.ndarray:
        scores = self.decision_function(X)
        return np.column_stack([1.0 - scores, scores])

    def predict(self, X: Sequence[str]) -> np.ndarray:
        scores = self.decision_function(X)
        return (scores >= PREDICTION_THRESHOLD).astype(int)
