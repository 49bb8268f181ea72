"""Per-topic judge training and prediction.

Training minimizes a class-weighted MSE between sigmoid scores and binary
labels with a first-order adaptive-moment optimizer (Adam), iterating
seed-shuffled mini-batches. In ``lora`` mode only the adapter matrices train
and the base scorer weights stay frozen; in ``native_finetune`` mode a full
copy of the weights trains and the scorer itself is never mutated.

Gradients are computed analytically (hand backprop through the reference
scorer) and are validated against central finite differences in the test
suite.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BaseModelMismatchError,
    ConfigError,
    SingleClassError,
    TopicMismatchError,
)
from .lora import LowRankAdapter, fresh_layer
from .scorer import ReferenceScorer
from .seeding import derive_seed, make_rng
from .trec_io import DocumentStore, Judgment, JudgmentSet, Topic

logger = logging.getLogger(__name__)

TRAIN_MODES = ("lora", "native_finetune")
PREDICTION_THRESHOLD = 0.5
_PREDICT_CHUNK = 256


@dataclass(frozen=True)
class TrainConfig:
    """All training hyperparameters.

    Defaults follow the deep-pool judge training recipe: 10 epochs, batches of
    64 query/doc pairs within a 512-token budget, learning rate 1e-4, loss
    weights 0.95 / 0.05 for relevant / non-relevant, LoRA rank 64 with scale
    alpha 128. Class weights should be adapted to the collection at hand.
    """

    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 1e-4
    loss_weight_relevant: float = 0.95
    loss_weight_nonrelevant: float = 0.05
    lora_rank: int = 64
    lora_alpha: float = 128.0
    max_sequence_tokens: int = 512
    seed: int = 0
    mode: str = "lora"

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.loss_weight_relevant <= 0.0 or self.loss_weight_nonrelevant <= 0.0:
            raise ValueError("loss weights must be positive")
        if self.lora_rank < 1:
            raise ValueError("lora_rank must be >= 1")
        if self.mode not in TRAIN_MODES:
            raise ValueError(f"mode must be one of {TRAIN_MODES}, got {self.mode!r}")


def weighted_mse(
    predictions: np.ndarray, labels: np.ndarray, w_pos: float, w_neg: float
) -> float:
    """Mean of w(y_i) * (p_i - y_i)^2 with w(1) = w_pos and w(0) = w_neg."""
    predictions = np.asarray(predictions, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if predictions.shape != labels.shape:
        raise ValueError(
            f"length mismatch: {predictions.shape} predictions vs {labels.shape} labels"
        )
    if predictions.size == 0:
        raise ValueError("weighted_mse is undefined on empty input")
    weights = np.where(labels == 1.0, w_pos, w_neg)
    return float(np.mean(weights * (predictions - labels) ** 2))


@dataclass
class NativeWeights:
    """A fully finetuned weight set, bound to one topic and base model."""

    topic_id: str
    base_model_id: str
    weights: dict[str, tuple[np.ndarray, np.ndarray]]
    provenance: dict = field(default_factory=dict)

    def num_parameters(self) -> int:
        return sum(w.size + b.size for w, b in self.weights.values())


def loss_and_gradients(
    scorer: ReferenceScorer,
    features: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig,
    adapter: LowRankAdapter | None = None,
    native: NativeWeights | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Weighted-MSE loss and its analytic gradients for one batch.

    In lora mode the gradients cover only the adapter matrices (keys like
    ``dense1.A``); the frozen base weights receive no gradient at all. In
    native mode they cover every weight and bias (``dense1.weight``,
    ``dense1.bias``, ...).
    """
    if (adapter is None) == (native is None):
        raise ValueError("pass exactly one of adapter or native weights")
    override = native.weights if native is not None else None
    scores, cache = scorer.forward_features(
        features, adapter=adapter, weight_override=override, return_cache=True
    )
    labels = np.asarray(labels, dtype=float)
    loss = weighted_mse(scores, labels, config.loss_weight_relevant, config.loss_weight_nonrelevant)

    n = len(labels)
    weights = np.where(labels == 1.0, config.loss_weight_relevant, config.loss_weight_nonrelevant)
    d_scores = 2.0 * weights * (scores - labels) / n
    d_logits = d_scores * scores * (1.0 - scores)

    hidden = cache["hidden"]
    base = scorer.base_weights() if override is None else override
    w2, _ = base["dense2"]
    grads: dict[str, np.ndarray] = {}

    g2 = d_logits[:, None]
    if adapter is not None:
        layer2 = adapter.layer("dense2")
        scale2 = adapter.layer_scale(layer2)
        grads["dense2.A"] = scale2 * (layer2.b.T @ (g2.T @ hidden))
        grads["dense2.B"] = scale2 * (g2.T @ cache["u2"])
        d_hidden = g2 @ w2 + scale2 * ((g2 @ layer2.b) @ layer2.a)
    else:
        grads["dense2.weight"] = g2.T @ hidden
        grads["dense2.bias"] = g2.sum(axis=0)
        d_hidden = g2 @ w2

    g1 = d_hidden * (1.0 - hidden**2)
    x = cache["features"]
    if adapter is not None:
        layer1 = adapter.layer("dense1")
        scale1 = adapter.layer_scale(layer1)
        grads["dense1.A"] = scale1 * (layer1.b.T @ (g1.T @ x))
        grads["dense1.B"] = scale1 * (g1.T @ cache["u1"])
    else:
        grads["dense1.weight"] = g1.T @ x
        grads["dense1.bias"] = g1.sum(axis=0)
    return loss, grads


class AdamOptimizer:
    """First-order adaptive-moment updates applied in place."""

    def __init__(
        self,
        parameters: list[np.ndarray],
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ):
        self.parameters = parameters
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step_count = 0
        self._m = [np.zeros_like(p) for p in parameters]
        self._v = [np.zeros_like(p) for p in parameters]

    def step(self, gradients: list[np.ndarray]) -> None:
        self.step_count += 1
        correction1 = 1.0 - self.beta1**self.step_count
        correction2 = 1.0 - self.beta2**self.step_count
        for param, grad, m, v in zip(self.parameters, gradients, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad**2
            param -= self.learning_rate * (m / correction1) / (
                np.sqrt(v / correction2) + self.epsilon
            )


def _validate_training_set(topic: Topic, train: JudgmentSet) -> np.ndarray:
    if len(train) == 0:
        raise ValueError(f"topic {topic.topic_id!r}: training set is empty")
    topics = train.topic_ids()
    if topics != (topic.topic_id,):
        raise ValueError(
            f"training set holds judgments for {list(topics)}, expected only "
            f"{topic.topic_id!r}; topics must never share training data"
        )
    labels = np.array([train.binary_label(j) for j in train], dtype=float)
    if labels.min() == labels.max():
        klass = "relevant" if labels[0] == 1.0 else "non-relevant"
        raise SingleClassError(
            f"topic {topic.topic_id!r}: all training judgments are {klass}; "
            "the weighted loss degenerates on a single class"
        )
    return labels


def train_topic_judge(
    scorer: ReferenceScorer,
    topic: Topic,
    train: JudgmentSet,
    docs: DocumentStore,
    config: TrainConfig,
) -> LowRankAdapter | NativeWeights:
    """Train a topic-specific judge on one assessor's judgments for one topic.

    Runs ``config.epochs`` passes over seed-shuffled mini-batches, minimizing
    the weighted MSE with Adam. Returns a LowRankAdapter in lora mode (base
    weights untouched) or a NativeWeights copy in native mode. The result is
    a pure function of (data, config, seed); provenance, including the
    epoch-end loss curve, is embedded.
    """
    if not hasattr(scorer, "forward_features"):
        raise ConfigError(
            f"scorer {type(scorer).__name__} does not expose adaptable sublayers; "
            "attach pretrained models through the external-scorer protocol instead"
        )
    labels = _validate_training_set(topic, train)
    doc_ids = [j.doc_id for j in train]
    texts = [docs.require(doc_id) for doc_id in doc_ids]
    features = scorer.features(topic.query_text, texts)

    rng = make_rng(derive_seed(config.seed, "train_topic_judge", topic.topic_id))
    adapter: LowRankAdapter | None = None
    native: NativeWeights | None = None
    if config.mode == "lora":
        layers = tuple(
            fresh_layer(name, shape[0], shape[1], config.lora_rank, rng)
            for name, shape in scorer.linear_layer_shapes()
        )
        adapter = LowRankAdapter(
            topic_id=topic.topic_id,
            base_model_id=scorer.base_model_id,
            rank=config.lora_rank,
            alpha=config.lora_alpha,
            layers=layers,
        )
        parameters = [array for layer in layers for array in (layer.a, layer.b)]
        grad_keys = [f"{layer.name}.{m}" for layer in layers for m in ("A", "B")]
    else:
        weights = {
            name: (w.copy(), b.copy()) for name, (w, b) in scorer.base_weights().items()
        }
        native = NativeWeights(
            topic_id=topic.topic_id, base_model_id=scorer.base_model_id, weights=weights
        )
        parameters = [array for w, b in weights.values() for array in (w, b)]
        grad_keys = [f"{name}.{m}" for name in weights for m in ("weight", "bias")]

    optimizer = AdamOptimizer(parameters, config.learning_rate)
    n = len(labels)
    loss_curve: list[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            _, grads = loss_and_gradients(
                scorer, features[batch], labels[batch], config, adapter=adapter, native=native
            )
            optimizer.step([grads[key] for key in grad_keys])
        override = native.weights if native is not None else None
        epoch_scores = scorer.forward_features(features, adapter=adapter, weight_override=override)
        loss_curve.append(
            weighted_mse(
                epoch_scores, labels, config.loss_weight_relevant, config.loss_weight_nonrelevant
            )
        )

    if adapter is not None and adapter.num_parameters() >= scorer.num_trainable_parameters():
        logger.warning(
            "adapter for topic %s holds %d trainable parameters, not fewer than "
            "the %d of native finetuning; lower lora_rank below the scorer's dimensions",
            topic.topic_id,
            adapter.num_parameters(),
            scorer.num_trainable_parameters(),
        )

    n_relevant = int(labels.sum())
    provenance = {
        "seed": config.seed,
        "train_size": n,
        "class_counts": {"relevant": n_relevant, "nonrelevant": n - n_relevant},
        "loss_weight_relevant": config.loss_weight_relevant,
        "loss_weight_nonrelevant": config.loss_weight_nonrelevant,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "learning_rate": config.learning_rate,
        "mode": config.mode,
        "lora_rank": config.lora_rank,
        "lora_alpha": config.lora_alpha,
        "loss_curve": [float(value) for value in loss_curve],
    }
    if adapter is not None:
        adapter.provenance = provenance
        return adapter
    assert native is not None
    native.provenance = provenance
    return native


def _check_usage(
    scorer: ReferenceScorer, judge: LowRankAdapter | NativeWeights, topic: Topic
) -> None:
    if judge.topic_id != topic.topic_id:
        raise TopicMismatchError(
            f"judge was trained for topic {judge.topic_id!r} and cannot assess "
            f"topic {topic.topic_id!r}; judging similar topics is invalid use"
        )
    if judge.base_model_id != scorer.base_model_id:
        raise BaseModelMismatchError(
            f"judge was trained on base model {judge.base_model_id!r}, "
            f"scorer is {scorer.base_model_id!r}"
        )


def predict_relevance(
    scorer: ReferenceScorer,
    judge: LowRankAdapter | NativeWeights,
    topic: Topic,
    doc_text: str,
) -> tuple[float, int]:
    """Score one document with a trained judge; label = score >= 0.5."""
    _check_usage(scorer, judge, topic)
    if isinstance(judge, LowRankAdapter):
        score = scorer.score(topic.query_text, doc_text, adapter=judge)
    else:
        score = scorer.score(topic.query_text, doc_text, weight_override=judge.weights)
    return score, int(score >= PREDICTION_THRESHOLD)


def judge_pool(
    scorer: ReferenceScorer,
    judge: LowRankAdapter | NativeWeights,
    topic: Topic,
    doc_ids,
    docs: DocumentStore,
) -> JudgmentSet:
    """Predict a judgment for every doc_id; order independent, no label reuse.

    Documents are scored by the adapted forward pass only, including any that
    happen to be in the training set.
    """
    _check_usage(scorer, judge, topic)
    ordered = sorted(set(doc_ids))
    adapter = judge if isinstance(judge, LowRankAdapter) else None
    override = judge.weights if isinstance(judge, NativeWeights) else None
    judgments = []
    for start in range(0, len(ordered), _PREDICT_CHUNK):
        chunk = ordered[start : start + _PREDICT_CHUNK]
        texts = [docs.require(doc_id) for doc_id in chunk]
        scores = scorer.score_batch(
            topic.query_text, texts, adapter=adapter, weight_override=override
        )
        for doc_id, score in zip(chunk, scores):
            judgments.append(
                Judgment(
                    topic_id=topic.topic_id,
                    doc_id=doc_id,
                    grade=int(score >= PREDICTION_THRESHOLD),
                    source="adapter",
                )
            )
    return JudgmentSet(judgments, threshold=1)
