"""Per-topic relevance judges for pooled retrieval test collections.

The toolkit trains one relevance classifier per topic from a single
assessor's judgments by low-rank adaptation of a pointwise scorer, uses it to
label unjudged pool documents, and measures how faithfully the augmented
judgments reproduce ground-truth system rankings against 0-filling and
LLM-as-a-judge baselines.
"""

from .config import ExperimentConfig
from .estimator import TopicJudgeClassifier
from .lora import LowRankAdapter, load_adapter, lora_forward, merge_adapter, save_adapter
from .metrics import (
    MetricSpec,
    bootstrap_correlation,
    classification_metrics,
    krippendorff_alpha_nominal,
    ndcg_at_k,
    rank_systems,
    spearman_rho,
)
from .pooling import (
    PoolSimulation,
    ShallowSampleSpec,
    SplitSpec,
    build_pool,
    sample_shallow_train,
    select_topics,
    stratified_split,
    subsample_runs,
)
from .scorer import ExternalScorer, PointwiseScorer, ReferenceScorer
from .synth import SyntheticSpec, generate_synthetic_collection
from .training import (
    NativeWeights,
    TrainConfig,
    judge_pool,
    predict_relevance,
    train_topic_judge,
    weighted_mse,
)
from .trec_io import (
    DocumentStore,
    Judgment,
    JudgmentSet,
    RunSet,
    Topic,
    merge_judgments,
    parse_qrels,
    parse_run,
    write_qrels,
)

__version__ = "0.1.0"

__all__ = [
    "DocumentStore",
    "ExperimentConfig",
    "ExternalScorer",
    "Judgment",
    "JudgmentSet",
    "LowRankAdapter",
    "MetricSpec",
    "NativeWeights",
    "PointwiseScorer",
    "PoolSimulation",
    "ReferenceScorer",
    "RunSet",
    "ShallowSampleSpec",
    "SplitSpec",
    "SyntheticSpec",
    "Topic",
    "TopicJudgeClassifier",
    "TrainConfig",
    "bootstrap_correlation",
    "build_pool",
    "classification_metrics",
    "generate_synthetic_collection",
    "judge_pool",
    "krippendorff_alpha_nominal",
    "load_adapter",
    "lora_forward",
    "merge_adapter",
    "merge_judgments",
    "ndcg_at_k",
    "parse_qrels",
    "parse_run",
    "predict_relevance",
    "rank_systems",
    "sample_shallow_train",
    "save_adapter",
    "select_topics",
    "spearman_rho",
    "stratified_split",
    "subsample_runs",
    "train_topic_judge",
    "weighted_mse",
    "write_qrels",
]
