"""Experiment configuration: schema-validated, versioned, hashable.

Configs are declarative nested mappings (YAML or JSON on disk). Validation
fills defaults and rejects unknown keys, so every run can embed the exact
resolved configuration it executed and reruns from that embedded config
reproduce the run.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigError
from .metrics import MetricSpec
from .pooling import SplitSpec
from .scorer import ReferenceScorer
from .synth import SyntheticSpec
from .training import TrainConfig

CONFIG_VERSION = 1
INFILL_METHODS = ("zero_fill", "adapter", "llm_zero_shot", "llm_few_shot", "ground_truth")
TRAIN_SOURCES = ("pool", "qrels")

_SYNTHETIC_KEYS = {
    "n_topics",
    "n_systems",
    "docs_per_topic",
    "relevant_fraction",
    "doc_length",
    "background_vocab",
    "signal_tokens_per_topic",
    "signal_density",
    "distractor_rate",
    "run_length",
    "max_system_noise",
    "system_visibility",
    "seed",
}
_PATH_KEYS = {"qrels", "runs", "topics", "documents", "binarization_threshold"}
_TRAIN_KEYS = {
    "mode",
    "epochs",
    "batch_size",
    "learning_rate",
    "loss_weight_relevant",
    "loss_weight_nonrelevant",
    "lora_rank",
    "lora_alpha",
    "max_sequence_tokens",
}
_SCORER_KEYS = {"feature_dim", "hidden_dim", "init_seed"}
_SHALLOW_KEYS = {
    "classification_ks",
    "classification_seeds",
    "correlation_ks",
    "rates",
    "seeds",
    "pool_depth",
    "infill",
    "train_source",
}
_LLM_KEYS = {
    "model_id",
    "endpoint",
    "transcript_dir",
    "templates",
    "template_dir",
    "shared_train_k",
    "adapter_ks",
    "graded_threshold",
    "doc_token_budget",
}
_TOP_KEYS = {
    "config_version",
    "seed",
    "dataset",
    "collection",
    "selection",
    "scorer",
    "train",
    "metrics",
    "split",
    "deep",
    "shallow",
    "llm",
}


def _check_keys(section: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _as_mapping(value: Any, where: str) -> dict[str, Any]:
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        raise ConfigError(f"{where} must be a mapping, got {type(value).__name__}")
    return dict(value)


class ExperimentConfig:
    """A fully resolved experiment configuration."""

    def __init__(self, raw: Mapping[str, Any]):
        raw = _as_mapping(raw, "config")
        _check_keys(raw, _TOP_KEYS, "config")
        version = raw.get("config_version")
        if version != CONFIG_VERSION:
            raise ConfigError(
                f"config_version must be {CONFIG_VERSION}, got {version!r}"
            )
        self.seed = int(raw.get("seed", 0))

        collection = _as_mapping(raw.get("collection"), "collection")
        _check_keys(collection, {"synthetic", "paths"}, "collection")
        has_synthetic = "synthetic" in collection
        has_paths = "paths" in collection
        if has_synthetic == has_paths:
            raise ConfigError("collection must define exactly one of 'synthetic' or 'paths'")
        self.synthetic: SyntheticSpec | None = None
        self.synthetic_seed = 0
        self.paths: dict[str, Any] | None = None
        if has_synthetic:
            section = _as_mapping(collection["synthetic"], "collection.synthetic")
            _check_keys(section, _SYNTHETIC_KEYS, "collection.synthetic")
            self.synthetic_seed = int(section.pop("seed", 0))
            try:
                self.synthetic = SyntheticSpec(**section)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid collection.synthetic: {exc}") from exc
        else:
            section = _as_mapping(collection["paths"], "collection.paths")
            _check_keys(section, _PATH_KEYS, "collection.paths")
            for key in ("qrels", "runs", "topics", "documents"):
                if key not in section:
                    raise ConfigError(f"collection.paths is missing {key!r}")
            section.setdefault("binarization_threshold", 1)
            self.paths = section
        self.dataset = str(raw.get("dataset", "synthetic" if has_synthetic else "collection"))

        selection = _as_mapping(raw.get("selection"), "selection")
        _check_keys(selection, {"min_relevant"}, "selection")
        self.min_relevant = int(selection.get("min_relevant", 50))

        scorer = _as_mapping(raw.get("scorer"), "scorer")
        _check_keys(scorer, _SCORER_KEYS, "scorer")
        self.scorer_feature_dim = int(scorer.get("feature_dim", 384))
        self.scorer_hidden_dim = int(scorer.get("hidden_dim", 96))
        self.scorer_init_seed = int(scorer.get("init_seed", 0))

        train = _as_mapping(raw.get("train"), "train")
        _check_keys(train, _TRAIN_KEYS, "train")
        try:
            self.train = TrainConfig(seed=self.seed, **train)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid train section: {exc}") from exc

        metrics = _as_mapping(raw.get("metrics"), "metrics")
        _check_keys(metrics, {"ndcg_depths", "gain"}, "metrics")
        try:
            self.metric_spec = MetricSpec(
                ndcg_depths=tuple(metrics.get("ndcg_depths", (5, 10, 50))),
                gain=metrics.get("gain", "binary"),
            )
        except ValueError as exc:
            raise ConfigError(f"invalid metrics section: {exc}") from exc

        split = _as_mapping(raw.get("split"), "split")
        _check_keys(split, {"train_fraction", "stratify"}, "split")
        try:
            self.split = SplitSpec(
                train_fraction=float(split.get("train_fraction", 0.8)),
                seed=self.seed,
                stratify_by_label=bool(split.get("stratify", True)),
            )
        except ValueError as exc:
            raise ConfigError(f"invalid split section: {exc}") from exc

        deep = _as_mapping(raw.get("deep"), "deep")
        _check_keys(deep, {"modes"}, "deep")
        self.deep_modes = tuple(deep.get("modes", ("lora",)))
        for mode in self.deep_modes:
            if mode not in ("lora", "native_finetune"):
                raise ConfigError(f"unknown deep mode {mode!r}")

        shallow = _as_mapping(raw.get("shallow"), "shallow")
        _check_keys(shallow, _SHALLOW_KEYS, "shallow")
        self.classification_ks = tuple(int(k) for k in shallow.get("classification_ks", (64, 128, 192, 256)))
        self.classification_seeds = tuple(int(s) for s in shallow.get("classification_seeds", (0,)))
        self.correlation_ks = tuple(int(k) for k in shallow.get("correlation_ks", (128,)))
        self.rates = tuple(float(r) for r in shallow.get("rates", (0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0)))
        self.simulation_seeds = tuple(int(s) for s in shallow.get("seeds", tuple(range(20))))
        self.pool_depth = int(shallow.get("pool_depth", 100))
        self.infill = tuple(shallow.get("infill", ("adapter", "zero_fill")))
        for method in self.infill:
            if method not in INFILL_METHODS:
                raise ConfigError(f"unknown infill method {method!r}")
        self.train_source = shallow.get("train_source", "pool")
        if self.train_source not in TRAIN_SOURCES:
            raise ConfigError(f"train_source must be one of {TRAIN_SOURCES}")
        for rate in self.rates:
            if not 0.0 < rate <= 1.0:
                raise ConfigError(f"rates must be in (0, 1], got {rate}")

        llm = _as_mapping(raw.get("llm"), "llm")
        _check_keys(llm, _LLM_KEYS, "llm")
        self.llm_model_id = str(llm.get("model_id", "replay"))
        self.llm_endpoint = llm.get("endpoint")
        self.llm_transcript_dir = llm.get("transcript_dir")
        self.llm_templates = tuple(llm.get("templates", ("umbrela_graded", "binary_direct")))
        self.llm_template_dir = llm.get("template_dir")
        self.llm_shared_train_k = int(llm.get("shared_train_k", 256))
        self.llm_adapter_ks = tuple(int(k) for k in llm.get("adapter_ks", (64, 128, 192, 256)))
        self.llm_graded_threshold = int(llm.get("graded_threshold", 1))
        self.llm_doc_token_budget = int(llm.get("doc_token_budget", 512))
        if max(self.llm_adapter_ks, default=0) > self.llm_shared_train_k:
            raise ConfigError("llm.adapter_ks cannot exceed llm.shared_train_k")

        self.resolved = self._resolve()

    def _resolve(self) -> dict[str, Any]:
        collection: dict[str, Any]
        if self.synthetic is not None:
            synthetic = {
                field: getattr(self.synthetic, field)
                for field in self.synthetic.__dataclass_fields__
            }
            synthetic["seed"] = self.synthetic_seed
            collection = {"synthetic": synthetic}
        else:
            collection = {"paths": dict(self.paths or {})}
        return {
            "config_version": CONFIG_VERSION,
            "seed": self.seed,
            "dataset": self.dataset,
            "collection": collection,
            "selection": {"min_relevant": self.min_relevant},
            "scorer": {
                "feature_dim": self.scorer_feature_dim,
                "hidden_dim": self.scorer_hidden_dim,
                "init_seed": self.scorer_init_seed,
            },
            "train": {
                "mode": self.train.mode,
                "epochs": self.train.epochs,
                "batch_size": self.train.batch_size,
                "learning_rate": self.train.learning_rate,
                "loss_weight_relevant": self.train.loss_weight_relevant,
                "loss_weight_nonrelevant": self.train.loss_weight_nonrelevant,
                "lora_rank": self.train.lora_rank,
                "lora_alpha": self.train.lora_alpha,
                "max_sequence_tokens": self.train.max_sequence_tokens,
            },
            "metrics": {
                "ndcg_depths": list(self.metric_spec.ndcg_depths),
                "gain": self.metric_spec.gain,
            },
            "split": {
                "train_fraction": self.split.train_fraction,
                "stratify": self.split.stratify_by_label,
            },
            "deep": {"modes": list(self.deep_modes)},
            "shallow": {
                "classification_ks": list(self.classification_ks),
                "classification_seeds": list(self.classification_seeds),
                "correlation_ks": list(self.correlation_ks),
                "rates": list(self.rates),
                "seeds": list(self.simulation_seeds),
                "pool_depth": self.pool_depth,
                "infill": list(self.infill),
                "train_source": self.train_source,
            },
            "llm": {
                "model_id": self.llm_model_id,
                "endpoint": self.llm_endpoint,
                "transcript_dir": str(self.llm_transcript_dir) if self.llm_transcript_dir else None,
                "templates": list(self.llm_templates),
                "template_dir": str(self.llm_template_dir) if self.llm_template_dir else None,
                "shared_train_k": self.llm_shared_train_k,
                "adapter_ks": list(self.llm_adapter_ks),
                "graded_threshold": self.llm_graded_threshold,
                "doc_token_budget": self.llm_doc_token_budget,
            },
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.resolved, sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]

    def build_scorer(self) -> ReferenceScorer:
        return ReferenceScorer(
            feature_dim=self.scorer_feature_dim,
            hidden_dim=self.scorer_hidden_dim,
            max_sequence_tokens=self.train.max_sequence_tokens,
            init_seed=self.scorer_init_seed,
        )

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as handle:
            raw = yaml.safe_load(handle)
        if not isinstance(raw, Mapping):
            raise ConfigError(f"config file {path} does not hold a mapping")
        return cls(raw)
