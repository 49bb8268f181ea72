"""Experiment pipelines.

Three reproducible pipelines mirror the study design:

* deep: per topic, a stratified train/test split of deep judgments, judge
  training in one or both modes, and held-out classification metrics.
* shallow: per (k, rate, seed), a run-subsampled pool whose documents keep
  their ground-truth judgments, a k-document training sample, infill of the
  remaining judged documents per method, and the rank correlation between
  system rankings under infilled versus full judgments. Classification
  quality as a function of k is measured on the judgments outside each
  training sample.
* llm comparison: one shared train set per topic feeds both adapter training
  and few-shot example sampling; adapters, zero/few-shot LLM judging, and the
  0-fill baseline are scored on the identical infill set.

Reports embed the resolved configuration and contain no timestamps, so
rerunning a report's own config reproduces it byte for byte.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .errors import (
    ConfigError,
    InsufficientPoolError,
    SingleClassError,
    StratificationError,
    UndefinedMetricError,
)
from .llm import FewShotBlock, PromptTemplate, ReplayClient, TranscriptCache, judge_pool_llm
from .llm.client import HttpChatClient
from .metrics import (
    bootstrap_correlation,
    classification_metrics,
    krippendorff_alpha_nominal,
    spearman_rho,
    system_means,
)
from .pooling import ShallowSampleSpec, sample_shallow_train, select_topics, stratified_split, subsample_runs
from .scorer import ReferenceScorer
from .seeding import derive_seed
from .synth import generate_synthetic_collection
from .training import train_topic_judge, judge_pool
from .trec_io import (
    DocumentStore,
    Judgment,
    JudgmentSet,
    RunSet,
    Topic,
    load_documents,
    load_qrels,
    load_run,
    load_topics,
    merge_judgments,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Collection:
    documents: DocumentStore
    topics: dict[str, Topic]
    judgments: JudgmentSet
    runs: RunSet


def load_collection(config: ExperimentConfig) -> Collection:
    if config.synthetic is not None:
        generated = generate_synthetic_collection(config.synthetic, config.synthetic_seed)
        return Collection(
            documents=generated.documents,
            topics=generated.topic_by_id(),
            judgments=generated.judgments,
            runs=generated.runs,
        )
    paths = config.paths or {}
    return Collection(
        documents=load_documents(paths["documents"]),
        topics={t.topic_id: t for t in load_topics(paths["topics"])},
        judgments=load_qrels(paths["qrels"], paths.get("binarization_threshold", 1)),
        runs=load_run(paths["runs"]),
    )


@dataclass(frozen=True)
class Omission:
    """One skipped unit of work and why; reports enumerate every omission."""

    stage: str
    reason: str
    topic_id: str | None = None
    k: int | None = None
    rate: float | None = None
    seed: int | None = None


@dataclass(frozen=True)
class ClassificationRow:
    topic_id: str
    mode: str
    k: int | None
    seed: int
    precision: float | None
    recall: float | None
    f1: float | None
    accuracy: float
    flags: tuple[str, ...]


def _summarize_classification(rows: list[ClassificationRow], group_by_k: bool) -> list[dict]:
    groups: dict[tuple, list[ClassificationRow]] = {}
    for row in rows:
        key = (row.mode, row.k if group_by_k else None)
        groups.setdefault(key, []).append(row)
    summary = []
    for (mode, k), members in sorted(groups.items(), key=lambda item: (item[0][0], item[0][1] or 0)):
        entry: dict = {"mode": mode, "k": k, "n_topics": len(members)}
        for name in ("precision", "recall", "f1", "accuracy"):
            values = [getattr(row, name) for row in members if getattr(row, name) is not None]
            entry[f"mean_{name}"] = float(np.mean(values)) if values else None
            entry[f"std_{name}"] = float(np.std(values)) if values else None
            entry[f"n_defined_{name}"] = len(values)
        summary.append(entry)
    return summary


@dataclass
class DeepReport:
    config: dict
    rows: list[ClassificationRow]
    summary: list[dict]
    omissions: list[Omission]


def run_experiment_deep(
    config: ExperimentConfig,
    scorer: ReferenceScorer | None = None,
    collection: Collection | None = None,
) -> DeepReport:
    """Stratified split, train per mode, evaluate on the held-out judgments."""
    collection = collection or load_collection(config)
    scorer = scorer or config.build_scorer()
    selected = select_topics(collection.judgments, config.min_relevant)
    if not selected:
        raise ConfigError(f"no topics have >= {config.min_relevant} relevant judgments")

    rows: list[ClassificationRow] = []
    omissions: list[Omission] = []
    for topic_id in selected:
        topic = collection.topics[topic_id]
        topic_judgments = collection.judgments.for_topic(topic_id)
        try:
            split_spec = dataclasses.replace(config.split, seed=derive_seed(config.seed, "deep_split"))
            train, test = stratified_split(topic_judgments, split_spec)
        except StratificationError as exc:
            logger.warning("skipping topic %s: %s", topic_id, exc)
            omissions.append(Omission(stage="deep_split", reason=str(exc), topic_id=topic_id))
            continue
        for mode in config.deep_modes:
            try:
                train_config = dataclasses.replace(
                    config.train, mode=mode, seed=derive_seed(config.seed, "deep_train", mode)
                )
                judge = train_topic_judge(scorer, topic, train, collection.documents, train_config)
                predicted = judge_pool(
                    scorer, judge, topic, test.doc_ids(topic_id), collection.documents
                )
                metrics = classification_metrics(predicted, test, topic_id)
            except (SingleClassError, ValueError) as exc:
                logger.warning("skipping topic %s mode %s: %s", topic_id, mode, exc)
                omissions.append(
                    Omission(stage=f"deep_train_{mode}", reason=str(exc), topic_id=topic_id)
                )
                continue
            rows.append(
                ClassificationRow(
                    topic_id=topic_id,
                    mode=mode,
                    k=None,
                    seed=config.seed,
                    precision=metrics.precision,
                    recall=metrics.recall,
                    f1=metrics.f1,
                    accuracy=metrics.accuracy,
                    flags=metrics.flags,
                )
            )
    return DeepReport(
        config=config.resolved,
        rows=rows,
        summary=_summarize_classification(rows, group_by_k=False),
        omissions=omissions,
    )


@dataclass(frozen=True)
class CorrelationRow:
    dataset: str
    method: str
    k: int | None
    rate: float
    seed: int
    depth: int
    rho: float | None


@dataclass(frozen=True)
class BootstrapRow:
    method: str
    k: int | None
    rate: float
    depth: int
    mean_rho: float
    std_rho: float
    n_seeds: int
    n_undefined: int


@dataclass
class ShallowReport:
    config: dict
    correlation_rows: list[CorrelationRow]
    bootstrap_rows: list[BootstrapRow]
    classification_rows: list[ClassificationRow]
    classification_summary: list[dict]
    omissions: list[Omission]


def _infill_predictions_zero(qrels: JudgmentSet, infill: dict[str, tuple[str, ...]]) -> JudgmentSet:
    entries = [
        Judgment(topic_id, doc_id, 0, source="zero_fill")
        for topic_id, doc_ids in infill.items()
        for doc_id in doc_ids
    ]
    return JudgmentSet(entries, threshold=qrels.threshold)


def _train_judges_for_pool(
    scorer: ReferenceScorer,
    config: ExperimentConfig,
    collection: Collection,
    selected: list[str],
    source_judgments: dict[str, JudgmentSet],
    k: int,
    sample_seed: int,
    train_seed: int,
):
    """Sample a k-document train set per topic and train its judge.

    Raises InsufficientPoolError if any topic cannot supply the sample; the
    caller omits the whole configuration, mirroring how undersized pools are
    dropped rather than averaged over a shifting topic set.
    """
    judges = {}
    for topic_id in selected:
        sample_spec = ShallowSampleSpec(k=k, seed=sample_seed)
        train = sample_shallow_train(source_judgments[topic_id], sample_spec)
        train_config = dataclasses.replace(config.train, mode="lora", seed=train_seed)
        judges[topic_id] = (
            train_topic_judge(
                scorer, collection.topics[topic_id], train, collection.documents, train_config
            ),
            train,
        )
    return judges


def run_experiment_shallow(
    config: ExperimentConfig,
    scorer: ReferenceScorer | None = None,
    collection: Collection | None = None,
) -> ShallowReport:
    """Shallow-pool study: classification quality by k, ranking fidelity by rate."""
    collection = collection or load_collection(config)
    scorer = scorer or config.build_scorer()
    selected = select_topics(collection.judgments, config.min_relevant)
    if not selected:
        raise ConfigError(f"no topics have >= {config.min_relevant} relevant judgments")
    qrels = collection.judgments.restrict(
        (t, d) for t in selected for d in collection.judgments.doc_ids(t)
    )
    depths = config.metric_spec.ndcg_depths
    gain = config.metric_spec.gain
    truth_vectors = system_means(collection.runs, qrels, depths, gain)

    omissions: list[Omission] = []
    classification_rows: list[ClassificationRow] = []
    for k in config.classification_ks:
        for class_seed in config.classification_seeds:
            for topic_id in selected:
                topic_qrels = qrels.for_topic(topic_id)
                try:
                    train = sample_shallow_train(
                        topic_qrels,
                        ShallowSampleSpec(
                            k=k, seed=derive_seed(config.seed, "classification_sample", class_seed)
                        ),
                    )
                    heldout_keys = topic_qrels.keys() - train.keys()
                    if not heldout_keys:
                        raise InsufficientPoolError(
                            f"topic {topic_id!r}: no held-out judgments remain after sampling k={k}"
                        )
                    train_config = dataclasses.replace(
                        config.train,
                        seed=derive_seed(config.seed, "classification_train", k, class_seed),
                    )
                    judge = train_topic_judge(
                        scorer, collection.topics[topic_id], train, collection.documents, train_config
                    )
                    heldout = topic_qrels.restrict(heldout_keys)
                    predicted = judge_pool(
                        scorer,
                        judge,
                        collection.topics[topic_id],
                        heldout.doc_ids(topic_id),
                        collection.documents,
                    )
                    metrics = classification_metrics(predicted, heldout, topic_id)
                except (InsufficientPoolError, SingleClassError) as exc:
                    logger.warning("classification k=%d topic %s skipped: %s", k, topic_id, exc)
                    omissions.append(
                        Omission(
                            stage="classification",
                            reason=str(exc),
                            topic_id=topic_id,
                            k=k,
                            seed=class_seed,
                        )
                    )
                    continue
                classification_rows.append(
                    ClassificationRow(
                        topic_id=topic_id,
                        mode=config.train.mode,
                        k=k,
                        seed=class_seed,
                        precision=metrics.precision,
                        recall=metrics.recall,
                        f1=metrics.f1,
                        accuracy=metrics.accuracy,
                        flags=metrics.flags,
                    )
                )

    correlation_rows: list[CorrelationRow] = []
    vectors: dict[tuple, dict[int, tuple[np.ndarray, np.ndarray]]] = {}
    for rate in config.rates:
        for sim_seed in config.simulation_seeds:
            simulation = subsample_runs(
                collection.runs,
                rate,
                seed=derive_seed(config.seed, "pool_simulation", sim_seed),
                depth=config.pool_depth,
            )
            pooled_keys = {
                (topic_id, doc_id)
                for topic_id in selected
                for doc_id in simulation.pooled_docs.get(topic_id, ())
                if (topic_id, doc_id) in qrels
            }
            ground_pool = qrels.restrict(pooled_keys)
            infill = {
                topic_id: tuple(
                    doc_id
                    for doc_id in qrels.doc_ids(topic_id)
                    if (topic_id, doc_id) not in pooled_keys
                )
                for topic_id in selected
            }

            for method in config.infill:
                if method in ("llm_zero_shot", "llm_few_shot"):
                    raise ConfigError(
                        "LLM infill belongs to the comparison experiment; "
                        "use run_experiment_llm_compare"
                    )
                if method == "ground_truth":
                    merged_sets = {None: qrels}
                elif method == "zero_fill":
                    merged_sets = {
                        None: merge_judgments(ground_pool, _infill_predictions_zero(qrels, infill))
                    }
                else:
                    merged_sets = {}
                    source = (
                        {t: ground_pool.for_topic(t) for t in selected}
                        if config.train_source == "pool"
                        else {t: qrels.for_topic(t) for t in selected}
                    )
                    for k in config.correlation_ks:
                        try:
                            judges = _train_judges_for_pool(
                                scorer,
                                config,
                                collection,
                                selected,
                                source,
                                k,
                                sample_seed=derive_seed(config.seed, "pool_sample", rate, sim_seed),
                                train_seed=derive_seed(config.seed, "pool_train", k, rate, sim_seed),
                            )
                        except (InsufficientPoolError, SingleClassError) as exc:
                            logger.warning(
                                "adapter infill k=%d rate=%.3f seed=%d omitted: %s",
                                k,
                                rate,
                                sim_seed,
                                exc,
                            )
                            omissions.append(
                                Omission(
                                    stage="adapter_infill",
                                    reason=str(exc),
                                    k=k,
                                    rate=rate,
                                    seed=sim_seed,
                                )
                            )
                            continue
                        predictions: list[Judgment] = []
                        for topic_id in selected:
                            judge, _ = judges[topic_id]
                            predicted = judge_pool(
                                scorer,
                                judge,
                                collection.topics[topic_id],
                                infill[topic_id],
                                collection.documents,
                            )
                            predictions.extend(predicted)
                        merged_sets[k] = merge_judgments(
                            ground_pool, JudgmentSet(predictions, threshold=1)
                        )

                for k, merged in merged_sets.items():
                    merged_vectors = system_means(collection.runs, merged, depths, gain)
                    for depth in depths:
                        vectors.setdefault((method, k, rate, depth), {})[sim_seed] = (
                            merged_vectors[depth],
                            truth_vectors[depth],
                        )

    bootstrap_rows: list[BootstrapRow] = []
    for (method, k, rate, depth), per_seed in sorted(
        vectors.items(), key=lambda item: (item[0][0], item[0][1] or 0, item[0][2], item[0][3])
    ):
        seeds = sorted(per_seed)
        try:
            aggregate = bootstrap_correlation(lambda s: per_seed[s], seeds)
            rho_by_seed = dict(aggregate.per_seed)
            bootstrap_rows.append(
                BootstrapRow(
                    method=method,
                    k=k,
                    rate=rate,
                    depth=depth,
                    mean_rho=aggregate.mean,
                    std_rho=aggregate.std,
                    n_seeds=len(seeds),
                    n_undefined=aggregate.n_undefined,
                )
            )
        except UndefinedMetricError:
            rho_by_seed = {s: None for s in seeds}
        for sim_seed in seeds:
            correlation_rows.append(
                CorrelationRow(
                    dataset=config.dataset,
                    method=method,
                    k=k,
                    rate=rate,
                    seed=sim_seed,
                    depth=depth,
                    rho=rho_by_seed.get(sim_seed),
                )
            )

    return ShallowReport(
        config=config.resolved,
        correlation_rows=correlation_rows,
        bootstrap_rows=bootstrap_rows,
        classification_rows=classification_rows,
        classification_summary=_summarize_classification(classification_rows, group_by_k=True),
        omissions=omissions,
    )


@dataclass(frozen=True)
class ApproachRow:
    approach: str
    k: int | None
    template_id: str | None
    few_shot: bool
    rho: dict[int, float | None]
    alpha: float | None
    n_predicted: int
    n_abstained: int
    flags: tuple[str, ...] = ()


@dataclass
class CompareReport:
    config: dict
    rows: list[ApproachRow]
    omitted_topics: list[Omission]
    evaluated_topics: tuple[str, ...]
    network_calls: int
    abstentions_balanced: bool


def _build_llm_client(config: ExperimentConfig):
    if config.llm_endpoint:
        return HttpChatClient(config.llm_endpoint, config.llm_model_id)
    return ReplayClient(config.llm_model_id)


def run_experiment_llm_compare(
    config: ExperimentConfig,
    client=None,
    scorer: ReferenceScorer | None = None,
    collection: Collection | None = None,
) -> CompareReport:
    """Adapters versus LLM judging versus 0-fill on one shared evaluation pool.

    One shared train sample per topic retains its ground-truth labels, trains
    the adapters, and supplies the few-shot examples; every approach predicts
    the identical remainder of the judged pool.
    """
    collection = collection or load_collection(config)
    scorer = scorer or config.build_scorer()
    if config.llm_transcript_dir is None:
        raise ConfigError("llm.transcript_dir is required for the comparison experiment")
    cache = TranscriptCache(config.llm_transcript_dir)
    client = client or _build_llm_client(config)

    selected = select_topics(collection.judgments, config.min_relevant)
    omitted: list[Omission] = []
    shared_train: dict[str, JudgmentSet] = {}
    for topic_id in selected:
        topic_qrels = collection.judgments.for_topic(topic_id)
        try:
            shared_train[topic_id] = sample_shallow_train(
                topic_qrels,
                ShallowSampleSpec(
                    k=config.llm_shared_train_k,
                    seed=derive_seed(config.seed, "shared_train"),
                ),
            )
        except InsufficientPoolError as exc:
            logger.warning("topic %s omitted from comparison: %s", topic_id, exc)
            omitted.append(Omission(stage="shared_train", reason=str(exc), topic_id=topic_id))
    kept = sorted(shared_train)
    if not kept:
        raise ConfigError("no topic supports the shared train sample size")

    qrels = collection.judgments.restrict(
        (t, d) for t in kept for d in collection.judgments.doc_ids(t)
    )
    depths = config.metric_spec.ndcg_depths
    gain = config.metric_spec.gain
    truth_vectors = system_means(collection.runs, qrels, depths, gain)
    shared_keys = {key for train in shared_train.values() for key in train.keys()}
    ground_shared = qrels.restrict(shared_keys)
    infill = {
        topic_id: tuple(
            doc_id for doc_id in qrels.doc_ids(topic_id) if (topic_id, doc_id) not in shared_keys
        )
        for topic_id in kept
    }
    n_infill = sum(len(doc_ids) for doc_ids in infill.values())

    def evaluate(predicted: JudgmentSet) -> tuple[dict[int, float | None], float | None, tuple[str, ...]]:
        flags: list[str] = []
        merged = merge_judgments(ground_shared, predicted)
        merged_vectors = system_means(collection.runs, merged, depths, gain)
        rho: dict[int, float | None] = {}
        for depth in depths:
            try:
                rho[depth] = spearman_rho(merged_vectors[depth], truth_vectors[depth])
            except UndefinedMetricError:
                rho[depth] = None
                flags.append(f"rho_undefined_depth_{depth}")
        try:
            alpha = krippendorff_alpha_nominal(predicted, qrels)
        except (UndefinedMetricError, ValueError):
            alpha = None
            flags.append("alpha_undefined")
        return rho, alpha, tuple(flags)

    rows: list[ApproachRow] = []
    total_network_calls = 0
    balanced = True

    for k in config.llm_adapter_ks:
        predictions: list[Judgment] = []
        for topic_id in kept:
            if k == config.llm_shared_train_k:
                train = shared_train[topic_id]
            else:
                train = sample_shallow_train(
                    shared_train[topic_id],
                    ShallowSampleSpec(k=k, seed=derive_seed(config.seed, "adapter_subset", k)),
                )
            train_config = dataclasses.replace(
                config.train, mode="lora", seed=derive_seed(config.seed, "compare_train", k)
            )
            judge = train_topic_judge(
                scorer, collection.topics[topic_id], train, collection.documents, train_config
            )
            predictions.extend(
                judge_pool(
                    scorer, judge, collection.topics[topic_id], infill[topic_id], collection.documents
                )
            )
        predicted_set = JudgmentSet(predictions, threshold=1)
        rho, alpha, flags = evaluate(predicted_set)
        rows.append(
            ApproachRow(
                approach=f"adapter_k{k}",
                k=k,
                template_id=None,
                few_shot=False,
                rho=rho,
                alpha=alpha,
                n_predicted=len(predicted_set),
                n_abstained=0,
                flags=flags,
            )
        )

    for few_shot in (False, True):
        for template_id in config.llm_templates:
            template = PromptTemplate.load(template_id, config.llm_template_dir)
            predictions = []
            abstained = 0
            for topic_id in kept:
                block = None
                if few_shot:
                    block = FewShotBlock.from_training_split(
                        shared_train[topic_id],
                        collection.documents,
                        topic_id,
                        order_seed=derive_seed(config.seed, "fewshot", template_id),
                    )
                result = judge_pool_llm(
                    client,
                    template,
                    collection.topics[topic_id],
                    infill[topic_id],
                    collection.documents,
                    cache,
                    fewshot=block,
                    graded_threshold=config.llm_graded_threshold,
                    doc_token_budget=config.llm_doc_token_budget,
                )
                total_network_calls += result.network_calls
                abstained += len(result.abstentions)
                balanced = balanced and (
                    len(result.judgments) + len(result.abstentions) == len(infill[topic_id])
                )
                predictions.extend(result.judgments)
            predicted_set = JudgmentSet(predictions, threshold=config.llm_graded_threshold if template.output_scale == "graded_0_3" else 1)
            rho, alpha, flags = evaluate(predicted_set)
            rows.append(
                ApproachRow(
                    approach=f"llm_{'few' if few_shot else 'zero'}_shot_{template_id}",
                    k=None,
                    template_id=template_id,
                    few_shot=few_shot,
                    rho=rho,
                    alpha=alpha,
                    n_predicted=len(predicted_set),
                    n_abstained=abstained,
                    flags=flags,
                )
            )

    zero_predictions = _infill_predictions_zero(qrels, infill)
    rho, alpha, flags = evaluate(zero_predictions)
    rows.append(
        ApproachRow(
            approach="zero_fill",
            k=None,
            template_id=None,
            few_shot=False,
            rho=rho,
            alpha=alpha,
            n_predicted=n_infill,
            n_abstained=0,
            flags=flags,
        )
    )

    ordered = (
        [row for row in rows if row.approach.startswith("adapter_")]
        + [row for row in rows if row.approach.startswith("llm_zero_shot")]
        + [row for row in rows if row.approach.startswith("llm_few_shot")]
        + [row for row in rows if row.approach == "zero_fill"]
    )
    return CompareReport(
        config=config.resolved,
        rows=ordered,
        omitted_topics=omitted,
        evaluated_topics=tuple(kept),
        network_calls=total_network_calls,
        abstentions_balanced=balanced,
    )


def _rows_payload(rows) -> list[dict]:
    payload = []
    for row in rows:
        entry = dataclasses.asdict(row)
        for key, value in entry.items():
            if isinstance(value, tuple):
                entry[key] = list(value)
            elif isinstance(value, dict):
                entry[key] = {str(k): v for k, v in value.items()}
        payload.append(entry)
    return payload


def report_payload(report) -> dict:
    payload = {"report_type": type(report).__name__, "config": report.config}
    for name, value in vars(report).items():
        if name == "config":
            continue
        if isinstance(value, list) and value and dataclasses.is_dataclass(value[0]):
            payload[name] = _rows_payload(value)
        elif isinstance(value, tuple):
            payload[name] = list(value)
        else:
            payload[name] = value
    return payload


def report_json(report) -> str:
    return json.dumps(report_payload(report), sort_keys=True, indent=2) + "\n"


def correlation_tsv(report: ShallowReport) -> str:
    lines = ["dataset\tmethod\tk\trate\tseed\tdepth\trho"]
    for row in report.correlation_rows:
        rho = "" if row.rho is None else f"{row.rho:.6f}"
        k = "" if row.k is None else str(row.k)
        lines.append(
            f"{row.dataset}\t{row.method}\t{k}\t{row.rate:g}\t{row.seed}\t{row.depth}\t{rho}"
        )
    return "\n".join(lines) + "\n"


def compare_tsv(report: CompareReport) -> str:
    lines = ["approach\tdepth\trho\talpha\tn_predicted\tn_abstained"]
    for row in report.rows:
        for depth in sorted(row.rho):
            rho = "" if row.rho[depth] is None else f"{row.rho[depth]:.6f}"
            alpha = "" if row.alpha is None else f"{row.alpha:.6f}"
            lines.append(
                f"{row.approach}\t{depth}\t{rho}\t{alpha}\t{row.n_predicted}\t{row.n_abstained}"
            )
    return "\n".join(lines) + "\n"


def write_report(report, out_dir: str | Path) -> Path:
    """Write report.json plus the tabular views into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report_json(report), encoding="utf-8")
    if isinstance(report, ShallowReport):
        (out / "correlations.tsv").write_text(correlation_tsv(report), encoding="utf-8")
    if isinstance(report, CompareReport):
        (out / "compare.tsv").write_text(compare_tsv(report), encoding="utf-8")
    return out


def run_directory(base: str | Path, config: ExperimentConfig) -> Path:
    """Run directory named by config hash plus timestamp."""
    stamp = time.strftime("%Y%m%dT%H%M%S")
    return Path(base) / f"{config.config_hash()}-{stamp}"
