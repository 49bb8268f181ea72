"""Command-line interface.

Subcommands map one-to-one onto the library operations: ``synth`` generates a
synthetic collection, ``train`` fits per-topic adapters, ``predict`` judges a
document list with one adapter, ``augment`` fills a pool's unjudged documents
and merges them into the qrels, ``evaluate`` compares two qrels against a run
set, ``simulate`` and ``compare`` run the shallow-pool and LLM-comparison
experiments, and ``inspect-adapter`` prints an adapter's provenance.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .config import ExperimentConfig
from .errors import TopicJudgeError, UndefinedMetricError
from .experiments import (
    run_directory,
    run_experiment_llm_compare,
    run_experiment_shallow,
    write_report,
)
from .lora import LowRankAdapter, load_adapter, save_adapter
from .metrics import krippendorff_alpha_nominal, spearman_rho, system_means
from .pooling import build_pool, select_topics
from .scorer import ReferenceScorer
from .seeding import derive_seed
from .synth import SyntheticSpec, generate_synthetic_collection
from .training import TrainConfig, judge_pool, train_topic_judge
from .trec_io import (
    JudgmentSet,
    load_documents,
    load_qrels,
    load_run,
    load_topics,
    merge_judgments,
    write_qrels,
    write_run,
    write_topics,
)

logger = logging.getLogger(__name__)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="base random seed")
    parser.add_argument("--config", type=Path, default=None, help="experiment config file")
    parser.add_argument("--out", type=Path, default=None, help="output file or directory")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topicjudge",
        description="Train per-topic relevance judges and evaluate pooled test collections.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a deterministic synthetic collection")
    _add_common(p)

    p = sub.add_parser("train", help="train one adapter per selected topic")
    _add_common(p)
    p.add_argument("--qrels", type=Path, required=True)
    p.add_argument("--docs", type=Path, required=True)
    p.add_argument("--topics", type=Path, required=True)
    p.add_argument("--topic", action="append", default=None, help="restrict to these topic ids")
    p.add_argument("--min-relevant", type=int, default=1)

    p = sub.add_parser("predict", help="judge documents with a trained adapter")
    _add_common(p)
    p.add_argument("--adapter", type=Path, required=True)
    p.add_argument("--docs", type=Path, required=True)
    p.add_argument("--topics", type=Path, required=True)
    p.add_argument("--doc-ids", type=Path, default=None, help="file with one doc_id per line")

    p = sub.add_parser("augment", help="judge a pool's unjudged documents and merge into the qrels")
    _add_common(p)
    p.add_argument("--adapters", type=Path, required=True, help="directory of .adapter files")
    p.add_argument("--qrels", type=Path, required=True)
    p.add_argument("--runs", type=Path, required=True)
    p.add_argument("--docs", type=Path, required=True)
    p.add_argument("--topics", type=Path, required=True)
    p.add_argument("--depth", type=int, default=100)

    p = sub.add_parser("evaluate", help="rank correlation and agreement between two qrels")
    _add_common(p)
    p.add_argument("--runs", type=Path, required=True)
    p.add_argument("--qrels-truth", type=Path, required=True)
    p.add_argument("--qrels-pred", type=Path, required=True)
    p.add_argument("--depths", type=str, default="5,10,50")

    p = sub.add_parser("simulate", help="run the shallow-pool simulation experiment")
    _add_common(p)

    p = sub.add_parser("compare", help="run the LLM-as-a-judge comparison experiment")
    _add_common(p)

    p = sub.add_parser("inspect-adapter", help="print an adapter's provenance")
    _add_common(p)
    p.add_argument("adapter", type=Path)

    return parser


def _require(value, flag: str):
    if value is None:
        raise TopicJudgeError(f"missing required option {flag}")
    return value


def _load_train_config(args) -> TrainConfig:
    if args.config is not None:
        config = ExperimentConfig.from_yaml(args.config)
        return dataclasses.replace(config.train, seed=args.seed)
    return TrainConfig(seed=args.seed)


def _cmd_synth(args) -> int:
    spec = SyntheticSpec()
    if args.config is not None:
        config = ExperimentConfig.from_yaml(args.config)
        if config.synthetic is None:
            raise TopicJudgeError("config has no collection.synthetic section")
        spec = config.synthetic
    out = _require(args.out, "--out")
    collection = generate_synthetic_collection(spec, args.seed)
    out.mkdir(parents=True, exist_ok=True)
    (out / "qrels.txt").write_text(write_qrels(collection.judgments), encoding="utf-8")
    (out / "runs.txt").write_text(write_run(collection.runs), encoding="utf-8")
    (out / "topics.tsv").write_text(write_topics(collection.topics), encoding="utf-8")
    (out / "docs.jsonl").write_text(collection.documents.to_jsonl(), encoding="utf-8")
    manifest = {
        "seed": args.seed,
        "quality_order": list(collection.quality_order),
        "spec": {name: getattr(spec, name) for name in spec.__dataclass_fields__},
    }
    (out / "collection.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote synthetic collection to {out}")
    return 0


def _cmd_train(args) -> int:
    out = _require(args.out, "--out")
    qrels = load_qrels(args.qrels)
    docs = load_documents(args.docs)
    topics = {t.topic_id: t for t in load_topics(args.topics)}
    train_config = _load_train_config(args)
    scorer = (
        ExperimentConfig.from_yaml(args.config).build_scorer()
        if args.config is not None
        else ReferenceScorer()
    )
    wanted = args.topic or select_topics(qrels, args.min_relevant)
    out.mkdir(parents=True, exist_ok=True)
    for topic_id in wanted:
        if topic_id not in topics:
            raise TopicJudgeError(f"topic {topic_id!r} not present in the topics file")
        per_topic = dataclasses.replace(
            train_config, seed=derive_seed(args.seed, "cli_train", topic_id)
        )
        judge = train_topic_judge(scorer, topics[topic_id], qrels.for_topic(topic_id), docs, per_topic)
        if not isinstance(judge, LowRankAdapter):
            raise TopicJudgeError("the train subcommand stores adapters; use mode=lora")
        path = out / f"{topic_id}.adapter"
        path.write_bytes(save_adapter(judge))
        print(f"trained adapter for topic {topic_id}: {path}")
    return 0


def _load_adapter_with_scorer(path: Path) -> tuple[LowRankAdapter, ReferenceScorer]:
    adapter = load_adapter(path.read_bytes())
    scorer = ReferenceScorer.from_base_model_id(adapter.base_model_id)
    return adapter, scorer


def _cmd_predict(args) -> int:
    out = _require(args.out, "--out")
    adapter, scorer = _load_adapter_with_scorer(args.adapter)
    docs = load_documents(args.docs)
    topics = {t.topic_id: t for t in load_topics(args.topics)}
    if adapter.topic_id not in topics:
        raise TopicJudgeError(f"adapter topic {adapter.topic_id!r} not in the topics file")
    if args.doc_ids is not None:
        doc_ids = [line.strip() for line in args.doc_ids.read_text().splitlines() if line.strip()]
    else:
        doc_ids = list(docs.doc_ids())
    predicted = judge_pool(scorer, adapter, topics[adapter.topic_id], doc_ids, docs)
    out.write_text(write_qrels(predicted), encoding="utf-8")
    print(f"wrote {len(predicted)} predicted judgments to {out}")
    return 0


def _cmd_augment(args) -> int:
    out = _require(args.out, "--out")
    qrels = load_qrels(args.qrels)
    runs = load_run(args.runs)
    docs = load_documents(args.docs)
    topics = {t.topic_id: t for t in load_topics(args.topics)}
    pooled = build_pool(runs, args.depth)
    judged = qrels.keys()
    predictions = []
    for topic_id, pool_docs in sorted(pooled.items()):
        unjudged = sorted(d for d in pool_docs if (topic_id, d) not in judged)
        if not unjudged:
            continue
        adapter_path = args.adapters / f"{topic_id}.adapter"
        if not adapter_path.exists():
            logger.warning("no adapter for topic %s, leaving %d documents unjudged", topic_id, len(unjudged))
            continue
        adapter, scorer = _load_adapter_with_scorer(adapter_path)
        predictions.extend(judge_pool(scorer, adapter, topics[topic_id], unjudged, docs))
    merged = merge_judgments(qrels, JudgmentSet(predictions, threshold=1))
    out.write_text(write_qrels(merged), encoding="utf-8")
    print(f"augmented qrels: {len(qrels)} ground-truth + {len(predictions)} predicted -> {out}")
    return 0


def _cmd_evaluate(args) -> int:
    runs = load_run(args.runs)
    truth = load_qrels(args.qrels_truth)
    predicted = load_qrels(args.qrels_pred)
    depths = tuple(int(d) for d in args.depths.split(","))
    truth_vectors = system_means(runs, truth, depths)
    predicted_vectors = system_means(runs, predicted, depths)
    lines = []
    for depth in depths:
        try:
            rho = spearman_rho(predicted_vectors[depth], truth_vectors[depth])
            lines.append(f"spearman_rho@ndcg@{depth}\t{rho:.6f}")
        except UndefinedMetricError as exc:
            lines.append(f"spearman_rho@ndcg@{depth}\tundefined ({exc})")
    try:
        alpha = krippendorff_alpha_nominal(predicted, truth)
        lines.append(f"krippendorff_alpha\t{alpha:.6f}")
    except (UndefinedMetricError, ValueError) as exc:
        lines.append(f"krippendorff_alpha\tundefined ({exc})")
    report = "\n".join(lines)
    print(report)
    if args.out is not None:
        args.out.write_text(report + "\n", encoding="utf-8")
    return 0


def _cmd_simulate(args) -> int:
    config = ExperimentConfig.from_yaml(_require(args.config, "--config"))
    report = run_experiment_shallow(config)
    out = args.out or run_directory("runs", config)
    write_report(report, out)
    print(f"shallow simulation report written to {out}")
    for row in report.bootstrap_rows:
        k = "" if row.k is None else f" k={row.k}"
        print(
            f"method={row.method}{k} rate={row.rate:g} depth={row.depth}: "
            f"mean rho={row.mean_rho:.4f} (std {row.std_rho:.4f}, n={row.n_seeds})"
        )
    return 0


def _cmd_compare(args) -> int:
    config = ExperimentConfig.from_yaml(_require(args.config, "--config"))
    report = run_experiment_llm_compare(config)
    out = args.out or run_directory("runs", config)
    write_report(report, out)
    print(f"comparison report written to {out}")
    for row in report.rows:
        rhos = " ".join(
            f"rho@{depth}={'none' if value is None else format(value, '.4f')}"
            for depth, value in sorted(row.rho.items())
        )
        alpha = "none" if row.alpha is None else f"{row.alpha:.4f}"
        print(f"{row.approach}: {rhos} alpha={alpha} abstained={row.n_abstained}")
    return 0


def _cmd_inspect_adapter(args) -> int:
    adapter = load_adapter(args.adapter.read_bytes())
    info = {
        "topic_id": adapter.topic_id,
        "base_model_id": adapter.base_model_id,
        "rank": adapter.rank,
        "alpha": adapter.alpha,
        "layers": [
            {"name": layer.name, "rank": layer.rank, "shape": [layer.d_out, layer.d_in]}
            for layer in adapter.layers
        ],
        "trainable_parameters": adapter.num_parameters(),
        "provenance": adapter.provenance,
        "usage_restriction": adapter.usage_restriction,
    }
    print(json.dumps(info, sort_keys=True, indent=2))
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "augment": _cmd_augment,
    "evaluate": _cmd_evaluate,
    "simulate": _cmd_simulate,
    "compare": _cmd_compare,
    "inspect-adapter": _cmd_inspect_adapter,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except TopicJudgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
