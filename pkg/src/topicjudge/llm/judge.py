"""Pool judging with an LLM: cache-first, bounded retries, abstention accounting.

Every request/response pair persists to the transcript cache before a label
is used, so reruns are idempotent and the full exchange is auditable.
Documents whose responses stay unparsable are recorded as abstentions and
surfaced to the caller; they are never silently counted as non-relevant.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

from ..errors import ResponseCastError, TransportError
from ..trec_io import DocumentStore, Judgment, JudgmentSet, Topic
from .cache import TranscriptCache
from .prompts import FewShotBlock, PromptTemplate, build_prompt, extract_grade

logger = logging.getLogger(__name__)

DEFAULT_GRADED_THRESHOLD = 1


@dataclass(frozen=True)
class LlmJudgeResult:
    """Labels plus the bookkeeping needed for honest reporting."""

    judgments: JudgmentSet
    abstentions: tuple[str, ...]
    network_calls: int
    cache_hits: int


def judge_pool_llm(
    client,
    template: PromptTemplate,
    topic: Topic,
    doc_ids,
    docs: DocumentStore,
    cache: TranscriptCache,
    fewshot: FewShotBlock | None = None,
    graded_threshold: int = DEFAULT_GRADED_THRESHOLD,
    max_attempts: int = 2,
    doc_token_budget: int = 512,
) -> LlmJudgeResult:
    """Label every document in the pool with the LLM, consulting the cache first.

    One entry per doc_id, assembled in doc_id order so the result is
    independent of completion timing. ``max_attempts`` bounds re-asks after
    unparsable responses; transport failures (including replay misses) become
    abstentions.
    """
    ordered = sorted(set(doc_ids))
    calls_before = getattr(client, "network_calls", 0)
    cache_hits = 0
    judgments: list[Judgment] = []
    abstentions: list[str] = []

    for doc_id in ordered:
        prompt = build_prompt(
            template, topic, docs.require(doc_id), fewshot, doc_token_budget
        )
        key = cache.key(client.model_id, template.template_id, prompt.text)
        record = cache.get(key)
        if record is not None:
            cache_hits += 1
            grade = record.get("grade")
        else:
            grade = None
            raw = None
            attempts = 0
            for _ in range(max_attempts):
                attempts += 1
                try:
                    raw = client.complete(prompt.text)
                except TransportError as exc:
                    logger.warning("topic %s doc %s: transport failure: %s", topic.topic_id, doc_id, exc)
                    break
                try:
                    grade = extract_grade(raw, template.output_scale)
                    break
                except ResponseCastError:
                    logger.warning(
                        "topic %s doc %s: unparsable response on attempt %d",
                        topic.topic_id,
                        doc_id,
                        attempts,
                    )
            if raw is not None:
                cache.put(
                    key,
                    {
                        "model_id": client.model_id,
                        "template_id": template.template_id,
                        "topic_id": topic.topic_id,
                        "doc_id": doc_id,
                        "prompt": prompt.text,
                        "prompt_truncated": prompt.truncated,
                        "response": raw,
                        "grade": grade,
                        "attempts": attempts,
                        "timestamp": time.time(),
                    },
                )
        if grade is None:
            abstentions.append(doc_id)
        else:
            judgments.append(Judgment(topic.topic_id, doc_id, int(grade), source="llm"))

    threshold = graded_threshold if template.output_scale == "graded_0_3" else 1
    result = LlmJudgeResult(
        judgments=JudgmentSet(judgments, threshold=threshold),
        abstentions=tuple(abstentions),
        network_calls=getattr(client, "network_calls", 0) - calls_before,
        cache_hits=cache_hits,
    )
    assert len(result.judgments) + len(result.abstentions) == len(ordered)
    return result
