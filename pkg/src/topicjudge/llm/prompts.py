"""Prompt assembly and response casting for LLM relevance judging.

Template texts ship as editable config assets (see the ``templates``
directory) rather than being hard-coded; the template_id recorded in every
transcript pins which asset produced a judgment. The packaged texts are
working placeholders meant to be swapped for an operator's preferred wording.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..errors import LeakageError, PromptError, ResponseCastError
from ..seeding import derive_seed, make_rng
from ..trec_io import DocumentStore, JudgmentSet, Topic

TEMPLATE_IDS = ("umbrela_graded", "binary_direct")
OUTPUT_SCALES = ("graded_0_3", "binary")
DEFAULT_SCALES = {"umbrela_graded": "graded_0_3", "binary_direct": "binary"}
PLACEHOLDERS = ("{query}", "{passage}", "{examples}")
EXAMPLES_PER_CLASS = 4

_GRADE_RE = re.compile(r"\b([0-3])\b")
_YESNO_RE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)
_BINARY_DIGIT_RE = re.compile(r"\b([01])\b")


@dataclass(frozen=True)
class PromptTemplate:
    """A judging prompt with query/passage/examples placeholders."""

    template_id: str
    template_text: str
    output_scale: str

    def __post_init__(self) -> None:
        if self.output_scale not in OUTPUT_SCALES:
            raise PromptError(
                f"output_scale must be one of {OUTPUT_SCALES}, got {self.output_scale!r}"
            )
        for placeholder in PLACEHOLDERS:
            if placeholder not in self.template_text:
                raise PromptError(
                    f"template {self.template_id!r} is missing placeholder {placeholder}"
                )

    @classmethod
    def load(cls, template_id: str, directory: str | Path | None = None) -> "PromptTemplate":
        """Load a template asset by id, from a directory or the packaged defaults."""
        if directory is not None:
            text = Path(directory, f"{template_id}.txt").read_text(encoding="utf-8")
        else:
            asset = resources.files(__package__) / "templates" / f"{template_id}.txt"
            text = asset.read_text(encoding="utf-8")
        scale = DEFAULT_SCALES.get(template_id)
        if scale is None:
            raise PromptError(f"no output scale known for template {template_id!r}")
        return cls(template_id=template_id, template_text=text, output_scale=scale)


@dataclass(frozen=True)
class FewShotExample:
    doc_id: str
    passage: str
    label: int


@dataclass(frozen=True)
class FewShotBlock:
    """Exactly 4 relevant and 4 non-relevant examples from one topic's training split."""

    topic_id: str
    examples: tuple[FewShotExample, ...]
    order_seed: int
    train_keys: frozenset[tuple[str, str]] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        relevant = sum(1 for e in self.examples if e.label == 1)
        nonrelevant = len(self.examples) - relevant
        if relevant != EXAMPLES_PER_CLASS or nonrelevant != EXAMPLES_PER_CLASS:
            raise PromptError(
                f"few-shot block needs exactly {EXAMPLES_PER_CLASS} relevant and "
                f"{EXAMPLES_PER_CLASS} non-relevant examples, got {relevant} and {nonrelevant}"
            )

    def verify_no_leakage(self) -> None:
        for example in self.examples:
            if (self.topic_id, example.doc_id) not in self.train_keys:
                raise LeakageError(
                    f"few-shot example {example.doc_id!r} is not in the training "
                    f"split of topic {self.topic_id!r}"
                )

    @classmethod
    def from_training_split(
        cls,
        train: JudgmentSet,
        docs: DocumentStore,
        topic_id: str,
        order_seed: int,
    ) -> "FewShotBlock":
        relevant = []
        nonrelevant = []
        for judgment in train:
            if judgment.topic_id != topic_id:
                continue
            bucket = relevant if train.binary_label(judgment) else nonrelevant
            bucket.append(judgment.doc_id)
        if len(relevant) < EXAMPLES_PER_CLASS or len(nonrelevant) < EXAMPLES_PER_CLASS:
            raise PromptError(
                f"topic {topic_id!r}: training split has {len(relevant)} relevant and "
                f"{len(nonrelevant)} non-relevant documents, need {EXAMPLES_PER_CLASS} of each"
            )
        rng = make_rng(derive_seed(order_seed, "fewshot_sample", topic_id))
        examples = []
        for doc_ids, label in ((sorted(relevant), 1), (sorted(nonrelevant), 0)):
            order = rng.permutation(len(doc_ids))
            for i in order[:EXAMPLES_PER_CLASS]:
                examples.append(FewShotExample(doc_ids[i], docs.require(doc_ids[i]), label))
        return cls(
            topic_id=topic_id,
            examples=tuple(examples),
            order_seed=order_seed,
            train_keys=frozenset((topic_id, d) for d in train.doc_ids(topic_id)),
        )


@dataclass(frozen=True)
class RenderedPrompt:
    text: str
    truncated: bool


def _render_answer(label: int, scale: str) -> str:
    if scale == "graded_0_3":
        return "3" if label == 1 else "0"
    return "yes" if label == 1 else "no"


def _truncate(text: str, budget: int) -> tuple[str, bool]:
    tokens = text.split()
    if len(tokens) <= budget:
        return text, False
    return " ".join(tokens[:budget]), True


def build_prompt(
    template: PromptTemplate,
    topic: Topic,
    doc_text: str,
    fewshot: FewShotBlock | None = None,
    doc_token_budget: int = 512,
) -> RenderedPrompt:
    """Render a prompt deterministically; example order is a seeded shuffle.

    The no-leakage contract is asserted here: every few-shot example must
    belong to this topic's training split.
    """
    example_block = ""
    truncated = False
    if fewshot is not None:
        if fewshot.topic_id != topic.topic_id:
            raise LeakageError(
                f"few-shot block is for topic {fewshot.topic_id!r}, "
                f"prompt is for topic {topic.topic_id!r}"
            )
        fewshot.verify_no_leakage()
        rng = make_rng(derive_seed(fewshot.order_seed, "fewshot_order", topic.topic_id))
        order = rng.permutation(len(fewshot.examples))
        parts = []
        for index in order:
            example = fewshot.examples[index]
            passage, was_truncated = _truncate(example.passage, doc_token_budget)
            truncated = truncated or was_truncated
            parts.append(
                "Example:\n"
                f"Query: {topic.query_text}\n"
                f"Passage: {passage}\n"
                f"Answer: {_render_answer(example.label, template.output_scale)}"
            )
        example_block = "\n" + "\n\n".join(parts) + "\n"

    passage, was_truncated = _truncate(doc_text, doc_token_budget)
    truncated = truncated or was_truncated
    text = (
        template.template_text.replace("{examples}", example_block)
        .replace("{query}", topic.query_text)
        .replace("{passage}", passage)
    )
    return RenderedPrompt(text=text, truncated=truncated)


def extract_grade(raw: str, scale: str) -> int:
    """Pull the verdict out of a raw response: final 0-3 grade, or yes/no/0/1."""
    if scale == "graded_0_3":
        matches = _GRADE_RE.findall(raw)
        if not matches:
            raise ResponseCastError(f"no grade 0-3 found in response {raw!r}", raw)
        return int(matches[-1])
    if scale == "binary":
        verdicts = _YESNO_RE.findall(raw)
        if verdicts:
            return int(verdicts[-1].lower() == "yes")
        digits = _BINARY_DIGIT_RE.findall(raw)
        if digits:
            return int(digits[-1])
        raise ResponseCastError(f"no yes/no or 0/1 verdict found in response {raw!r}", raw)
    raise ValueError(f"unknown output scale {scale!r}")


def cast_response(raw: str, scale: str, graded_threshold: int = 1) -> int:
    """Cast a raw response to a binary label.

    On the graded scale the extracted grade binarizes at
    ``graded_threshold``; on the binary scale the verdict is the label.
    """
    grade = extract_grade(raw, scale)
    if scale == "graded_0_3":
        return int(grade >= graded_threshold)
    return grade
