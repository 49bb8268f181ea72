"""TREC-style judgment, run, and topic file handling.

File formats:

* qrels:  ``topic iteration doc grade``, whitespace separated, one judgment
  per line. The iteration field is ignored on input and written as ``0``.
* run:    ``topic Q0 doc rank score tag``, the standard 6-column format.
* topics: ``topic_id<TAB>query text``, one topic per line.

Writers emit LF line endings and single-space separators. File loaders decode
UTF-8 with a lossy fallback, since historical TREC files predate consistent
encodings.

Rankings are canonically re-sorted by (score descending, doc_id descending)
regardless of the stated rank field, mirroring the de-facto trec_eval tie
convention; stated ranks are kept for diagnostics only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import DuplicateEntryError, ParseError, UnknownDocumentError

SOURCES = ("human", "adapter", "llm", "zero_fill")
PREDICTED_SOURCES = ("adapter", "llm", "zero_fill")
DEFAULT_BINARIZATION_THRESHOLD = 1


@dataclass(frozen=True)
class Topic:
    """A topic identifier together with its query text."""

    topic_id: str
    query_text: str

    def __post_init__(self) -> None:
        if not self.topic_id:
            raise ValueError("topic_id must be non-empty")


@dataclass(frozen=True)
class Judgment:
    """One relevance judgment for a (topic, document) pair."""

    topic_id: str
    doc_id: str
    grade: int
    source: str = "human"

    def __post_init__(self) -> None:
        if self.grade < 0:
            raise ValueError(f"grade must be >= 0, got {self.grade}")
        if self.source not in SOURCES:
            raise ValueError(f"unknown judgment source {self.source!r}")


class JudgmentSet:
    """Immutable per-(topic, doc) judgments plus a binarization rule.

    A grade of at least ``threshold`` counts as relevant. At most one entry
    may exist per (topic_id, doc_id) key. Judgment sets are partial by
    nature: a topic's judged documents are a small sample of the corpus
    (documented, not enforced).
    """

    __slots__ = ("_entries", "threshold")

    def __init__(self, judgments: Iterable[Judgment] = (), threshold: int = DEFAULT_BINARIZATION_THRESHOLD):
        if threshold < 0:
            raise ValueError("binarization threshold must be >= 0")
        entries: dict[tuple[str, str], Judgment] = {}
        for judgment in judgments:
            key = (judgment.topic_id, judgment.doc_id)
            if key in entries:
                raise DuplicateEntryError(f"duplicate judgment for topic {key[0]!r}, doc {key[1]!r}")
            entries[key] = judgment
        self._entries = entries
        self.threshold = threshold

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[Judgment]:
        for key in sorted(self._entries):
            yield self._entries[key]

    def __contains__(self, key: tuple[str, str]) -> bool:
        return key in self._entries

    def keys(self) -> frozenset[tuple[str, str]]:
        return frozenset(self._entries)

    def get(self, topic_id: str, doc_id: str) -> Judgment | None:
        return self._entries.get((topic_id, doc_id))

    def binary_label(self, judgment: Judgment) -> int:
        return int(judgment.grade >= self.threshold)

    def is_relevant(self, topic_id: str, doc_id: str) -> bool:
        judgment = self._entries.get((topic_id, doc_id))
        if judgment is None:
            raise KeyError((topic_id, doc_id))
        return judgment.grade >= self.threshold

    def topic_ids(self) -> tuple[str, ...]:
        return tuple(sorted({t for t, _ in self._entries}))

    def doc_ids(self, topic_id: str) -> tuple[str, ...]:
        return tuple(sorted(d for t, d in self._entries if t == topic_id))

    def for_topic(self, topic_id: str) -> "JudgmentSet":
        return JudgmentSet(
            (j for (t, _), j in self._entries.items() if t == topic_id),
            threshold=self.threshold,
        )

    def restrict(self, keys: Iterable[tuple[str, str]]) -> "JudgmentSet":
        """Judgments whose (topic, doc) key is in ``keys``."""
        wanted = set(keys)
        return JudgmentSet(
            (j for key, j in self._entries.items() if key in wanted),
            threshold=self.threshold,
        )

    def counts(self, topic_id: str) -> tuple[int, int]:
        """(relevant, non-relevant) counts for one topic."""
        relevant = 0
        nonrelevant = 0
        for (t, _), judgment in self._entries.items():
            if t != topic_id:
                continue
            if judgment.grade >= self.threshold:
                relevant += 1
            else:
                nonrelevant += 1
        return relevant, nonrelevant

    def relevant_count(self, topic_id: str) -> int:
        return self.counts(topic_id)[0]

    def with_threshold(self, threshold: int) -> "JudgmentSet":
        return JudgmentSet(self._entries.values(), threshold=threshold)

    def same_entries(self, other: "JudgmentSet") -> bool:
        """True if both sets hold identical (topic, doc, grade) triples."""
        if len(self) != len(other):
            return False
        for key, judgment in self._entries.items():
            theirs = other._entries.get(key)
            if theirs is None or theirs.grade != judgment.grade:
                return False
        return True


@dataclass(frozen=True)
class RunPosting:
    """One retrieved document with its score and the rank stated in the file."""

    doc_id: str
    score: float
    stated_rank: int


def _canonical_order(postings: list[RunPosting]) -> tuple[RunPosting, ...]:
    ordered = sorted(postings, key=lambda p: p.doc_id, reverse=True)
    ordered.sort(key=lambda p: p.score, reverse=True)
    return tuple(ordered)


class RunSet:
    """Ranked retrieval outputs per run tag and topic, canonically ordered."""

    __slots__ = ("_runs",)

    def __init__(self, postings: Mapping[str, Mapping[str, Iterable[RunPosting]]]):
        runs: dict[str, dict[str, tuple[RunPosting, ...]]] = {}
        for tag, per_topic in postings.items():
            runs[tag] = {}
            for topic_id, items in per_topic.items():
                items = list(items)
                seen = set()
                for posting in items:
                    if posting.doc_id in seen:
                        raise DuplicateEntryError(
                            f"duplicate doc {posting.doc_id!r} in run {tag!r}, topic {topic_id!r}"
                        )
                    seen.add(posting.doc_id)
                runs[tag][topic_id] = _canonical_order(items)
        self._runs = runs

    @classmethod
    def from_scores(cls, scores: Mapping[str, Mapping[str, Iterable[tuple[str, float]]]]) -> "RunSet":
        """Build a RunSet from (doc_id, score) pairs, assigning stated ranks by score."""
        postings: dict[str, dict[str, list[RunPosting]]] = {}
        for tag, per_topic in scores.items():
            postings[tag] = {}
            for topic_id, pairs in per_topic.items():
                ordered = _canonical_order(
                    [RunPosting(doc_id, float(score), 0) for doc_id, score in pairs]
                )
                postings[tag][topic_id] = [
                    RunPosting(p.doc_id, p.score, rank)
                    for rank, p in enumerate(ordered, start=1)
                ]
        return cls(postings)

    def __len__(self) -> int:
        return len(self._runs)

    def run_tags(self) -> tuple[str, ...]:
        return tuple(sorted(self._runs))

    def topic_ids(self) -> tuple[str, ...]:
        topics: set[str] = set()
        for per_topic in self._runs.values():
            topics.update(per_topic)
        return tuple(sorted(topics))

    def postings(self, run_tag: str, topic_id: str) -> tuple[RunPosting, ...]:
        return self._runs.get(run_tag, {}).get(topic_id, ())

    def ranking(self, run_tag: str, topic_id: str) -> tuple[str, ...]:
        return tuple(p.doc_id for p in self.postings(run_tag, topic_id))

    def top_docs(self, run_tag: str, topic_id: str, depth: int) -> tuple[str, ...]:
        return self.ranking(run_tag, topic_id)[:depth]

    def restrict_runs(self, run_tags: Iterable[str]) -> "RunSet":
        wanted = set(run_tags)
        missing = wanted - set(self._runs)
        if missing:
            raise KeyError(f"unknown run tags: {sorted(missing)}")
        return RunSet({tag: self._runs[tag] for tag in wanted})

    def same_rankings(self, other: "RunSet") -> bool:
        if self.run_tags() != other.run_tags():
            return False
        for tag in self.run_tags():
            if set(self._runs[tag]) != set(other._runs[tag]):
                return False
            for topic_id in self._runs[tag]:
                if self.ranking(tag, topic_id) != other.ranking(tag, topic_id):
                    return False
        return True


class DocumentStore:
    """In-memory doc_id to document text mapping."""

    __slots__ = ("_docs",)

    def __init__(self, docs: Mapping[str, str] | Iterable[tuple[str, str]] = ()):
        self._docs = dict(docs.items() if isinstance(docs, Mapping) else docs)

    def __len__(self) -> int:
        return len(self._docs)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    def get(self, doc_id: str) -> str | None:
        return self._docs.get(doc_id)

    def require(self, doc_id: str) -> str:
        try:
            return self._docs[doc_id]
        except KeyError:
            raise UnknownDocumentError(f"doc_id {doc_id!r} not found in document store") from None

    def doc_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._docs))

    def items(self) -> Iterator[tuple[str, str]]:
        for doc_id in sorted(self._docs):
            yield doc_id, self._docs[doc_id]

    @classmethod
    def from_jsonl(cls, lines: Iterable[str]) -> "DocumentStore":
        docs = {}
        for line in lines:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            docs[record["doc_id"]] = record["text"]
        return cls(docs)

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps({"doc_id": doc_id, "text": text}, sort_keys=True) + "\n"
            for doc_id, text in self.items()
        )


def _lines(stream: Iterable[str] | str) -> Iterator[tuple[int, str]]:
    if isinstance(stream, str):
        stream = stream.splitlines()
    for line_no, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if line.strip():
            yield line_no, line


def parse_qrels(
    stream: Iterable[str] | str,
    binarization_threshold: int = DEFAULT_BINARIZATION_THRESHOLD,
) -> JudgmentSet:
    """Parse a qrels stream into a JudgmentSet with the given binarization rule.

    Each non-empty line must have at least four whitespace-separated fields:
    topic_id, iteration (ignored), doc_id, grade. Duplicate (topic, doc) lines
    and malformed lines are errors.
    """
    judgments: dict[tuple[str, str], Judgment] = {}
    for line_no, line in _lines(stream):
        fields = line.split()
        if len(fields) < 4:
            raise ParseError(f"expected >= 4 fields, got {len(fields)}: {line!r}", line_no)
        topic_id, _, doc_id, grade_text = fields[0], fields[1], fields[2], fields[3]
        try:
            grade = int(grade_text)
        except ValueError:
            raise ParseError(f"non-integer grade {grade_text!r}", line_no) from None
        if grade < 0:
            raise ParseError(f"negative grade {grade}", line_no)
        key = (topic_id, doc_id)
        if key in judgments:
            raise DuplicateEntryError(
                f"line {line_no}: duplicate judgment for topic {topic_id!r}, doc {doc_id!r}"
            )
        judgments[key] = Judgment(topic_id, doc_id, grade, source="human")
    return JudgmentSet(judgments.values(), threshold=binarization_threshold)


def parse_run(stream: Iterable[str] | str) -> RunSet:
    """Parse a 6-column run stream into a RunSet.

    The stated rank field is recorded but rankings are re-sorted canonically,
    so any permutation of input lines yields the same RunSet.
    """
    postings: dict[str, dict[str, list[RunPosting]]] = {}
    seen: set[tuple[str, str, str]] = set()
    for line_no, line in _lines(stream):
        fields = line.split()
        if len(fields) != 6:
            raise ParseError(f"expected 6 fields, got {len(fields)}: {line!r}", line_no)
        topic_id, _, doc_id, rank_text, score_text, run_tag = fields
        try:
            rank = int(rank_text)
        except ValueError:
            raise ParseError(f"non-integer rank {rank_text!r}", line_no) from None
        try:
            score = float(score_text)
        except ValueError:
            raise ParseError(f"non-numeric score {score_text!r}", line_no) from None
        key = (run_tag, topic_id, doc_id)
        if key in seen:
            raise DuplicateEntryError(
                f"line {line_no}: duplicate posting for run {run_tag!r}, "
                f"topic {topic_id!r}, doc {doc_id!r}"
            )
        seen.add(key)
        postings.setdefault(run_tag, {}).setdefault(topic_id, []).append(
            RunPosting(doc_id, score, rank)
        )
    return RunSet(postings)


def parse_topics(stream: Iterable[str] | str) -> list[Topic]:
    """Parse tab-separated ``topic_id<TAB>query text`` lines."""
    topics: list[Topic] = []
    seen: set[str] = set()
    for line_no, line in _lines(stream):
        parts = line.split("\t", 1)
        if len(parts) != 2:
            raise ParseError(f"expected 'topic_id<TAB>query', got {line!r}", line_no)
        topic_id, query_text = parts[0].strip(), parts[1].strip()
        if not topic_id:
            raise ParseError("empty topic_id", line_no)
        if topic_id in seen:
            raise DuplicateEntryError(f"line {line_no}: duplicate topic {topic_id!r}")
        seen.add(topic_id)
        topics.append(Topic(topic_id, query_text))
    return topics


def write_qrels(judgments: JudgmentSet) -> str:
    """Emit qrels text in canonical order (topic_id, then doc_id).

    Round trip: parsing the emitted text reproduces the input's
    (topic, doc, grade) entries exactly. Source labels are metadata and are
    not representable in the qrels format.
    """
    return "".join(
        f"{j.topic_id} 0 {j.doc_id} {j.grade}\n" for j in judgments
    )


def write_run(runs: RunSet) -> str:
    """Emit run text in canonical order with recomputed contiguous ranks."""
    lines = []
    for tag in runs.run_tags():
        topics = sorted(
            t for t in runs.topic_ids() if runs.postings(tag, t)
        )
        for topic_id in topics:
            for rank, posting in enumerate(runs.postings(tag, topic_id), start=1):
                lines.append(f"{topic_id} Q0 {posting.doc_id} {rank} {posting.score:.6f} {tag}\n")
    return "".join(lines)


def write_topics(topics: Iterable[Topic]) -> str:
    return "".join(f"{t.topic_id}\t{t.query_text}\n" for t in sorted(topics, key=lambda t: t.topic_id))


def load_qrels(path: str | Path, binarization_threshold: int = DEFAULT_BINARIZATION_THRESHOLD) -> JudgmentSet:
    with open(path, encoding="utf-8", errors="replace") as handle:
        return parse_qrels(handle, binarization_threshold)


def load_run(path: str | Path) -> RunSet:
    with open(path, encoding="utf-8", errors="replace") as handle:
        return parse_run(handle)


def load_topics(path: str | Path) -> list[Topic]:
    with open(path, encoding="utf-8", errors="replace") as handle:
        return parse_topics(handle)


def load_documents(path: str | Path) -> DocumentStore:
    with open(path, encoding="utf-8", errors="replace") as handle:
        return DocumentStore.from_jsonl(handle)


def merge_judgments(ground: JudgmentSet, predicted: JudgmentSet) -> JudgmentSet:
    """Union ground-truth and predicted judgments; ground truth wins on conflict.

    Predicted entries must carry a predicted source (adapter, llm, or
    zero_fill). If the two sets binarize at different thresholds, predicted
    grades are re-expressed on the ground scale (0 or ground.threshold) so
    binary semantics survive the merge.
    """
    merged: dict[tuple[str, str], Judgment] = {}
    rescale = predicted.threshold != ground.threshold
    for judgment in predicted:
        if judgment.source not in PREDICTED_SOURCES:
            raise ValueError(
                f"predicted judgment for ({judgment.topic_id}, {judgment.doc_id}) "
                f"has source {judgment.source!r}; expected one of {PREDICTED_SOURCES}"
            )
        if rescale:
            grade = ground.threshold if predicted.binary_label(judgment) else 0
            judgment = Judgment(judgment.topic_id, judgment.doc_id, grade, judgment.source)
        merged[(judgment.topic_id, judgment.doc_id)] = judgment
    for judgment in ground:
        merged[(judgment.topic_id, judgment.doc_id)] = judgment
    return JudgmentSet(merged.values(), threshold=ground.threshold)
