from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from topicjudge.seeding import make_rng
from topicjudge.trec_io import DocumentStore, Judgment, JudgmentSet, Topic


def make_marker_topic(
    topic_id: str = "t1",
    marker: str = "zebra",
    n_docs: int = 80,
    relevant_every: int = 8,
    seed: int = 1,
    doc_length: int = 30,
    vocab: int = 50,
):
    """A topic whose relevance is exactly the presence of a marker token."""
    rng = make_rng(seed)
    background = [f"w{i}" for i in range(vocab)]
    docs = {}
    judgments = []
    for i in range(n_docs):
        relevant = i % relevant_every == 0
        tokens = [background[int(j)] for j in rng.integers(0, vocab, doc_length)]
        if relevant:
            for slot in rng.integers(0, doc_length, 8):
                tokens[int(slot)] = marker
        doc_id = f"d{i:03d}"
        docs[doc_id] = " ".join(tokens)
        judgments.append(Judgment(topic_id, doc_id, int(relevant)))
    topic = Topic(topic_id, f"{marker} stripes habitat")
    return topic, DocumentStore(docs), JudgmentSet(judgments, threshold=1)


@pytest.fixture
def marker_topic():
    return make_marker_topic()
