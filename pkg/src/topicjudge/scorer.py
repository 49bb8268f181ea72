"""Pointwise relevance scorers.

``ReferenceScorer`` is a small deterministic model: hashed character n-gram
bags for query and document feed a two-layer network with a tanh hidden
activation and a sigmoid output. It exists so the whole training and
evaluation pipeline runs on a plain CPU with no pretrained checkpoint.

Pretrained rankers (bi-encoders, cross-encoders, mono-decoders) attach
through ``ExternalScorer``, which speaks a line-delimited JSON protocol to a
child process: one request object per line carrying query, document, and an
optional adapter reference; one response object per line carrying a score in
[0, 1].
"""

from __future__ import annotations

import json
import math
import os
import re
import select
import subprocess
import zlib
from typing import Sequence

import numpy as np

from .errors import ScorerProtocolError
from .lora import LowRankAdapter
from .seeding import derive_seed, make_rng

ARCHETYPES = ("bi_encoder", "cross_encoder", "mono_decoder", "reference")
DEFAULT_MAX_SEQUENCE_TOKENS = 512

_BASE_MODEL_ID_PATTERN = re.compile(
    r"^reference-ngram-mlp/d(?P<d>\d+)-h(?P<h>\d+)-t(?P<t>\d+)-s(?P<s>\d+)$"
)


def truncate_to_budget(query_text: str, doc_text: str, max_tokens: int) -> tuple[str, bool]:
    """Trim the document tail so query plus document fit the token budget."""
    query_tokens = query_text.split()
    doc_tokens = doc_text.split()
    budget = max(0, max_tokens - len(query_tokens))
    if len(doc_tokens) <= budget:
        return doc_text, False
    return " ".join(doc_tokens[:budget]), True


class HashedNgramFeaturizer:
    """Character n-gram bags hashed into a fixed-width, L2-normalized vector.

    Hashing uses crc32 salted by the n-gram length, so features are
    deterministic across runs and platforms.
    """

    def __init__(self, feature_dim: int = 384, ngram_sizes: tuple[int, ...] = (3, 4, 5)):
        if feature_dim < 8:
            raise ValueError(f"feature_dim must be >= 8, got {feature_dim}")
        self.feature_dim = feature_dim
        self.ngram_sizes = ngram_sizes

    def vector(self, text: str) -> np.ndarray:
        counts = np.zeros(self.feature_dim)
        normalized = " " + " ".join(text.lower().split()) + " "
        encoded = normalized.encode("utf-8")
        for n in self.ngram_sizes:
            for start in range(len(encoded) - n + 1):
                index = zlib.crc32(encoded[start : start + n], n) % self.feature_dim
                counts[index] += 1.0
        norm = math.sqrt(float(np.dot(counts, counts)))
        if norm > 0.0:
            counts /= norm
        return counts


class PointwiseScorer:
    """Scores (query, document) pairs in [0, 1]."""

    archetype: str = "reference"
    base_model_id: str = "unknown"

    def score(self, query_text: str, doc_text: str) -> float:
        raise NotImplementedError

    def score_batch(self, query_text: str, doc_texts: Sequence[str]) -> np.ndarray:
        return np.array([self.score(query_text, doc) for doc in doc_texts])


class ReferenceScorer(PointwiseScorer):
    """Deterministic n-gram MLP scorer with enumerable adaptable sublayers.

    Input features are the query bag, the (tail-truncated) document bag, and
    their elementwise product; the two linear sublayers ``dense1`` and
    ``dense2`` are the adapter attachment points.
    """

    archetype = "reference"

    def __init__(
        self,
        feature_dim: int = 384,
        hidden_dim: int = 96,
        max_sequence_tokens: int = DEFAULT_MAX_SEQUENCE_TOKENS,
        init_seed: int = 0,
        base_model_id: str | None = None,
    ):
        if hidden_dim < 2:
            raise ValueError(f"hidden_dim must be >= 2, got {hidden_dim}")
        self.feature_dim = feature_dim
        self.hidden_dim = hidden_dim
        self.max_sequence_tokens = max_sequence_tokens
        self.init_seed = init_seed
        self.input_dim = 3 * feature_dim
        self.featurizer = HashedNgramFeaturizer(feature_dim)
        self.base_model_id = base_model_id or (
            f"reference-ngram-mlp/d{feature_dim}-h{hidden_dim}-t{max_sequence_tokens}-s{init_seed}"
        )
        rng = make_rng(derive_seed(init_seed, "reference_scorer_init"))
        self.w1 = rng.normal(0.0, 1.0 / math.sqrt(self.input_dim), size=(hidden_dim, self.input_dim))
        self.b1 = np.zeros(hidden_dim)
        self.w2 = rng.normal(0.0, 1.0 / math.sqrt(hidden_dim), size=(1, hidden_dim))
        self.b2 = np.zeros(1)
        self._doc_vector_cache: dict[tuple[int, str], np.ndarray] = {}

    @classmethod
    def from_base_model_id(cls, base_model_id: str) -> "ReferenceScorer":
        """Rebuild the scorer whose parameters are encoded in its model id."""
        match = _BASE_MODEL_ID_PATTERN.match(base_model_id)
        if match is None:
            raise ValueError(f"not a reference scorer model id: {base_model_id!r}")
        return cls(
            feature_dim=int(match.group("d")),
            hidden_dim=int(match.group("h")),
            max_sequence_tokens=int(match.group("t")),
            init_seed=int(match.group("s")),
        )

    def linear_layer_shapes(self) -> tuple[tuple[str, tuple[int, int]], ...]:
        """Adaptable linear sublayers as (name, (d_out, d_in)) pairs."""
        return (
            ("dense1", (self.hidden_dim, self.input_dim)),
            ("dense2", (1, self.hidden_dim)),
        )

    def base_weights(self) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        return {"dense1": (self.w1, self.b1), "dense2": (self.w2, self.b2)}

    def num_trainable_parameters(self) -> int:
        return self.w1.size + self.b1.size + self.w2.size + self.b2.size

    def weight_fingerprint(self) -> str:
        """SHA-256 over all base weights; used to assert the base stays frozen."""
        import hashlib

        digest = hashlib.sha256()
        for array in (self.w1, self.b1, self.w2, self.b2):
            digest.update(np.ascontiguousarray(array).tobytes())
        return digest.hexdigest()

    def clear_cache(self) -> None:
        self._doc_vector_cache.clear()

    def _doc_vector(self, budget: int, doc_text: str) -> np.ndarray:
        key = (budget, doc_text)
        cached = self._doc_vector_cache.get(key)
        if cached is None:
            tokens = doc_text.split()
            if len(tokens) > budget:
                doc_text = " ".join(tokens[:budget])
            cached = self.featurizer.vector(doc_text)
            self._doc_vector_cache[key] = cached
        return cached

    def features(self, query_text: str, doc_texts: Sequence[str]) -> np.ndarray:
        """Feature matrix (n, 3 * feature_dim) for one query and many documents."""
        query_vector = self.featurizer.vector(query_text)
        budget = max(0, self.max_sequence_tokens - len(query_text.split()))
        rows = np.empty((len(doc_texts), self.input_dim))
        for i, doc_text in enumerate(doc_texts):
            doc_vector = self._doc_vector(budget, doc_text)
            rows[i, : self.feature_dim] = query_vector
            rows[i, self.feature_dim : 2 * self.feature_dim] = doc_vector
            rows[i, 2 * self.feature_dim :] = query_vector * doc_vector
        return rows

    def forward_features(
        self,
        features: np.ndarray,
        adapter: LowRankAdapter | None = None,
        weight_override: dict[str, tuple[np.ndarray, np.ndarray]] | None = None,
        return_cache: bool = False,
    ):
        """Forward pass over a feature matrix; optionally keep activations.

        ``adapter`` applies low-rank deltas on top of the frozen base;
        ``weight_override`` replaces the base weights entirely (the native
        finetuning path). The two are mutually exclusive.
        """
        if adapter is not None and weight_override is not None:
            raise ValueError("pass either an adapter or a weight override, not both")
        weights = weight_override or self.base_weights()
        w1, b1 = weights["dense1"]
        w2, b2 = weights["dense2"]

        u1 = u2 = None
        pre_hidden = features @ w1.T + b1
        if adapter is not None:
            layer = adapter.layer("dense1")
            u1 = features @ layer.a.T
            pre_hidden = pre_hidden + adapter.layer_scale(layer) * (u1 @ layer.b.T)
        hidden = np.tanh(pre_hidden)
        logits = hidden @ w2.T + b2
        if adapter is not None:
            layer = adapter.layer("dense2")
            u2 = hidden @ layer.a.T
            logits = logits + adapter.layer_scale(layer) * (u2 @ layer.b.T)
        logits = logits[:, 0]
        scores = 1.0 / (1.0 + np.exp(-logits))
        if not return_cache:
            return scores
        cache = {
            "features": features,
            "u1": u1,
            "hidden": hidden,
            "u2": u2,
            "scores": scores,
        }
        return scores, cache

    def score_batch(
        self,
        query_text: str,
        doc_texts: Sequence[str],
        adapter: LowRankAdapter | None = None,
        weight_override: dict[str, tuple[np.ndarray, np.ndarray]] | None = None,
    ) -> np.ndarray:
        features = self.features(query_text, doc_texts)
        return self.forward_features(features, adapter=adapter, weight_override=weight_override)

    def score(
        self,
        query_text: str,
        doc_text: str,
        adapter: LowRankAdapter | None = None,
        weight_override: dict[str, tuple[np.ndarray, np.ndarray]] | None = None,
    ) -> float:
        return float(self.score_batch(query_text, [doc_text], adapter, weight_override)[0])


class ExternalScorer(PointwiseScorer):
    """Bridge to a pretrained scorer running as a child process.

    Requests are single JSON lines ``{"query": ..., "doc": ..., "adapter":
    optional reference}``; responses are single JSON lines ``{"score": x}``
    with x in [0, 1], or ``{"error": ...}``. Timeouts and malformed responses
    raise ScorerProtocolError.
    """

    def __init__(
        self,
        command: Sequence[str],
        base_model_id: str,
        archetype: str,
        timeout: float = 30.0,
    ):
        if archetype not in ARCHETYPES:
            raise ValueError(f"archetype must be one of {ARCHETYPES}, got {archetype!r}")
        self.command = list(command)
        self.base_model_id = base_model_id
        self.archetype = archetype
        self.timeout = timeout
        self._process: subprocess.Popen | None = None
        self._buffer = b""

    def _ensure_process(self) -> subprocess.Popen:
        if self._process is None or self._process.poll() is not None:
            self._process = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
            self._buffer = b""
        return self._process

    def _read_line(self, process: subprocess.Popen) -> bytes:
        stdout = process.stdout
        assert stdout is not None
        while b"\n" not in self._buffer:
            ready, _, _ = select.select([stdout], [], [], self.timeout)
            if not ready:
                raise ScorerProtocolError(
                    f"external scorer timed out after {self.timeout}s"
                )
            chunk = os.read(stdout.fileno(), 65536)
            if not chunk:
                raise ScorerProtocolError("external scorer closed its output stream")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line

    def score(self, query_text: str, doc_text: str, adapter_ref: str | None = None) -> float:
        process = self._ensure_process()
        request = {"query": query_text, "doc": doc_text}
        if adapter_ref is not None:
            request["adapter"] = adapter_ref
        stdin = process.stdin
        assert stdin is not None
        try:
            stdin.write((json.dumps(request) + "\n").encode("utf-8"))
            stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ScorerProtocolError(f"external scorer pipe failed: {exc}") from exc
        line = self._read_line(process)
        try:
            response = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ScorerProtocolError(f"malformed scorer response {line!r}") from exc
        if "error" in response:
            raise ScorerProtocolError(f"external scorer error: {response['error']}")
        if "score" not in response:
            raise ScorerProtocolError(f"scorer response missing score: {response!r}")
        value = float(response["score"])
        if not 0.0 <= value <= 1.0:
            raise ScorerProtocolError(f"scorer returned out-of-range score {value}")
        return value

    def score_batch(
        self, query_text: str, doc_texts: Sequence[str], adapter_ref: str | None = None
    ) -> np.ndarray:
        return np.array([self.score(query_text, doc, adapter_ref) for doc in doc_texts])

    def close(self) -> None:
        if self._process is not None:
            if self._process.stdin is not None:
                self._process.stdin.close()
            self._process.terminate()
            self._process.wait(timeout=5)
            self._process = None

    def __enter__(self) -> "ExternalScorer":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
