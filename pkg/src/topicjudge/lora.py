"""Low-rank weight adaptation.

A trained judge is distributed as a per-topic adapter: for each adapted
linear sublayer with weight W (d_out x d_in), the adapter holds A (r x d_in)
and B (d_out x r) and contributes the delta (alpha / r) * B @ A. B starts at
zero so a fresh adapter changes nothing. Layer ranks are clamped to
min(r, d_in, d_out); the scale uses the layer's effective rank.

Adapters serialize to a versioned, checksummed binary container with the
provenance and usage restriction embedded, so they can be shared without the
base model.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AdapterFormatError, BaseModelMismatchError

ADAPTER_MAGIC = b"TJAD"
ADAPTER_FORMAT_VERSION = 1

USAGE_RESTRICTION_TEMPLATE = (
    "This adapter encodes one assessor's notion of relevance for a single "
    "topic. It may only be used to judge whether documents are relevant to "
    "topic {topic_id} on base model {base_model_id}. Applying it to other "
    "topics, using it inside a retrieval system, or distilling from it is "
    "invalid use."
)


@dataclass
class AdapterLayer:
    """Low-rank delta for one linear sublayer: delta_W = scale * b @ a."""

    name: str
    a: np.ndarray  # (rank, d_in)
    b: np.ndarray  # (d_out, rank)
    rank: int

    def __post_init__(self) -> None:
        if self.a.ndim != 2 or self.b.ndim != 2:
            raise ValueError("adapter matrices must be 2-d")
        if self.a.shape[0] != self.rank or self.b.shape[1] != self.rank:
            raise ValueError(
                f"layer {self.name!r}: rank {self.rank} inconsistent with "
                f"A {self.a.shape} / B {self.b.shape}"
            )
        if self.rank > min(self.d_in, self.d_out):
            raise ValueError(
                f"layer {self.name!r}: rank {self.rank} exceeds min(d_in, d_out) "
                f"= {min(self.d_in, self.d_out)}"
            )

    @property
    def d_in(self) -> int:
        return self.a.shape[1]

    @property
    def d_out(self) -> int:
        return self.b.shape[0]

    def num_parameters(self) -> int:
        return self.a.size + self.b.size


def fresh_layer(name: str, d_out: int, d_in: int, rank: int, rng: np.random.Generator) -> AdapterLayer:
    """New adapter layer: A random at weight-init scale, B all zeros (zero delta)."""
    effective_rank = min(rank, d_in, d_out)
    a = rng.normal(0.0, 1.0 / math.sqrt(d_in), size=(effective_rank, d_in))
    b = np.zeros((d_out, effective_rank))
    return AdapterLayer(name=name, a=a, b=b, rank=effective_rank)


def lora_scale(alpha: float, rank: int) -> float:
    return alpha / rank


def lora_delta(layer: AdapterLayer, alpha: float) -> np.ndarray:
    return lora_scale(alpha, layer.rank) * (layer.b @ layer.a)


def lora_forward(weight: np.ndarray, layer: AdapterLayer, alpha: float, x: np.ndarray) -> np.ndarray:
    """W @ x plus the scaled low-rank correction.

    ``x`` may be a single input vector (d_in,) or a batch of row vectors
    (n, d_in); the result has the matching shape.
    """
    if weight.ndim != 2:
        raise ValueError(f"weight must be 2-d, got shape {weight.shape}")
    if weight.shape != (layer.d_out, layer.d_in):
        raise ValueError(
            f"layer {layer.name!r}: weight shape {weight.shape} does not match "
            f"adapter ({layer.d_out}, {layer.d_in})"
        )
    scale = lora_scale(alpha, layer.rank)
    if x.ndim == 1:
        if x.shape[0] != layer.d_in:
            raise ValueError(f"input length {x.shape[0]} != d_in {layer.d_in}")
        return weight @ x + scale * (layer.b @ (layer.a @ x))
    if x.ndim == 2:
        if x.shape[1] != layer.d_in:
            raise ValueError(f"input width {x.shape[1]} != d_in {layer.d_in}")
        return x @ weight.T + scale * ((x @ layer.a.T) @ layer.b.T)
    raise ValueError(f"input must be 1-d or 2-d, got shape {x.shape}")


def merge_adapter(weight: np.ndarray, layer: AdapterLayer, alpha: float) -> np.ndarray:
    """Fold the adapter into the weight: W' = W + (alpha / r) * B @ A."""
    if weight.shape != (layer.d_out, layer.d_in):
        raise ValueError(
            f"layer {layer.name!r}: weight shape {weight.shape} does not match "
            f"adapter ({layer.d_out}, {layer.d_in})"
        )
    return weight + lora_delta(layer, alpha)


@dataclass
class LowRankAdapter:
    """A distributable per-topic judge: low-rank deltas plus provenance.

    ``rank`` and ``alpha`` are the configured values; a layer whose rank had
    to be clamped below ``rank`` carries a proportionally reduced effective
    alpha, so every layer applies the same alpha / rank multiplier and the
    delta magnitude stays independent of the clamping.

    Adapters of different topics share no parameters; the topic and base
    model bindings are enforced at prediction time.
    """

    topic_id: str
    base_model_id: str
    rank: int
    alpha: float
    layers: tuple[AdapterLayer, ...]
    provenance: dict = field(default_factory=dict)

    def layer(self, name: str) -> AdapterLayer:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise KeyError(f"adapter has no layer {name!r}")

    def layer_alpha(self, layer: AdapterLayer) -> float:
        """Effective alpha for one layer: scaled down with a clamped rank."""
        return self.alpha * layer.rank / self.rank

    def layer_scale(self, layer: AdapterLayer) -> float:
        return lora_scale(self.layer_alpha(layer), layer.rank)

    def num_parameters(self) -> int:
        return sum(layer.num_parameters() for layer in self.layers)

    @property
    def usage_restriction(self) -> str:
        return USAGE_RESTRICTION_TEMPLATE.format(
            topic_id=self.topic_id, base_model_id=self.base_model_id
        )


def merge_into_weights(
    base_weights: dict[str, tuple[np.ndarray, np.ndarray]], adapter: LowRankAdapter
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Fold every adapter layer into a copy of the base weight set."""
    merged = {}
    for name, (weight, bias) in base_weights.items():
        try:
            layer = adapter.layer(name)
        except KeyError:
            merged[name] = (weight.copy(), bias.copy())
            continue
        merged[name] = (merge_adapter(weight, layer, adapter.layer_alpha(layer)), bias.copy())
    return merged


def _as_le_bytes(array: np.ndarray) -> bytes:
    return np.ascontiguousarray(array, dtype="<f8").tobytes()


def save_adapter(adapter: LowRankAdapter) -> bytes:
    """Serialize to the versioned binary container.

    Layout: magic, format version (u32 LE), header length (u32 LE), JSON
    header, per-layer A then B matrices as little-endian IEEE-754 float64,
    and a trailing SHA-256 checksum over everything before it.
    """
    header = {
        "format_version": ADAPTER_FORMAT_VERSION,
        "topic_id": adapter.topic_id,
        "base_model_id": adapter.base_model_id,
        "rank": adapter.rank,
        "alpha": adapter.alpha,
        "provenance": adapter.provenance,
        "usage_restriction": adapter.usage_restriction,
        "layers": [
            {
                "name": layer.name,
                "rank": layer.rank,
                "a_shape": list(layer.a.shape),
                "b_shape": list(layer.b.shape),
            }
            for layer in adapter.layers
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = b"".join(
        _as_le_bytes(layer.a) + _as_le_bytes(layer.b) for layer in adapter.layers
    )
    body = (
        ADAPTER_MAGIC
        + ADAPTER_FORMAT_VERSION.to_bytes(4, "little")
        + len(header_bytes).to_bytes(4, "little")
        + header_bytes
        + payload
    )
    return body + hashlib.sha256(body).digest()


def load_adapter(data: bytes, expected_base_model_id: str | None = None) -> LowRankAdapter:
    """Parse and verify adapter bytes.

    Raises AdapterFormatError on a bad magic, unsupported version, truncated
    payload, or checksum mismatch, and BaseModelMismatchError when an expected
    base model id is given and does not match.
    """
    if len(data) < 12 + 32:
        raise AdapterFormatError("adapter data too short")
    body, checksum = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != checksum:
        raise AdapterFormatError("adapter checksum mismatch; payload corrupted or tampered")
    if body[:4] != ADAPTER_MAGIC:
        raise AdapterFormatError(f"bad adapter magic {body[:4]!r}")
    version = int.from_bytes(body[4:8], "little")
    if version != ADAPTER_FORMAT_VERSION:
        raise AdapterFormatError(
            f"unsupported adapter format version {version}, expected {ADAPTER_FORMAT_VERSION}"
        )
    header_len = int.from_bytes(body[8:12], "little")
    try:
        header = json.loads(body[12 : 12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise AdapterFormatError(f"unreadable adapter header: {exc}") from exc

    if expected_base_model_id is not None and header["base_model_id"] != expected_base_model_id:
        raise BaseModelMismatchError(
            f"adapter was trained on base model {header['base_model_id']!r}, "
            f"cannot attach to {expected_base_model_id!r}"
        )

    offset = 12 + header_len
    layers = []
    for spec in header["layers"]:
        a_shape = tuple(spec["a_shape"])
        b_shape = tuple(spec["b_shape"])
        a_size = int(np.prod(a_shape)) * 8
        b_size = int(np.prod(b_shape)) * 8
        if offset + a_size + b_size > len(body):
            raise AdapterFormatError(f"truncated payload for layer {spec['name']!r}")
        a = np.frombuffer(body[offset : offset + a_size], dtype="<f8").reshape(a_shape).copy()
        offset += a_size
        b = np.frombuffer(body[offset : offset + b_size], dtype="<f8").reshape(b_shape).copy()
        offset += b_size
        layers.append(AdapterLayer(name=spec["name"], a=a, b=b, rank=spec["rank"]))
    if offset != len(body):
        raise AdapterFormatError("trailing bytes after adapter payload")

    return LowRankAdapter(
        topic_id=header["topic_id"],
        base_model_id=header["base_model_id"],
        rank=header["rank"],
        alpha=header["alpha"],
        layers=tuple(layers),
        provenance=header.get("provenance", {}),
    )
