from __future__ import annotations

import numpy as np
import pytest

from topicjudge.errors import AdapterFormatError, BaseModelMismatchError
from topicjudge.lora import (
    AdapterLayer,
    LowRankAdapter,
    fresh_layer,
    load_adapter,
    lora_forward,
    merge_adapter,
    merge_into_weights,
    save_adapter,
)
from topicjudge.seeding import make_rng


def hand_layer() -> AdapterLayer:
    # A = [1 0], B = [1; 0], rank 1
    return AdapterLayer("l", a=np.array([[1.0, 0.0]]), b=np.array([[1.0], [0.0]]), rank=1)


class TestLoraForward:
    def test_fresh_adapter_changes_nothing(self):
        rng = make_rng(1)
        weight = rng.normal(size=(4, 6))
        layer = fresh_layer("l", 4, 6, rank=3, rng=rng)
        x = rng.normal(size=6)
        assert np.array_equal(lora_forward(weight, layer, 8.0, x), weight @ x)

    def test_hand_example(self):
        weight = np.eye(2)
        x = np.array([1.0, 1.0])
        out = lora_forward(weight, hand_layer(), alpha=2.0, x=x)
        assert np.allclose(out, [3.0, 1.0])

    def test_zero_alpha(self):
        rng = make_rng(2)
        weight = rng.normal(size=(3, 5))
        layer = fresh_layer("l", 3, 5, 2, rng)
        layer.b += rng.normal(size=layer.b.shape)
        x = rng.normal(size=5)
        assert np.allclose(lora_forward(weight, layer, 0.0, x), weight @ x)

    def test_batch_rows_match_vectors(self):
        rng = make_rng(3)
        weight = rng.normal(size=(3, 7))
        layer = fresh_layer("l", 3, 7, 2, rng)
        layer.b += rng.normal(size=layer.b.shape)
        batch = rng.normal(size=(5, 7))
        batched = lora_forward(weight, layer, 4.0, batch)
        for i in range(5):
            assert np.allclose(batched[i], lora_forward(weight, layer, 4.0, batch[i]))

    def test_shape_mismatch(self):
        weight = np.eye(3)
        with pytest.raises(ValueError, match="shape"):
            lora_forward(weight, hand_layer(), 2.0, np.ones(2))

    def test_input_length_mismatch(self):
        weight = np.eye(2)
        with pytest.raises(ValueError, match="length"):
            lora_forward(weight, hand_layer(), 2.0, np.ones(3))


class TestMergeAdapter:
    def test_fresh_adapter_identity(self):
        rng = make_rng(4)
        weight = rng.normal(size=(4, 4))
        layer = fresh_layer("l", 4, 4, 2, rng)
        assert np.array_equal(merge_adapter(weight, layer, 16.0), weight)

    def test_hand_example_merged_weight(self):
        merged = merge_adapter(np.eye(2), hand_layer(), alpha=2.0)
        assert np.allclose(merged, [[3.0, 0.0], [0.0, 1.0]])
        assert np.allclose(merged @ np.array([1.0, 1.0]), [3.0, 1.0])

    def test_full_rank_equals_dense_delta(self):
        rng = make_rng(5)
        d_out, d_in = 6, 9
        rank = min(d_out, d_in)
        weight = rng.normal(size=(d_out, d_in))
        a = rng.normal(size=(rank, d_in))
        b = rng.normal(size=(d_out, rank))
        layer = AdapterLayer("l", a=a, b=b, rank=rank)
        alpha = 3.0
        dense_delta = (alpha / rank) * b @ a
        assert np.allclose(merge_adapter(weight, layer, alpha), weight + dense_delta, atol=1e-12)
        x = rng.normal(size=(8, d_in))
        assert np.allclose(
            lora_forward(weight, layer, alpha, x), x @ (weight + dense_delta).T, atol=1e-10
        )


class TestAdapterLayer:
    def test_rank_clamped_in_fresh_layer(self):
        layer = fresh_layer("out", d_out=1, d_in=64, rank=16, rng=make_rng(0))
        assert layer.rank == 1
        assert layer.b.shape == (1, 1)

    def test_rank_bound_enforced(self):
        with pytest.raises(ValueError, match="rank"):
            AdapterLayer("l", a=np.zeros((3, 2)), b=np.zeros((2, 3)), rank=3)

    def test_layer_alpha_scaling_uniform(self):
        layers = (
            fresh_layer("wide", 16, 64, rank=8, rng=make_rng(1)),
            fresh_layer("narrow", 1, 16, rank=8, rng=make_rng(2)),
        )
        adapter = LowRankAdapter("t", "m", rank=8, alpha=16.0, layers=layers)
        for layer in layers:
            assert adapter.layer_scale(layer) == pytest.approx(16.0 / 8.0)


class TestSerialization:
    def make_adapter(self) -> LowRankAdapter:
        rng = make_rng(9)
        layers = (
            fresh_layer("dense1", 8, 24, 4, rng),
            fresh_layer("dense2", 1, 8, 4, rng),
        )
        for layer in layers:
            layer.b += rng.normal(size=layer.b.shape)
        return LowRankAdapter(
            topic_id="301",
            base_model_id="reference-ngram-mlp/d8-h8-t512-s0",
            rank=4,
            alpha=8.0,
            layers=layers,
            provenance={"seed": 3, "train_size": 64, "epochs": 10},
        )

    def test_round_trip_exact(self):
        adapter = self.make_adapter()
        loaded = load_adapter(save_adapter(adapter))
        assert loaded.topic_id == adapter.topic_id
        assert loaded.base_model_id == adapter.base_model_id
        assert loaded.rank == adapter.rank
        assert loaded.alpha == adapter.alpha
        assert loaded.provenance["train_size"] == 64
        for original, restored in zip(adapter.layers, loaded.layers):
            assert np.array_equal(original.a, restored.a)
            assert np.array_equal(original.b, restored.b)

    def test_round_trip_scores_identically(self):
        from topicjudge.scorer import ReferenceScorer

        scorer = ReferenceScorer(feature_dim=8, hidden_dim=8)
        adapter = self.make_adapter()
        loaded = load_adapter(save_adapter(adapter), expected_base_model_id=scorer.base_model_id)
        rng = make_rng(21)
        for i in range(10):
            query = f"query {i} {int(rng.integers(0, 99))}"
            doc = " ".join(f"w{int(t)}" for t in rng.integers(0, 60, 12))
            assert scorer.score(query, doc, adapter=loaded) == scorer.score(query, doc, adapter=adapter)

    def test_usage_restriction_embedded(self):
        adapter = self.make_adapter()
        data = save_adapter(adapter)
        assert b"301" in data
        assert "topic 301" in adapter.usage_restriction
        assert load_adapter(data).usage_restriction == adapter.usage_restriction

    def test_tampered_payload_fails_checksum(self):
        data = bytearray(save_adapter(self.make_adapter()))
        data[len(data) // 2] ^= 0xFF
        with pytest.raises(AdapterFormatError, match="checksum"):
            load_adapter(bytes(data))

    def test_truncated_data(self):
        with pytest.raises(AdapterFormatError):
            load_adapter(b"TJAD")

    def test_version_mismatch(self):
        import hashlib

        data = bytearray(save_adapter(self.make_adapter())[:-32])
        data[4:8] = (99).to_bytes(4, "little")
        data = bytes(data)
        data += hashlib.sha256(data).digest()
        with pytest.raises(AdapterFormatError, match="version"):
            load_adapter(data)

    def test_wrong_base_model_at_attach(self):
        data = save_adapter(self.make_adapter())
        with pytest.raises(BaseModelMismatchError):
            load_adapter(data, expected_base_model_id="another-model")

    def test_parameter_count(self):
        adapter = self.make_adapter()
        assert adapter.num_parameters() == sum(l.a.size + l.b.size for l in adapter.layers)


class TestMergeIntoWeights:
    def test_matches_adapter_path(self):
        rng = make_rng(13)
        weights = {
            "dense1": (rng.normal(size=(8, 24)), rng.normal(size=8)),
            "dense2": (rng.normal(size=(1, 8)), rng.normal(size=1)),
        }
        layers = (fresh_layer("dense1", 8, 24, 4, rng), fresh_layer("dense2", 1, 8, 4, rng))
        for layer in layers:
            layer.b += rng.normal(size=layer.b.shape) * 0.2
        adapter = LowRankAdapter("t", "m", 4, 8.0, layers)
        merged = merge_into_weights(weights, adapter)
        for name, (weight, bias) in weights.items():
            layer = adapter.layer(name)
            delta = adapter.layer_scale(layer) * (layer.b @ layer.a)
            assert np.allclose(merged[name][0], weight + delta, atol=1e-12)
            assert np.array_equal(merged[name][1], bias)
