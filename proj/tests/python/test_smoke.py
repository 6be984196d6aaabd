import json
import math

import numpy as np
import pytest

import semv2x


def test_payload_and_latency():
    assert semv2x.raw_payload_bytes(64, 2048, 2048) == 805_306_368
    assert semv2x.semantic_payload_bytes(1280, "int8") == 1280
    ms = semv2x.tx_latency_s(5120) * 1e3
    assert ms == pytest.approx(0.5026, abs=1e-4)
    assert semv2x.meets_v2x_deadline(ms / 1e3)
    assert "157286.4" in semv2x.payload_table()


def test_quantization_round_trip():
    rng = np.random.default_rng(0)
    v = rng.normal(size=1280).astype(np.float32)
    q = semv2x.quantize(v, "int8")
    assert len(q["payload"]) == 1280
    back = semv2x.round_trip(v, "int8")
    assert np.max(np.abs(back - v)) <= q["scale"] / 2
    assert np.array_equal(semv2x.round_trip(v, "fp32"), v.astype(np.float64))
    with pytest.raises(ValueError):
        semv2x.quantize(np.array([np.nan], dtype=np.float32), "int8")


def test_attention_matches_numpy():
    pooled, weights = semv2x.cross_attention([1.0, 0.0], [[1.0, 0.0], [0.0, 1.0]])
    e = math.exp(1 / math.sqrt(2))
    assert weights == pytest.approx([e / (e + 1), 1 / (e + 1)], abs=1e-15)
    assert pooled == pytest.approx(weights)


def test_costs_and_metrics():
    r = semv2x.cost_report()
    assert r["flops_total"] == 39_518_448_847_360
    assert r["flops_encoder"] / r["flops_total"] > 0.99
    assert semv2x.compute_metrics(8, 2, 85, 5)["accuracy"] == pytest.approx(0.93)
    assert semv2x.f1_score(0.913, 0.778) == pytest.approx(0.840, abs=1e-3)


def test_config_errors_map_to_value_error():
    with pytest.raises(semv2x.ConfigError):
        semv2x.normalize_config("clip:\n  colour: 3\n")
    with pytest.raises(semv2x.ValidationError):
        semv2x.normalize_config("tokenizer:\n  patch_px: 15\n")
    assert semv2x.config_hash() == semv2x.config_hash(semv2x.default_config())


def test_small_e2e_is_deterministic():
    cfg = "dataset:\n  n_safe: 8\n  n_collision: 4\ntrain:\n  epochs: 3\nsim:\n  embed_dim: 16\n"
    a = semv2x.e2e_report(cfg, post="mask", gap=8)
    b = json.loads(semv2x.run_e2e(cfg, "mask", 8))
    assert a == b
    assert len(a["conditions"]) == 1
