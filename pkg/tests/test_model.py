"""Variant wiring, loss, prediction, checkpoints, and the end-to-end oracle."""

import hashlib
import math

import numpy as np
import pytest

import memevidence.gradcore as gc
from memevidence import model
from memevidence.errors import ConfigError, ContractError, FormatError, ShapeError
from conftest import make_sample
from oracles import ref_lstm_forward, scalar_full_pipeline, scalar_head, \
    standard_transformer_block


def init_full(d=8, n_heads=2, seed=42, dtype=np.float64):
    rng = np.random.default_rng(seed)
    return model.MimeParams.init(model.VariantSpec.full(), d, rng,
                                 heads=n_heads, dtype=dtype)


def bare_names(params):
    return {name: t.data.copy() for name, t in params.named_tensors().items()}


class TestVariantSpec:
    def test_full_and_base_presets(self):
        full = model.VariantSpec.full()
        assert (full.use_kme, full.context_encoder, full.sequence_layer,
                full.meme_channel) == (True, "meme_aware_transformer", "ma_lstm",
                                       "mm_meme")
        base = model.VariantSpec.base()
        assert (base.use_kme, base.context_encoder, base.sequence_layer,
                base.meme_channel) == (False, "none", "none", "mm_meme")

    def test_invalid_axis_rejected(self):
        with pytest.raises(ConfigError):
            model.VariantSpec(context_encoder="gru")

    def test_variant_table_covers_the_lattice(self):
        for key in ("base", "+kme", "+mat", "+malstm", "-kme", "-mat", "-mat+t",
                    "-malstm", "-malstm+bilstm", "text_only", "image_only",
                    "early_fusion", "full"):
            assert key in model.VARIANT_TABLE

    def test_roundtrip_dict(self):
        v = model.VARIANT_TABLE["-mat+t"]
        assert model.VariantSpec.from_dict(v.to_dict()) == v


class TestForward:
    def test_all_zero_params_give_zero_logits(self):
        rng = np.random.default_rng(0)
        params = init_full(d=8)
        for t in params.named_tensors().values():
            t.data[...] = 0.0
        sample = make_sample(rng, d=8, n=5)
        logits = model.forward(sample, params)
        np.testing.assert_array_equal(logits.data, np.zeros((5, 1)))
        probs = 1 / (1 + np.exp(-logits.data))
        np.testing.assert_array_equal(probs, np.full((5, 1), 0.5))

    def test_base_variant_is_direct_head_wiring(self):
        rng = np.random.default_rng(1)
        d = 6
        params = model.MimeParams.init(model.VariantSpec.base(), d, rng,
                                       dtype=np.float64)
        sample = make_sample(rng, d=d, n=4)
        logits = model.forward(sample, params).data.reshape(-1)
        meme = sample.channels["mm_meme"].astype(np.float64)
        for t in range(sample.n):
            want = scalar_head(sample.sentences[t].astype(np.float64), meme,
                               params.head_w.data, params.head_b.data[0, 0])
            assert abs(logits[t] - want) < 1e-9

    def test_full_pipeline_matches_scalar_oracle(self):
        rng = np.random.default_rng(42)
        d, n = 8, 4
        params = init_full(d=d, n_heads=2, seed=42)
        sample = make_sample(rng, d=d, n=n)
        logits = model.forward(sample, params).data.reshape(-1)
        oracle_inputs = {"mm_meme": sample.channels["mm_meme"],
                         "knowledge": sample.channels["knowledge"],
                         "sentences": sample.sentences}
        arrays = bare_names(params)
        arrays["head.b"] = params.head_b.data[0, 0]
        want = scalar_full_pipeline(oracle_inputs, arrays, heads=2)
        np.testing.assert_allclose(logits, want, atol=1e-5)

    def test_every_variant_runs_and_has_right_shape(self):
        rng = np.random.default_rng(2)
        d = 8
        for name, variant in model.VARIANT_TABLE.items():
            params = model.MimeParams.init(variant, d, rng, heads=2)
            sample = make_sample(rng, d=d, n=3, sample_id=name)
            logits = model.forward(sample, params)
            assert logits.shape == (3, 1), name
            assert np.all(np.isfinite(logits.data)), name

    def test_dim_mismatch_names_stage(self):
        rng = np.random.default_rng(3)
        params = init_full(d=8)
        sample = make_sample(rng, d=6, n=3)
        with pytest.raises(ShapeError, match="input stage"):
            model.forward(sample, params)

    def test_missing_knowledge_channel_detected(self):
        rng = np.random.default_rng(4)
        params = init_full(d=8)
        sample = make_sample(rng, d=8, n=3)
        del sample.channels["knowledge"]
        with pytest.raises(ShapeError, match="fusion stage"):
            model.forward(sample, params)

    def test_head_linearity(self):
        # doubling both concatenated head inputs doubles (logit - bias)
        rng = np.random.default_rng(5)
        d = 6
        params = model.MimeParams.init(model.VariantSpec.base(), d, rng,
                                       dtype=np.float64)
        sample = make_sample(rng, d=d, n=3)
        bias = params.head_b.data[0, 0]
        base_logits = model.forward(sample, params).data.reshape(-1)
        doubled = make_sample(rng, d=d, n=3)
        doubled.channels = {k: 2.0 * v for k, v in sample.channels.items()}
        doubled.sentences = 2.0 * sample.sentences
        doubled_logits = model.forward(doubled, params).data.reshape(-1)
        np.testing.assert_allclose(doubled_logits - bias,
                                   2.0 * (base_logits - bias), atol=1e-9)

    def test_variant_lattice_consistency(self):
        # hooks off + no fusion == vanilla transformer + vanilla LSTM pipeline
        rng = np.random.default_rng(6)
        d, n = 8, 5
        variant = model.VARIANT_TABLE["-kme"]
        params = model.MimeParams.init(variant, d, rng, heads=2, dtype=np.float64)
        params.malstm.meme_scale = 0.0
        sample = make_sample(rng, d=d, n=n)
        got = model.forward(sample, params, gate_hook=0.0).data.reshape(-1)

        mat_arrays = {name.removeprefix("mat."): t.data
                      for name, t in params.mat.named().items()}
        encoded = standard_transformer_block(sample.sentences, mat_arrays, heads=2)
        hidden = ref_lstm_forward(
            encoded,
            w={g: params.malstm.w[g].data for g in ("i", "f", "o", "g")},
            u={g: params.malstm.u[g].data for g in ("i", "f", "o", "g")},
            b={g: params.malstm.b[g].data for g in ("i", "f", "o", "g")})
        meme = sample.channels["mm_meme"].astype(np.float64)
        want = np.array([scalar_head(hidden[t], meme, params.head_w.data,
                                     params.head_b.data[0, 0])
                         for t in range(n)])
        np.testing.assert_allclose(got, want, atol=1e-6)

    def test_gradient_check_small_full_model(self):
        rng = np.random.default_rng(7)
        d, n = 4, 3
        params = init_full(d=d, n_heads=2, seed=8)
        params.mat.ff_b1.data[...] = rng.choice([-0.3, 0.3],
                                                size=params.mat.ff_b1.shape)
        sample = make_sample(rng, d=d, n=n)

        def f():
            return model.bce_loss(model.forward(sample, params), sample.labels)

        errs = gc.gradient_check(f, params.named_tensors())
        assert max(errs.values()) < 1e-3, \
            sorted(errs.items(), key=lambda kv: -kv[1])[:5]


class TestBceLoss:
    def test_zero_logits_give_ln2(self):
        logits = gc.constant(np.zeros((4, 1)), dtype=np.float64)
        loss = model.bce_loss(logits, [1, 0, 1, 0])
        assert abs(loss.item() - math.log(2.0)) < 1e-12

    def test_saturated_correct_logit(self):
        logits = gc.constant([[20.0]], dtype=np.float64)
        assert model.bce_loss(logits, [1]).item() < 1e-8

    def test_hand_computed_value(self):
        logits = gc.constant([[1.0], [-1.0]], dtype=np.float64)
        loss = model.bce_loss(logits, [1, 0])
        assert abs(loss.item() - 0.313262) < 1e-5

    def test_empty_rejected(self):
        with pytest.raises(ContractError):
            model.bce_loss(gc.constant([[0.0]], dtype=np.float64), [])

    def test_matches_naive_formula(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            n = int(rng.integers(1, 11))
            z = rng.normal(scale=3.0, size=(n, 1))
            y = rng.integers(0, 2, size=n)
            loss = model.bce_loss(gc.constant(z, dtype=np.float64), y)
            probs = 1 / (1 + np.exp(-z.reshape(-1)))
            want = -np.mean(y * np.log(probs) + (1 - y) * np.log(1 - probs))
            assert abs(loss.item() - want) < 1e-9

    def test_gradient_check(self):
        rng = np.random.default_rng(10)
        z = gc.parameter(rng.normal(size=(5, 1)), "z")
        y = rng.integers(0, 2, size=5)

        def f():
            return model.bce_loss(z, y)

        errs = gc.gradient_check(f, {"z": z})
        assert errs["z"] < 1e-3


class TestPredict:
    def test_tie_rule_at_default_threshold(self):
        assert model.predict(np.zeros(3)).tolist() == [1, 1, 1]

    def test_higher_threshold(self):
        logit = math.log(0.8 / 0.2)  # sigmoid(logit) = 0.8
        assert model.predict(np.array([logit]), threshold=0.9).tolist() == [0]
        assert model.predict(np.array([logit]), threshold=0.5).tolist() == [1]

    def test_threshold_sweep_monotone(self):
        rng = np.random.default_rng(11)
        params = init_full(d=8, seed=12, dtype=np.float32)
        counts = []
        samples = [make_sample(rng, d=8, n=6, sample_id=f"s{i}") for i in range(8)]
        for thr in (0.3, 0.5, 0.7):
            total = 0
            for sample in samples:
                logits = model.forward(sample, params)
                total += int(model.predict(logits, threshold=thr).sum())
            counts.append(total)
        assert counts[0] >= counts[1] >= counts[2]

    def test_bad_threshold(self):
        with pytest.raises(ContractError):
            model.predict(np.zeros(2), threshold=1.0)


class TestCheckpoint:
    def test_round_trip_forward_bit_identical(self, tmp_path):
        rng = np.random.default_rng(13)
        params = init_full(d=8, seed=14, dtype=np.float32)
        sample = make_sample(rng, d=8, n=4)
        before = model.forward(sample, params).data.tobytes()
        path = tmp_path / "model.ckpt"
        model.save_checkpoint(params, path)
        loaded = model.load_checkpoint(path)
        after = model.forward(sample, loaded).data.tobytes()
        assert before == after
        assert loaded.variant == params.variant

    def test_save_is_deterministic(self, tmp_path):
        params = init_full(d=8, seed=42, dtype=np.float32)
        a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        model.save_checkpoint(params, a)
        model.save_checkpoint(params, b)
        ha = hashlib.sha256(a.read_bytes()).hexdigest()
        hb = hashlib.sha256(b.read_bytes()).hexdigest()
        assert ha == hb

    def test_version_mismatch_is_explicit(self, tmp_path):
        params = init_full(d=4, seed=15)
        path = tmp_path / "v.ckpt"
        model.save_checkpoint(params, path)
        blob = bytearray(path.read_bytes())
        blob[5:9] = (99).to_bytes(4, "little")
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="version 99"):
            model.load_checkpoint(path)

    def test_every_variant_round_trips(self, tmp_path):
        rng = np.random.default_rng(16)
        sample = make_sample(rng, d=8, n=3)
        for name, variant in model.VARIANT_TABLE.items():
            params = model.MimeParams.init(variant, 8, rng, heads=2)
            path = tmp_path / f"{name.replace('+', 'p').replace('-', 'm')}.ckpt"
            model.save_checkpoint(params, path)
            loaded = model.load_checkpoint(path)
            a = model.forward(sample, params).data
            b = model.forward(sample, loaded).data
            np.testing.assert_array_equal(a, b, err_msg=name)


class TestBiLstm:
    def test_output_dim_preserved(self):
        rng = np.random.default_rng(17)
        d = 8
        p = model.BiLstmParams.init(d, rng, dtype=np.float64)
        x = gc.constant(rng.normal(size=(5, d)), dtype=np.float64)
        out = model.bilstm_forward(x, p)
        assert out.shape == (5, d)

    def test_forward_half_matches_reference(self):
        rng = np.random.default_rng(18)
        d = 6
        p = model.BiLstmParams.init(d, rng, dtype=np.float64)
        x = rng.normal(size=(4, d))
        out = model.bilstm_forward(gc.constant(x, dtype=np.float64), p).data
        fwd_ref = ref_lstm_forward(x,
                                   w={g: p.fwd.w[g].data for g in ("i", "f", "o", "g")},
                                   u={g: p.fwd.u[g].data for g in ("i", "f", "o", "g")},
                                   b={g: p.fwd.b[g].data for g in ("i", "f", "o", "g")})
        np.testing.assert_allclose(out[:, :3], fwd_ref, atol=1e-12)
        bwd_ref = ref_lstm_forward(x[::-1],
                                   w={g: p.bwd.w[g].data for g in ("i", "f", "o", "g")},
                                   u={g: p.bwd.u[g].data for g in ("i", "f", "o", "g")},
                                   b={g: p.bwd.b[g].data for g in ("i", "f", "o", "g")})
        np.testing.assert_allclose(out[:, 3:], bwd_ref[::-1], atol=1e-12)

    def test_odd_dim_rejected(self):
        with pytest.raises(ConfigError):
            model.BiLstmParams.init(7, np.random.default_rng(19))
