"""Knowledge pooling and gated-fusion tests against scalar oracles."""

import numpy as np
import pytest

import memevidence.gradcore as gc
from memevidence import kme
from memevidence.errors import ShapeError, ValidationError
from oracles import scalar_gmf_fuse


def zero_params(d, dtype=np.float64):
    return kme.GmfParams(
        w_m=gc.parameter(np.zeros((2 * d, d), dtype=dtype), "gmf.w_m"),
        w_k=gc.parameter(np.zeros((2 * d, d), dtype=dtype), "gmf.w_k"),
        b_m=gc.parameter(np.zeros((1, d), dtype=dtype), "gmf.b_m"),
        b_k=gc.parameter(np.zeros((1, d), dtype=dtype), "gmf.b_k"))


class TestKnowledgeRepr:
    def test_empty_tokens_give_zero(self):
        table = kme.KnowledgeTable({"a": np.ones(4)}, d=4)
        v = kme.knowledge_repr([], table)
        assert v.shape == (1, 4)
        assert np.all(v == 0)

    def test_two_known_tokens_average(self):
        u = np.array([1.0, 3.0])
        w = np.array([3.0, 5.0])
        table = kme.KnowledgeTable({"alpha": u, "beta": w}, d=2)
        v = kme.knowledge_repr(["alpha", "beta"], table)
        np.testing.assert_allclose(v, [[2.0, 4.0]])

    def test_oov_counts_in_denominator(self):
        table = kme.KnowledgeTable({"known": np.array([2.0, 0.0])}, d=2)
        v = kme.knowledge_repr(["known", "unknown"], table)
        np.testing.assert_allclose(v, [[1.0, 0.0]])

    def test_all_oov_gives_zero(self):
        table = kme.KnowledgeTable({"known": np.array([2.0, 0.0])}, d=2)
        assert np.all(kme.knowledge_repr(["x", "y"], table) == 0)

    def test_lookup_is_case_folded(self):
        table = kme.KnowledgeTable({"Napoleon": np.array([1.0, 2.0])}, d=2)
        assert "NAPOLEON" in table
        np.testing.assert_allclose(kme.knowledge_repr(["nApOlEoN"], table),
                                   [[1.0, 2.0]])

    def test_table_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        table = kme.KnowledgeTable(
            {w: rng.normal(size=6) for w in ("one", "two", "three")}, d=6)
        table.save(tmp_path / "kt.memx", tmp_path / "kt.words")
        back = kme.KnowledgeTable.load(tmp_path / "kt.memx", tmp_path / "kt.words")
        assert len(back) == 3
        np.testing.assert_allclose(back.lookup("two"), table.lookup("two"))

    def test_misaligned_sidecar_rejected(self, tmp_path):
        table = kme.KnowledgeTable({"a": np.ones(2), "b": np.zeros(2)}, d=2)
        table.save(tmp_path / "kt.memx", tmp_path / "kt.words")
        (tmp_path / "kt.words").write_text("a\n")
        with pytest.raises(ValidationError):
            kme.KnowledgeTable.load(tmp_path / "kt.memx", tmp_path / "kt.words")

    def test_wrong_dim_vector_rejected(self):
        with pytest.raises(ValidationError):
            kme.KnowledgeTable({"a": np.ones(3)}, d=2)


class TestGmfFuse:
    def test_zero_inputs_zero_bias_gives_zero(self):
        d = 3
        p = zero_params(d)
        out = kme.gmf_fuse(gc.constant(np.zeros((1, d)), dtype=np.float64),
                           gc.constant(np.zeros((1, d)), dtype=np.float64), p)
        np.testing.assert_array_equal(out.data, np.zeros((1, d)))

    def test_symmetric_cancellation_d1(self):
        p = zero_params(1)
        out = kme.gmf_fuse(gc.constant([[1.0]], dtype=np.float64),
                           gc.constant([[-1.0]], dtype=np.float64), p)
        np.testing.assert_allclose(out.data, [[0.0]], atol=1e-15)

    def test_zero_knowledge_neutrality(self):
        # h_k = 0 with zero params: both gates are exactly 0.5, out = 0.5 * h_m
        d = 4
        p = zero_params(d)
        h_m = np.array([[0.3, -1.2, 4.0, 0.25]])
        out = kme.gmf_fuse(gc.constant(h_m, dtype=np.float64),
                           gc.constant(np.zeros((1, d)), dtype=np.float64), p)
        np.testing.assert_array_equal(out.data, 0.5 * h_m)

    def test_matches_scalar_oracle_fixed_case(self):
        d = 2
        w = np.full((4, 2), 0.1)
        p = kme.GmfParams(
            w_m=gc.parameter(w.copy(), "gmf.w_m"),
            w_k=gc.parameter(w.copy(), "gmf.w_k"),
            b_m=gc.parameter(np.zeros((1, 2)), "gmf.b_m"),
            b_k=gc.parameter(np.zeros((1, 2)), "gmf.b_k"))
        h_m = np.array([[1.0, 0.0]])
        h_k = np.array([[0.0, 1.0]])
        got = kme.gmf_fuse(gc.constant(h_m, dtype=np.float64),
                           gc.constant(h_k, dtype=np.float64), p)
        want = scalar_gmf_fuse(h_m, h_k, w, w, np.zeros(2), np.zeros(2))
        np.testing.assert_allclose(got.data, want, atol=1e-6)

    def test_matches_scalar_oracle_random(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            d = int(rng.integers(1, 5))
            p = kme.GmfParams.init(d, rng, dtype=np.float64)
            h_m = rng.normal(size=(1, d))
            h_k = rng.normal(size=(1, d))
            got = kme.gmf_fuse(gc.constant(h_m, dtype=np.float64),
                               gc.constant(h_k, dtype=np.float64), p)
            want = scalar_gmf_fuse(h_m, h_k, p.w_m.data, p.w_k.data,
                                   p.b_m.data, p.b_k.data)
            np.testing.assert_allclose(got.data, want, atol=1e-9)

    def test_gates_strictly_inside_unit_interval(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            d = int(rng.integers(1, 8))
            p = kme.GmfParams.init(d, rng, dtype=np.float64)
            z = gc.concat_cols(gc.constant(rng.normal(size=(1, d)), dtype=np.float64),
                               gc.constant(rng.normal(size=(1, d)), dtype=np.float64))
            for w_g, b_g in ((p.w_m, p.b_m), (p.w_k, p.b_k)):
                gate = gc.sigmoid(gc.affine(z, w_g, b_g)).data
                assert np.all(gate > 0) and np.all(gate < 1)

    def test_dimension_mismatch(self):
        p = zero_params(3)
        with pytest.raises(ShapeError):
            kme.gmf_fuse(gc.constant(np.zeros((1, 2)), dtype=np.float64),
                         gc.constant(np.zeros((1, 3)), dtype=np.float64), p)

    def test_gradient_check(self):
        rng = np.random.default_rng(13)
        d = 3
        p = kme.GmfParams.init(d, rng, dtype=np.float64)
        h_m = gc.parameter(rng.normal(size=(1, d)), "h_m")
        h_k = gc.parameter(rng.normal(size=(1, d)), "h_k")
        rand = gc.constant(rng.normal(size=(1, d)), dtype=np.float64)

        def f():
            return gc.sum_all(gc.mul(kme.gmf_fuse(h_m, h_k, p), rand))

        tensors = dict(p.named(), h_m=h_m, h_k=h_k)
        errs = gc.gradient_check(f, tensors)
        assert max(errs.values()) < 1e-3, errs
