"""Meme-aware transformer encoder block.

Self-attention over sentence rows where keys and values are pulled toward a
meme-projected row by learned per-row sigmoid gates:

    [Q K V]   = H_c [W_q W_k W_v]
    lam_k     = sigmoid(K w_k1 + (h_m U_k) w_k2)        (n, 1)
    K-hat     = (1 - lam_k) * K + lam_k * (h_m U_k)     (meme row broadcast)
    (V-hat analogous with U_v, w_v1, w_v2)

followed by h-head scaled dot-product attention of Q against K-hat/V-hat, a
residual + layer norm, and a position-wise feed-forward sublayer (d -> 4d -> d,
ReLU) with its own residual + layer norm. No positional encoding: sentence
order is handled by the recurrent layer downstream.
"""

from dataclasses import dataclass

import numpy as np

from . import gradcore as gc
from .errors import ContractError, ShapeError

INIT_STD = 0.02
DEFAULT_HEADS = 4


@dataclass
class MatParams:
    w_q: gc.Tensor  # (d, d)
    w_k: gc.Tensor
    w_v: gc.Tensor
    u_k: gc.Tensor  # (d, d) meme projections for keys/values
    u_v: gc.Tensor
    w_k1: gc.Tensor  # (d, 1) gate weights
    w_v1: gc.Tensor
    w_k2: gc.Tensor
    w_v2: gc.Tensor
    ff_w1: gc.Tensor  # (d, 4d)
    ff_b1: gc.Tensor  # (1, 4d)
    ff_w2: gc.Tensor  # (4d, d)
    ff_b2: gc.Tensor  # (1, d)
    ln1_g: gc.Tensor  # (1, d)
    ln1_b: gc.Tensor
    ln2_g: gc.Tensor
    ln2_b: gc.Tensor
    heads: int = DEFAULT_HEADS
    gated: bool = True  # False builds the plain-transformer ablation variant

    @classmethod
    def init(cls, d: int, rng: np.random.Generator, heads: int = DEFAULT_HEADS,
             gated: bool = True, dtype=np.float32) -> "MatParams":
        if d % heads != 0:
            raise ShapeError(f"model dim {d} not divisible by {heads} heads")

        def gauss(shape, name):
            return gc.parameter(rng.normal(0.0, INIT_STD, size=shape).astype(dtype),
                                f"mat.{name}")

        # layer-norm parameters start at the identity transform
        return cls(
            w_q=gauss((d, d), "w_q"), w_k=gauss((d, d), "w_k"), w_v=gauss((d, d), "w_v"),
            u_k=gauss((d, d), "u_k"), u_v=gauss((d, d), "u_v"),
            w_k1=gauss((d, 1), "w_k1"), w_v1=gauss((d, 1), "w_v1"),
            w_k2=gauss((d, 1), "w_k2"), w_v2=gauss((d, 1), "w_v2"),
            ff_w1=gauss((d, 4 * d), "ff_w1"), ff_b1=gauss((1, 4 * d), "ff_b1"),
            ff_w2=gauss((4 * d, d), "ff_w2"), ff_b2=gauss((1, d), "ff_b2"),
            ln1_g=gc.parameter(np.ones((1, d), dtype=dtype), "mat.ln1_g"),
            ln1_b=gc.parameter(np.zeros((1, d), dtype=dtype), "mat.ln1_b"),
            ln2_g=gc.parameter(np.ones((1, d), dtype=dtype), "mat.ln2_g"),
            ln2_b=gc.parameter(np.zeros((1, d), dtype=dtype), "mat.ln2_b"),
            heads=heads, gated=gated)

    @property
    def d(self) -> int:
        return self.w_q.shape[0]

    def named(self) -> dict[str, gc.Tensor]:
        out = {}
        for t in (self.w_q, self.w_k, self.w_v, self.u_k, self.u_v,
                  self.w_k1, self.w_v1, self.w_k2, self.w_v2,
                  self.ff_w1, self.ff_b1, self.ff_w2, self.ff_b2,
                  self.ln1_g, self.ln1_b, self.ln2_g, self.ln2_b):
            out[t.name] = t
        return out


def meme_gates(k: gc.Tensor, v: gc.Tensor, h_m: gc.Tensor, params: MatParams,
               gate_hook: float | None = None) -> tuple[gc.Tensor, gc.Tensor]:
    """Per-row gates (n, 1) steering keys and values toward the meme row.

    ``gate_hook`` is a test-only override that pins both gates to a constant.
    """
    n, d = k.shape
    if v.shape != (n, d) or h_m.shape != (1, d):
        raise ShapeError(f"meme_gates: shapes {k.shape}, {v.shape}, {h_m.shape} disagree")
    if gate_hook is not None:
        pinned = gc.constant(np.full((n, 1), gate_hook), dtype=k.dtype)
        return pinned, pinned
    mk = gc.matmul(gc.matmul(h_m, params.u_k), params.w_k2)  # (1, 1)
    mv = gc.matmul(gc.matmul(h_m, params.u_v), params.w_v2)
    lam_k = gc.sigmoid(gc.add(gc.matmul(k, params.w_k1), gc.broadcast_rows(mk, n)))
    lam_v = gc.sigmoid(gc.add(gc.matmul(v, params.w_v1), gc.broadcast_rows(mv, n)))
    return lam_k, lam_v


def _gate_mix(x: gc.Tensor, meme_row: gc.Tensor, lam: gc.Tensor) -> gc.Tensor:
    """(1 - lam) * x + lam * meme_row, with lam (n, 1) and meme_row (1, d)."""
    n, d = x.shape
    lam_full = gc.broadcast_cols(lam, d)
    ones = gc.constant(np.ones((n, d)), dtype=x.dtype)
    keep = gc.mul(gc.sub(ones, lam_full), x)
    inject = gc.mul(lam_full, gc.broadcast_rows(meme_row, n))
    return gc.add(keep, inject)


def meme_aware_attention(h_c: gc.Tensor, h_m: gc.Tensor, params: MatParams,
                         gate_hook: float | None = None,
                         return_weights: bool = False):
    """Multi-head attention of sentence rows with meme-gated keys/values.

    With ``params.gated`` False (or a 0.0 gate hook) this reduces exactly to
    conventional multi-head self-attention.
    """
    n = h_c.shape[0]
    d = params.d
    if n < 1:
        raise ContractError("attention needs at least one sentence row")
    if h_c.shape[1] != d:
        raise ShapeError(f"attention: input dim {h_c.shape} vs params d={d}")
    if h_m.shape != (1, d):
        raise ShapeError(f"attention: meme row must be (1, {d}), got {h_m.shape}")
    q = gc.matmul(h_c, params.w_q)
    k = gc.matmul(h_c, params.w_k)
    v = gc.matmul(h_c, params.w_v)
    if params.gated:
        lam_k, lam_v = meme_gates(k, v, h_m, params, gate_hook=gate_hook)
        k_hat = _gate_mix(k, gc.matmul(h_m, params.u_k), lam_k)
        v_hat = _gate_mix(v, gc.matmul(h_m, params.u_v), lam_v)
    else:
        k_hat, v_hat = k, v
    head_dim = d // params.heads
    scale = 1.0 / np.sqrt(head_dim)
    outs = []
    weights = []
    for h in range(params.heads):
        lo, hi = h * head_dim, (h + 1) * head_dim
        qh = gc.slice_cols(q, lo, hi)
        kh = gc.slice_cols(k_hat, lo, hi)
        vh = gc.slice_cols(v_hat, lo, hi)
        attn = gc.row_softmax(gc.scale(gc.matmul(qh, gc.transpose(kh)), scale))
        outs.append(gc.matmul(attn, vh))
        if return_weights:
            weights.append(attn.data.copy())
    out = outs[0] if len(outs) == 1 else gc.concat_cols(*outs)
    if return_weights:
        return out, weights
    return out


def _ln_affine(x: gc.Tensor, gain: gc.Tensor, bias: gc.Tensor) -> gc.Tensor:
    n = x.shape[0]
    normed = gc.layer_norm_rows(x)
    return gc.add(gc.mul(normed, gc.broadcast_rows(gain, n)),
                  gc.broadcast_rows(bias, n))


def mat_encode(h_c: gc.Tensor, h_m: gc.Tensor, params: MatParams,
               gate_hook: float | None = None) -> gc.Tensor:
    """Full encoder block: attention + residual/LN, feed-forward + residual/LN."""
    attn = meme_aware_attention(h_c, h_m, params, gate_hook=gate_hook)
    x = _ln_affine(gc.add(h_c, attn), params.ln1_g, params.ln1_b)
    hidden = gc.relu(gc.affine(x, params.ff_w1, params.ff_b1))
    ff = gc.affine(hidden, params.ff_w2, params.ff_b2)
    return _ln_affine(gc.add(x, ff), params.ln2_g, params.ln2_b)
