"""Meme-aware LSTM: a unidirectional scan whose cell injects the meme vector.

Besides the usual input/forget/output gates and candidate, the cell computes a
meme gate and a meme candidate and adds their product to the cell state:

    p_t = sigmoid(x_t W_p + h_{t-1} U_p + h_m V_p + b_p)
    s_t = tanh(h_m W_s + b_s)
    c_t = f_t * c_{t-1} + i_t * c~_t + meme_scale * (p_t * s_t)
    h_t = o_t * tanh(c_t)

``meme_scale`` (default 1) is an ablation/test multiplier; at 0 the cell is a
standard LSTM cell.
"""

from dataclasses import dataclass

import numpy as np

from . import gradcore as gc
from .errors import ContractError, ShapeError

INIT_STD = 0.02

_GATE_NAMES = ("i", "f", "o", "g")


@dataclass
class MaLstmParams:
    w: dict[str, gc.Tensor]  # input weights per gate, (d, d)
    u: dict[str, gc.Tensor]  # recurrent weights per gate, (d, d)
    b: dict[str, gc.Tensor]  # biases per gate, (1, d)
    w_p: gc.Tensor  # (d, d)
    u_p: gc.Tensor  # (d, d)
    v_p: gc.Tensor  # (d, d) meme projection inside the meme gate
    b_p: gc.Tensor  # (1, d)
    w_s: gc.Tensor  # (d, d) meme candidate projection
    b_s: gc.Tensor  # (1, d)
    meme_scale: float = 1.0

    @classmethod
    def init(cls, d: int, rng: np.random.Generator, dtype=np.float32) -> "MaLstmParams":
        def gauss(shape, name):
            return gc.parameter(rng.normal(0.0, INIT_STD, size=shape).astype(dtype),
                                f"malstm.{name}")

        return cls(
            w={g: gauss((d, d), f"w_{g}") for g in _GATE_NAMES},
            u={g: gauss((d, d), f"u_{g}") for g in _GATE_NAMES},
            b={g: gauss((1, d), f"b_{g}") for g in _GATE_NAMES},
            w_p=gauss((d, d), "w_p"), u_p=gauss((d, d), "u_p"),
            v_p=gauss((d, d), "v_p"), b_p=gauss((1, d), "b_p"),
            w_s=gauss((d, d), "w_s"), b_s=gauss((1, d), "b_s"))

    @property
    def d(self) -> int:
        return self.w_p.shape[0]

    def named(self) -> dict[str, gc.Tensor]:
        out = {}
        for group in (self.w, self.u, self.b):
            for t in group.values():
                out[t.name] = t
        for t in (self.w_p, self.u_p, self.v_p, self.b_p, self.w_s, self.b_s):
            out[t.name] = t
        return out


@dataclass
class MaLstmState:
    c: gc.Tensor  # (1, d)
    h: gc.Tensor  # (1, d)

    @classmethod
    def zeros(cls, d: int, dtype=np.float32) -> "MaLstmState":
        return cls(c=gc.constant(np.zeros((1, d)), dtype=dtype),
                   h=gc.constant(np.zeros((1, d)), dtype=dtype))


def _gate(x_t, h_prev, params: MaLstmParams, name: str) -> gc.Tensor:
    pre = gc.add(gc.matmul(x_t, params.w[name]), gc.matmul(h_prev, params.u[name]))
    return gc.add(pre, params.b[name])


def malstm_cell(x_t: gc.Tensor, prev: MaLstmState, h_m: gc.Tensor,
                params: MaLstmParams) -> MaLstmState:
    """One recurrence step over a (1, d) input row."""
    d = params.d
    for tensor, what in ((x_t, "input"), (prev.h, "hidden"), (prev.c, "cell"),
                         (h_m, "meme")):
        if tensor.shape != (1, d):
            raise ShapeError(f"malstm_cell: {what} has shape {tensor.shape}, "
                             f"expected (1, {d})")
    i_t = gc.sigmoid(_gate(x_t, prev.h, params, "i"))
    f_t = gc.sigmoid(_gate(x_t, prev.h, params, "f"))
    o_t = gc.sigmoid(_gate(x_t, prev.h, params, "o"))
    g_t = gc.tanh(_gate(x_t, prev.h, params, "g"))
    p_pre = gc.add(gc.add(gc.matmul(x_t, params.w_p), gc.matmul(prev.h, params.u_p)),
                   gc.add(gc.matmul(h_m, params.v_p), params.b_p))
    p_t = gc.sigmoid(p_pre)
    s_t = gc.tanh(gc.add(gc.matmul(h_m, params.w_s), params.b_s))
    c_t = gc.add(gc.mul(f_t, prev.c), gc.mul(i_t, g_t))
    if params.meme_scale != 0.0:
        c_t = gc.add(c_t, gc.scale(gc.mul(p_t, s_t), params.meme_scale))
    h_t = gc.mul(o_t, gc.tanh(c_t))
    return MaLstmState(c=c_t, h=h_t)


def malstm_forward(h_cm: gc.Tensor, h_m: gc.Tensor, params: MaLstmParams) -> gc.Tensor:
    """Left-to-right scan from zero state; row t of the output is h_t."""
    n = h_cm.shape[0]
    if n < 1:
        raise ContractError("malstm_forward needs at least one row")
    state = MaLstmState.zeros(params.d, dtype=h_cm.dtype)
    rows = []
    for t in range(n):
        x_t = gc.slice_rows(h_cm, t, t + 1)
        state = malstm_cell(x_t, state, h_m, params)
        rows.append(state.h)
    return rows[0] if n == 1 else gc.concat_rows(*rows)
