"""Reverse-mode differentiation over 2-D arrays, with Adam and gradient checking.

Everything the model layers need is expressed over rank-2 tensors: scalars are
(1, 1), row vectors are (1, d), sentence stacks are (n, d). Operations executed
while a Tape is active are recorded in execution order; ``Tape.backward`` walks
the record in exact reverse order and accumulates gradients into ``.grad``.

Compute is float32 by default; pass float64 arrays for gradient checking.
A tape is single-threaded, but independent tapes may run on separate threads
(the active-tape stack is thread-local).
"""

import threading

import numpy as np

from .errors import ContractError, ShapeError, TrainingError

DEFAULT_DTYPE = np.float32

_FLOAT_DTYPES = (np.float32, np.float64)


class Tensor:
    """A rank-2 array plus gradient slot.

    ``data`` is row-major and immutable by convention during a forward pass;
    the only sanctioned mutations are gradient accumulation inside
    ``Tape.backward`` and parameter updates between passes.
    """

    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(DEFAULT_DTYPE)
        if arr.ndim != 2:
            raise ShapeError(f"tensor must be rank 2, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeError(f"tensor dims must be positive, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.data.shape != (1, 1):
            raise ShapeError(f"item() needs shape (1, 1), got {self.data.shape}")
        return float(self.data[0, 0])

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name}{tag})"


def constant(data, dtype=None) -> Tensor:
    """Wrap an array as a non-trainable graph input."""
    arr = np.asarray(data, dtype=dtype) if dtype is not None else np.asarray(data)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    return Tensor(arr, requires_grad=False)


def parameter(data, name: str, dtype=None) -> Tensor:
    """Wrap an array as a trainable parameter."""
    arr = np.asarray(data, dtype=dtype) if dtype is not None else np.asarray(data)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    return Tensor(arr, requires_grad=True, name=name)


_STACK = threading.local()


def _tapes() -> list:
    stack = getattr(_STACK, "stack", None)
    if stack is None:
        stack = []
        _STACK.stack = stack
    return stack


def _active_tape():
    stack = _tapes()
    return stack[-1] if stack else None


class Tape:
    """Ordered record of executed operations; rebuilt for every forward pass."""

    __slots__ = ("_entries",)

    def __init__(self):
        self._entries: list[tuple] = []

    def __enter__(self) -> "Tape":
        _tapes().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _tapes().pop()
        assert popped is self, "tape stack corrupted"
        return False

    def __len__(self) -> int:
        return len(self._entries)

    def backward(self, loss: Tensor) -> None:
        """Populate ``.grad`` of every requires_grad tensor reachable from loss.

        Tensors recorded on the tape but not on a path to the loss get a zero
        gradient. The loss must be a (1, 1) tensor produced on this tape.
        """
        if loss.shape != (1, 1):
            raise ContractError(f"loss must have shape (1, 1), got {loss.shape}")
        if not any(out is loss for out, _, _ in self._entries):
            raise ContractError("loss was not produced on this tape")
        for out, inputs, _ in self._entries:
            out.grad = None
            for t in inputs:
                if t.requires_grad:
                    t.grad = None
        loss.grad = np.ones((1, 1), dtype=loss.data.dtype)
        for out, inputs, bwd in reversed(self._entries):
            g = out.grad
            if g is None:
                continue
            for t, gi in zip(inputs, bwd(g)):
                if gi is None or not t.requires_grad:
                    continue
                t.grad = gi if t.grad is None else t.grad + gi
        for out, inputs, _ in self._entries:
            for t in inputs:
                if t.requires_grad and t.grad is None:
                    t.grad = np.zeros_like(t.data)
            if out.requires_grad and out.grad is None:
                out.grad = np.zeros_like(out.data)


def _make(out_data: np.ndarray, inputs: tuple, bwd) -> Tensor:
    tape = _active_tape()
    track = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=track)
    if track:
        tape._entries.append((out, inputs, bwd))
    return out


# ---------------------------------------------------------------------------
# forward operations
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} x {b.shape}")
    out = a.data @ b.data

    def bwd(g):
        return g @ b.data.T, a.data.T @ g

    return _make(out, (a, b), bwd)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add: shapes differ, {a.shape} vs {b.shape}")
    return _make(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"sub: shapes differ, {a.shape} vs {b.shape}")
    return _make(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes differ, {a.shape} vs {b.shape}")
    return _make(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    return _make(a.data * s, (a,), lambda g: (g * s,))


def add_scalar(a: Tensor, s: float) -> Tensor:
    s = float(s)
    return _make(a.data + s, (a,), lambda g: (g,))


def transpose(a: Tensor) -> Tensor:
    return _make(a.data.T.copy(), (a,), lambda g: (g.T,))


def concat_cols(*xs: Tensor) -> Tensor:
    if not xs:
        raise ShapeError("concat_cols needs at least one tensor")
    n = xs[0].shape[0]
    for x in xs:
        if x.shape[0] != n:
            raise ShapeError(f"concat_cols: row counts differ, {x.shape} vs ({n}, *)")
    widths = [x.shape[1] for x in xs]
    splits = np.cumsum(widths)[:-1]

    def bwd(g):
        return tuple(np.hsplit(g, splits))

    return _make(np.concatenate([x.data for x in xs], axis=1), xs, bwd)


def concat_rows(*xs: Tensor) -> Tensor:
    if not xs:
        raise ShapeError("concat_rows needs at least one tensor")
    d = xs[0].shape[1]
    for x in xs:
        if x.shape[1] != d:
            raise ShapeError(f"concat_rows: col counts differ, {x.shape} vs (*, {d})")
    heights = [x.shape[0] for x in xs]
    splits = np.cumsum(heights)[:-1]

    def bwd(g):
        return tuple(np.vsplit(g, splits))

    return _make(np.concatenate([x.data for x in xs], axis=0), xs, bwd)


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    n = x.shape[0]
    if not (0 <= start < stop <= n):
        raise ShapeError(f"slice_rows: [{start}:{stop}] out of range for {x.shape}")

    def bwd(g):
        gx = np.zeros_like(x.data)
        gx[start:stop, :] = g
        return (gx,)

    return _make(x.data[start:stop, :].copy(), (x,), bwd)


def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    d = x.shape[1]
    if not (0 <= start < stop <= d):
        raise ShapeError(f"slice_cols: [{start}:{stop}] out of range for {x.shape}")

    def bwd(g):
        gx = np.zeros_like(x.data)
        gx[:, start:stop] = g
        return (gx,)

    return _make(x.data[:, start:stop].copy(), (x,), bwd)


def broadcast_rows(x: Tensor, n: int) -> Tensor:
    """Repeat a (1, d) row down to (n, d)."""
    if x.shape[0] != 1:
        raise ShapeError(f"broadcast_rows expects (1, d), got {x.shape}")
    if n < 1:
        raise ShapeError(f"broadcast_rows: n must be positive, got {n}")

    def bwd(g):
        return (g.sum(axis=0, keepdims=True),)

    return _make(np.broadcast_to(x.data, (n, x.shape[1])).copy(), (x,), bwd)


def broadcast_cols(x: Tensor, d: int) -> Tensor:
    """Repeat an (n, 1) column out to (n, d)."""
    if x.shape[1] != 1:
        raise ShapeError(f"broadcast_cols expects (n, 1), got {x.shape}")
    if d < 1:
        raise ShapeError(f"broadcast_cols: d must be positive, got {d}")

    def bwd(g):
        return (g.sum(axis=1, keepdims=True),)

    return _make(np.broadcast_to(x.data, (x.shape[0], d)).copy(), (x,), bwd)


def sigmoid(x: Tensor) -> Tensor:
    # Split by sign so exp never overflows.
    d = x.data
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ex = np.exp(d[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _make(out, (x,), lambda g: (g * out * (1.0 - out),))


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return _make(out, (x,), lambda g: (g * (1.0 - out * out),))


def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0.0)
    return _make(out, (x,), lambda g: (g * (x.data > 0),))


def softplus(x: Tensor) -> Tensor:
    out = np.logaddexp(np.zeros((), dtype=x.dtype), x.data)
    sig = 1.0 / (1.0 + np.exp(-np.clip(x.data, -60.0, 60.0)))
    return _make(out, (x,), lambda g: (g * sig,))


def row_softmax(x: Tensor) -> Tensor:
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    out = ex / ex.sum(axis=1, keepdims=True)

    def bwd(g):
        dot = (g * out).sum(axis=1, keepdims=True)
        return (out * (g - dot),)

    return _make(out, (x,), bwd)


def mean_pool_rows(x: Tensor) -> Tensor:
    """Average the rows of (n, d) into (1, d)."""
    n = x.shape[0]
    out = x.data.mean(axis=0, keepdims=True)

    def bwd(g):
        return (np.broadcast_to(g / n, x.shape).copy(),)

    return _make(out, (x,), bwd)


def sum_all(x: Tensor) -> Tensor:
    out = np.array([[x.data.sum()]], dtype=x.dtype)

    def bwd(g):
        return (np.full(x.shape, g[0, 0], dtype=x.dtype),)

    return _make(out, (x,), bwd)


def layer_norm_rows(x: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each row to zero mean, unit variance (no affine part)."""
    mu = x.data.mean(axis=1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    out = xc * inv

    def bwd(g):
        gm = g.mean(axis=1, keepdims=True)
        gy = (g * out).mean(axis=1, keepdims=True)
        return (inv * (g - gm - out * gy),)

    return _make(out, (x,), bwd)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b with the (1, k) bias broadcast over rows."""
    y = matmul(x, w)
    return add(y, broadcast_rows(b, y.shape[0]))


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


class AdamState:
    """Per-parameter first/second moments plus shared step counter."""

    def __init__(self, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray],
              state: AdamState) -> None:
    """One bias-corrected Adam update, in place on the parameter tensors.

    Missing gradients count as zero. Non-finite gradients abort with the
    offending parameter's name.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        elif not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter '{name}'")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        p.data -= (state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(p.dtype)


# ---------------------------------------------------------------------------
# finite-difference gradient checking
# ---------------------------------------------------------------------------


def finite_difference_grads(f, tensors: dict[str, Tensor], h: float = 1e-3
                            ) -> dict[str, np.ndarray]:
    """Central-difference gradients of the scalar ``f()`` w.r.t. each tensor.

    ``f`` is re-evaluated with perturbed entries; no tape is active during
    these evaluations. Use float64 tensors for meaningful results.
    """
    grads = {}
    for name, t in tensors.items():
        g = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f().item()
            flat[i] = orig - h
            fm = f().item()
            flat[i] = orig
            gf[i] = (fp - fm) / (2.0 * h)
        grads[name] = g
    return grads


def gradient_check(f, tensors: dict[str, Tensor], h: float = 1e-3
                   ) -> dict[str, float]:
    """Max relative error between analytic and central-difference gradients.

    Per tensor: ``max|a - n| / max(max|a|, max|n|, 1e-4)``. The 1e-4 floor
    keeps finite-difference roundoff on near-zero gradients from dominating.
    """
    with Tape() as tape:
        loss = f()
        tape.backward(loss)
    analytic = {}
    for name, t in tensors.items():
        if t.grad is None:
            raise ContractError(f"tensor '{name}' has no gradient; is it on the tape?")
        analytic[name] = t.grad.copy()
    numeric = finite_difference_grads(f, tensors, h=h)
    errors = {}
    for name in tensors:
        a, n = analytic[name], numeric[name]
        denom = max(np.abs(a).max(), np.abs(n).max(), 1e-4)
        errors[name] = float(np.abs(a - n).max() / denom)
    return errors
