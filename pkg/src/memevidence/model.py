"""Model variants, the prediction head, loss, and checkpoint files.

A variant picks one option per axis: gated knowledge fusion on or off, the
context encoder (meme-aware transformer, plain transformer, or none), the
sequence layer (meme-aware LSTM, plain BiLSTM, or none), and which embedding
channel stands in for the meme. The full model is (on, meme-aware transformer,
meme-aware LSTM, mm_meme); the base model wires the meme channel and raw
sentence rows straight into the head.

Each sentence logit comes from a single linear layer over the concatenation of
that sentence's final representation and the meme representation.
"""

import json
import os
from dataclasses import dataclass, replace

import numpy as np

from . import gradcore as gc
from .dataio import MemeSample
from .errors import ConfigError, ContractError, FormatError, ShapeError
from .kme import GmfParams, gmf_fuse
from .malstm import MaLstmParams, malstm_forward
from .mat import DEFAULT_HEADS, MatParams, mat_encode

INIT_STD = 0.02

CONTEXT_ENCODERS = ("meme_aware_transformer", "standard_transformer", "none")
SEQUENCE_LAYERS = ("ma_lstm", "bilstm", "none")
MEME_CHANNELS = ("mm_meme", "text_meme", "image_meme", "early_fusion_concat")

CKPT_MAGIC = b"MEVC1"
CKPT_VERSION = 1


@dataclass(frozen=True)
class VariantSpec:
    use_kme: bool = True
    context_encoder: str = "meme_aware_transformer"
    sequence_layer: str = "ma_lstm"
    meme_channel: str = "mm_meme"

    def __post_init__(self):
        if self.context_encoder not in CONTEXT_ENCODERS:
            raise ConfigError(f"unknown context encoder {self.context_encoder!r}")
        if self.sequence_layer not in SEQUENCE_LAYERS:
            raise ConfigError(f"unknown sequence layer {self.sequence_layer!r}")
        if self.meme_channel not in MEME_CHANNELS:
            raise ConfigError(f"unknown meme channel {self.meme_channel!r}")

    @classmethod
    def full(cls) -> "VariantSpec":
        return cls()

    @classmethod
    def base(cls) -> "VariantSpec":
        return cls(use_kme=False, context_encoder="none", sequence_layer="none")

    def to_dict(self) -> dict:
        return {"use_kme": self.use_kme, "context_encoder": self.context_encoder,
                "sequence_layer": self.sequence_layer, "meme_channel": self.meme_channel}

    @classmethod
    def from_dict(cls, d: dict) -> "VariantSpec":
        return cls(**d)


# Named variants: the incremental (+) and decremental (-) lattice around the
# full model, plus the embedding-channel baselines.
VARIANT_TABLE: dict[str, VariantSpec] = {
    "base": VariantSpec.base(),
    "+kme": replace(VariantSpec.base(), use_kme=True),
    "+mat": replace(VariantSpec.base(), context_encoder="meme_aware_transformer"),
    "+malstm": replace(VariantSpec.base(), sequence_layer="ma_lstm"),
    "-kme": replace(VariantSpec.full(), use_kme=False),
    "-mat": replace(VariantSpec.full(), context_encoder="none"),
    "-mat+t": replace(VariantSpec.full(), context_encoder="standard_transformer"),
    "-malstm": replace(VariantSpec.full(), sequence_layer="none"),
    "-malstm+bilstm": replace(VariantSpec.full(), sequence_layer="bilstm"),
    "text_only": replace(VariantSpec.base(), meme_channel="text_meme"),
    "image_only": replace(VariantSpec.base(), meme_channel="image_meme"),
    "early_fusion": replace(VariantSpec.base(), meme_channel="early_fusion_concat"),
    "full": VariantSpec.full(),
}


_GATES = ("i", "f", "o", "g")


@dataclass
class LstmParams:
    """Standard rectangular LSTM (used per direction inside the BiLSTM)."""

    w: dict[str, gc.Tensor]  # (in_dim, hidden)
    u: dict[str, gc.Tensor]  # (hidden, hidden)
    b: dict[str, gc.Tensor]  # (1, hidden)

    @classmethod
    def init(cls, in_dim: int, hidden: int, rng: np.random.Generator,
             prefix: str, dtype=np.float32) -> "LstmParams":
        def gauss(shape, name):
            return gc.parameter(rng.normal(0.0, INIT_STD, size=shape).astype(dtype),
                                f"{prefix}.{name}")

        return cls(w={g: gauss((in_dim, hidden), f"w_{g}") for g in _GATES},
                   u={g: gauss((hidden, hidden), f"u_{g}") for g in _GATES},
                   b={g: gauss((1, hidden), f"b_{g}") for g in _GATES})

    @property
    def hidden(self) -> int:
        return self.u["i"].shape[0]

    def named(self) -> dict[str, gc.Tensor]:
        out = {}
        for group in (self.w, self.u, self.b):
            for t in group.values():
                out[t.name] = t
        return out


def _lstm_scan(rows: list[gc.Tensor], params: LstmParams) -> list[gc.Tensor]:
    hidden = params.hidden
    h = gc.constant(np.zeros((1, hidden)), dtype=rows[0].dtype)
    c = gc.constant(np.zeros((1, hidden)), dtype=rows[0].dtype)
    outs = []
    for x_t in rows:
        def gate(name):
            pre = gc.add(gc.matmul(x_t, params.w[name]), gc.matmul(h, params.u[name]))
            return gc.add(pre, params.b[name])

        i_t = gc.sigmoid(gate("i"))
        f_t = gc.sigmoid(gate("f"))
        o_t = gc.sigmoid(gate("o"))
        g_t = gc.tanh(gate("g"))
        c = gc.add(gc.mul(f_t, c), gc.mul(i_t, g_t))
        h = gc.mul(o_t, gc.tanh(c))
        outs.append(h)
    return outs


@dataclass
class BiLstmParams:
    """Two opposing standard LSTMs with hidden size d/2, outputs concatenated."""

    fwd: LstmParams
    bwd: LstmParams

    @classmethod
    def init(cls, d: int, rng: np.random.Generator, dtype=np.float32) -> "BiLstmParams":
        if d % 2 != 0:
            raise ConfigError(f"bilstm needs an even model dim, got {d}")
        half = d // 2
        return cls(fwd=LstmParams.init(d, half, rng, "bilstm.fwd", dtype=dtype),
                   bwd=LstmParams.init(d, half, rng, "bilstm.bwd", dtype=dtype))

    def named(self) -> dict[str, gc.Tensor]:
        return {**self.fwd.named(), **self.bwd.named()}


def bilstm_forward(x: gc.Tensor, params: BiLstmParams) -> gc.Tensor:
    n = x.shape[0]
    rows = [gc.slice_rows(x, t, t + 1) for t in range(n)]
    out_f = _lstm_scan(rows, params.fwd)
    out_b = list(reversed(_lstm_scan(list(reversed(rows)), params.bwd)))
    merged = [gc.concat_cols(f, b) for f, b in zip(out_f, out_b)]
    return merged[0] if n == 1 else gc.concat_rows(*merged)


@dataclass
class MimeParams:
    """Full parameter set of one model variant."""

    d: int
    variant: VariantSpec
    head_w: gc.Tensor  # (2d, 1)
    head_b: gc.Tensor  # (1, 1)
    gmf: GmfParams | None = None
    mat: MatParams | None = None
    malstm: MaLstmParams | None = None
    bilstm: BiLstmParams | None = None
    fusion_proj: gc.Tensor | None = None  # (2d, d) for the early-fusion channel
    dtype: type = np.float32

    @classmethod
    def init(cls, variant: VariantSpec, d: int, rng: np.random.Generator,
             heads: int = DEFAULT_HEADS, dtype=np.float32) -> "MimeParams":
        def gauss(shape, name):
            return gc.parameter(rng.normal(0.0, INIT_STD, size=shape).astype(dtype), name)

        params = cls(d=d, variant=variant,
                     head_w=gauss((2 * d, 1), "head.w"),
                     head_b=gauss((1, 1), "head.b"),
                     dtype=dtype)
        if variant.use_kme:
            params.gmf = GmfParams.init(d, rng, dtype=dtype)
        if variant.context_encoder != "none":
            params.mat = MatParams.init(
                d, rng, heads=heads,
                gated=(variant.context_encoder == "meme_aware_transformer"),
                dtype=dtype)
        if variant.sequence_layer == "ma_lstm":
            params.malstm = MaLstmParams.init(d, rng, dtype=dtype)
        elif variant.sequence_layer == "bilstm":
            params.bilstm = BiLstmParams.init(d, rng, dtype=dtype)
        if variant.meme_channel == "early_fusion_concat":
            params.fusion_proj = gauss((2 * d, d), "fusion.proj")
        return params

    def named_tensors(self) -> dict[str, gc.Tensor]:
        out: dict[str, gc.Tensor] = {}
        for part in (self.gmf, self.mat, self.malstm, self.bilstm):
            if part is not None:
                out.update(part.named())
        if self.fusion_proj is not None:
            out[self.fusion_proj.name] = self.fusion_proj
        out["head.w"] = self.head_w
        out["head.b"] = self.head_b
        return out


def _meme_vector(sample: MemeSample, params: MimeParams) -> gc.Tensor:
    variant = params.variant
    if variant.meme_channel == "early_fusion_concat":
        for name in ("text_meme", "image_meme"):
            if name not in sample.channels:
                raise ShapeError(
                    f"meme channel stage: sample {sample.id!r} lacks channel {name!r}")
        cat = gc.concat_cols(
            gc.constant(sample.channels["text_meme"], dtype=params.dtype),
            gc.constant(sample.channels["image_meme"], dtype=params.dtype))
        return gc.matmul(cat, params.fusion_proj)
    name = variant.meme_channel
    if name not in sample.channels:
        raise ShapeError(f"meme channel stage: sample {sample.id!r} lacks channel {name!r}")
    return gc.constant(sample.channels[name], dtype=params.dtype)


def forward(sample: MemeSample, params: MimeParams,
            gate_hook: float | None = None) -> gc.Tensor:
    """Per-sentence evidence logits, shape (n, 1)."""
    if sample.d != params.d:
        raise ShapeError(
            f"input stage: sample {sample.id!r} has dim {sample.d}, model has {params.d}")
    h_m = _meme_vector(sample, params)
    if params.variant.use_kme:
        if "knowledge" not in sample.channels:
            raise ShapeError(
                f"fusion stage: sample {sample.id!r} lacks the knowledge channel")
        h_k = gc.constant(sample.channels["knowledge"], dtype=params.dtype)
        h_m = gmf_fuse(h_m, h_k, params.gmf)
    h_c = gc.constant(sample.sentences, dtype=params.dtype)
    if params.variant.context_encoder != "none":
        h_c = mat_encode(h_c, h_m, params.mat, gate_hook=gate_hook)
    if params.variant.sequence_layer == "ma_lstm":
        h_c = malstm_forward(h_c, h_m, params.malstm)
    elif params.variant.sequence_layer == "bilstm":
        h_c = bilstm_forward(h_c, params.bilstm)
    feats = gc.concat_cols(h_c, gc.broadcast_rows(h_m, sample.n))
    return gc.affine(feats, params.head_w, params.head_b)


def bce_loss(logits: gc.Tensor, labels: np.ndarray) -> gc.Tensor:
    """Mean binary cross-entropy over sentences, in the stable softplus form.

    Per sentence: softplus(z) - y*z, which equals
    -[y*log(sigmoid(z)) + (1-y)*log(1-sigmoid(z))].
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ContractError("bce_loss: empty label vector")
    if logits.shape != (labels.size, 1):
        raise ShapeError(
            f"bce_loss: logits {logits.shape} vs {labels.size} labels")
    y = gc.constant(labels.reshape(-1, 1).astype(np.float64), dtype=logits.dtype)
    per = gc.sub(gc.softplus(logits), gc.mul(y, logits))
    return gc.mean_pool_rows(per)


def predict(logits, threshold: float = 0.5) -> np.ndarray:
    """Binary labels from logits: 1 iff sigmoid(logit) >= threshold."""
    if not (0.0 < threshold < 1.0):
        raise ContractError(f"threshold must be in (0, 1), got {threshold}")
    arr = logits.data if isinstance(logits, gc.Tensor) else np.asarray(logits)
    arr = arr.reshape(-1).astype(np.float64)
    probs = 1.0 / (1.0 + np.exp(-arr))
    return (probs >= threshold).astype(np.int64)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(params: MimeParams, path: str | os.PathLike) -> None:
    """Versioned header + variant spec + named parameter blobs (little-endian)."""
    tensors = params.named_tensors()
    names = list(tensors.keys())
    header = {
        "format_version": CKPT_VERSION,
        "d": params.d,
        "dtype": np.dtype(params.dtype).name,
        "variant": params.variant.to_dict(),
        "heads": params.mat.heads if params.mat is not None else None,
        "meme_scale": params.malstm.meme_scale if params.malstm is not None else None,
        "tensors": [[name, *tensors[name].shape] for name in names],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(CKPT_VERSION.to_bytes(4, "little"))
        fh.write(len(blob).to_bytes(4, "little"))
        fh.write(blob)
        for name in names:
            arr = tensors[name].data
            fh.write(np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes())


def load_checkpoint(path: str | os.PathLike) -> MimeParams:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != CKPT_MAGIC:
            raise FormatError(f"{path}: bad checkpoint magic {magic!r}")
        version = int.from_bytes(fh.read(4), "little")
        if version != CKPT_VERSION:
            raise FormatError(
                f"{path}: checkpoint format version {version}, expected {CKPT_VERSION}")
        header_len = int.from_bytes(fh.read(4), "little")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        dtype = np.dtype(header["dtype"])
        variant = VariantSpec.from_dict(header["variant"])
        params = MimeParams.init(variant, header["d"], np.random.default_rng(0),
                                 heads=header["heads"] or DEFAULT_HEADS,
                                 dtype=dtype.type)
        if params.malstm is not None and header.get("meme_scale") is not None:
            params.malstm.meme_scale = float(header["meme_scale"])
        tensors = params.named_tensors()
        listed = {name for name, *_ in header["tensors"]}
        if listed != set(tensors):
            missing = set(tensors) - listed
            extra = listed - set(tensors)
            raise FormatError(f"{path}: tensor set mismatch "
                              f"(missing {sorted(missing)}, extra {sorted(extra)})")
        for name, rows, cols in header["tensors"]:
            want = tensors[name]
            if want.shape != (rows, cols):
                raise FormatError(f"{path}: tensor {name!r} has shape {(rows, cols)}, "
                                  f"expected {want.shape}")
            count = rows * cols
            raw = fh.read(count * dtype.itemsize)
            if len(raw) != count * dtype.itemsize:
                raise FormatError(f"{path}: truncated payload for tensor {name!r}")
            want.data = np.frombuffer(raw, dtype=dtype.newbyteorder("<")) \
                .astype(dtype, copy=True).reshape(rows, cols)
    return params
