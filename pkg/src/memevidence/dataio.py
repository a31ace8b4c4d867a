"""Embedding and manifest file formats, corpus loading, and a pseudo-encoder.

Embedding file layout (little-endian, 13-byte header):

    bytes 0..4   magic "MEMX1"
    bytes 5..8   rows, unsigned 32-bit
    bytes 9..12  cols, unsigned 32-bit
    bytes 13..   rows * cols IEEE-754 float32 values, row-major

A corpus manifest is JSON Lines: one self-contained object per line with
fields ``id``, ``channels`` (channel name -> embedding path), ``sentences``
(embedding path), ``labels`` (list of 0/1), ``n``, ``d``. Paths are resolved
relative to the manifest's directory.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ValidationError

MAGIC = b"MEMX1"
HEADER_SIZE = 13
MAX_SENTENCES = 10

MEME_CHANNELS = ("mm_meme", "text_meme", "image_meme")
KNOWLEDGE_CHANNEL = "knowledge"
ALL_CHANNELS = MEME_CHANNELS + (KNOWLEDGE_CHANNEL,)


def write_embedding(matrix: np.ndarray, path: str | os.PathLike) -> None:
    """Write a 2-D float array in the documented binary layout."""
    arr = np.asarray(matrix, dtype=np.float32)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"embedding must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"embedding for {path} contains non-finite values")
    rows, cols = arr.shape
    header = MAGIC + rows.to_bytes(4, "little") + cols.to_bytes(4, "little")
    payload = np.ascontiguousarray(arr).astype("<f4", copy=False).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_embedding(path: str | os.PathLike) -> np.ndarray:
    """Read an embedding file; inverse of write_embedding, bit-exact."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < HEADER_SIZE:
        raise FormatError(f"{path}: file shorter than the {HEADER_SIZE}-byte header")
    if blob[:5] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:5]!r}, expected {MAGIC!r}")
    rows = int.from_bytes(blob[5:9], "little")
    cols = int.from_bytes(blob[9:13], "little")
    if rows < 1 or cols < 1:
        raise FormatError(f"{path}: header declares empty matrix {rows}x{cols}")
    expected = rows * cols * 4
    actual = len(blob) - HEADER_SIZE
    if actual != expected:
        raise FormatError(f"{path}: payload is {actual} bytes, expected {expected}")
    arr = np.frombuffer(blob, dtype="<f4", offset=HEADER_SIZE).reshape(rows, cols)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{path}: payload contains non-finite values")
    return np.ascontiguousarray(arr)


@dataclass
class MemeSample:
    """One task instance: meme channels, knowledge vector, sentences, labels."""

    id: str
    channels: dict[str, np.ndarray]  # channel name -> (1, d)
    sentences: np.ndarray            # (n, d)
    labels: np.ndarray               # (n,) of 0/1
    n: int = field(init=False)
    d: int = field(init=False)

    def __post_init__(self):
        self.sentences = np.asarray(self.sentences, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.n = int(self.sentences.shape[0])
        self.d = int(self.sentences.shape[1])

    def validate(self, require_positive: bool = True) -> None:
        if not (1 <= self.n <= MAX_SENTENCES):
            raise ValidationError(
                f"sample {self.id!r}: n={self.n} outside [1, {MAX_SENTENCES}]")
        if self.labels.shape != (self.n,):
            raise ValidationError(
                f"sample {self.id!r}: {len(self.labels)} labels for {self.n} sentences")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise ValidationError(f"sample {self.id!r}: labels must be 0 or 1")
        if require_positive and not np.any(self.labels == 1):
            raise ValidationError(f"sample {self.id!r}: gold labels have no evidence sentence")
        for name, vec in self.channels.items():
            if name not in ALL_CHANNELS:
                raise ValidationError(f"sample {self.id!r}: unknown channel {name!r}")
            if vec.shape != (1, self.d):
                raise ValidationError(
                    f"sample {self.id!r}: channel {name!r} has shape {vec.shape}, "
                    f"expected (1, {self.d})")


def write_manifest(records: list[dict], path: str | os.PathLike) -> None:
    """Write manifest records as JSON Lines (one object per line)."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_corpus(manifest_path: str | os.PathLike,
                require_positive: bool = True) -> list[MemeSample]:
    """Load and validate every sample in a manifest, preserving order.

    Loading is total: each record either yields a valid MemeSample or raises a
    ValidationError/FormatError naming the sample. ``require_positive=False``
    admits unlabeled corpora (all-zero labels) for pure inference.
    """
    base = os.path.dirname(os.path.abspath(manifest_path))
    samples: list[MemeSample] = []
    seen: set[str] = set()
    with open(manifest_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{manifest_path}:{lineno}: bad JSON record: {exc}") from exc
            sample = _record_to_sample(rec, base, f"{manifest_path}:{lineno}")
            if sample.id in seen:
                raise ValidationError(f"duplicate sample id {sample.id!r} in {manifest_path}")
            seen.add(sample.id)
            sample.validate(require_positive=require_positive)
            samples.append(sample)
    return samples


def _record_to_sample(rec: dict, base: str, where: str) -> MemeSample:
    for key in ("id", "channels", "sentences", "labels"):
        if key not in rec:
            raise ValidationError(f"{where}: record is missing field {key!r}")
    sid = str(rec["id"])
    sentences = read_embedding(os.path.join(base, rec["sentences"]))
    channels: dict[str, np.ndarray] = {}
    for name, relpath in rec["channels"].items():
        vec = read_embedding(os.path.join(base, relpath))
        if vec.shape[0] != 1:
            raise ValidationError(
                f"sample {sid!r}: channel {name!r} file has {vec.shape[0]} rows, expected 1")
        if vec.shape[1] != sentences.shape[1]:
            raise ValidationError(
                f"sample {sid!r}: channel {name!r} dim {vec.shape[1]} != sentence dim "
                f"{sentences.shape[1]}")
        channels[name] = vec
    sample = MemeSample(id=sid, channels=channels, sentences=sentences,
                        labels=np.asarray(rec["labels"], dtype=np.int64))
    if "n" in rec and int(rec["n"]) != sample.n:
        raise ValidationError(f"sample {sid!r}: manifest n={rec['n']} but file has {sample.n} rows")
    if "d" in rec and int(rec["d"]) != sample.d:
        raise ValidationError(f"sample {sid!r}: manifest d={rec['d']} but file has dim {sample.d}")
    return sample


# ---------------------------------------------------------------------------
# deterministic pseudo-encoder (test stand-in for pretrained encoders)
# ---------------------------------------------------------------------------

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 1 << 64


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) % _U64
    return h


def pseudo_encode(text: str, d: int) -> np.ndarray:
    """Hash a string to a unit-norm (1, d) vector, identically on any platform.

    Coordinate j of token w is ``2 * fnv1a64(w + ":" + str(j)) / 2^64 - 1``;
    the sentence vector is the token mean, L2-normalized. Empty or
    whitespace-only text maps to the zero vector.
    """
    if d < 1:
        raise ValidationError(f"pseudo_encode: d must be >= 1, got {d}")
    tokens = text.split()
    if not tokens:
        return np.zeros((1, d), dtype=np.float32)
    acc = np.zeros(d, dtype=np.float64)
    for tok in tokens:
        prefix = tok.encode("utf-8") + b":"
        for j in range(d):
            acc[j] += 2.0 * (_fnv1a64(prefix + str(j).encode("ascii")) / _U64) - 1.0
    acc /= len(tokens)
    norm = np.linalg.norm(acc)
    if norm > 1e-12:
        acc /= norm
    return acc.reshape(1, d).astype(np.float32)
