"""Writers for the engine's on-disk formats.

This package talks to the labeling engine only through files, so the formats
are implemented here against their documented layout rather than imported.

Embedding file: 5-byte magic "MEMX1", rows and cols as unsigned 32-bit
little-endian, then rows*cols IEEE-754 float32 little-endian values in
row-major order. Manifest: JSON Lines with id, channel paths, sentence path,
labels, n, d; paths relative to the manifest's directory.

All writes are atomic (temp file + rename) so a crashed job never leaves a
half-written artifact.
"""

import json
import os

import numpy as np

MAGIC = b"MEMX1"


class ExportError(Exception):
    """A record could not be exported."""


class ConfigurationError(ExportError):
    """The job configuration is unusable (missing source, bad channel...)."""


def _atomic_write(path: str, payload: bytes) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def write_embedding(matrix: np.ndarray, path: str | os.PathLike) -> None:
    arr = np.asarray(matrix, dtype=np.float32)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ExportError(f"embedding must be non-empty 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ExportError(f"embedding for {path} contains non-finite values")
    rows, cols = arr.shape
    header = MAGIC + rows.to_bytes(4, "little") + cols.to_bytes(4, "little")
    payload = np.ascontiguousarray(arr).astype("<f4", copy=False).tobytes()
    _atomic_write(os.fspath(path), header + payload)


def read_embedding(path: str | os.PathLike) -> np.ndarray:
    """Reader used for source tables and self-checks; mirrors the writer."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:5] != MAGIC:
        raise ExportError(f"{path}: bad magic {blob[:5]!r}")
    rows = int.from_bytes(blob[5:9], "little")
    cols = int.from_bytes(blob[9:13], "little")
    if len(blob) != 13 + rows * cols * 4:
        raise ExportError(f"{path}: truncated payload")
    return np.frombuffer(blob, dtype="<f4", offset=13).reshape(rows, cols).copy()


def write_manifest(records: list[dict], path: str | os.PathLike) -> None:
    lines = "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in records)
    _atomic_write(os.fspath(path), lines.encode("utf-8"))


def write_wordlist(words: list[str], path: str | os.PathLike) -> None:
    _atomic_write(os.fspath(path), ("\n".join(words) + "\n").encode("utf-8"))
