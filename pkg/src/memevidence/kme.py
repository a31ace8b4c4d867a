"""Knowledge-enriched meme encoding: pooled word knowledge plus gated fusion.

The fusion block concatenates the meme vector and the knowledge vector, feeds
the 2d concat through two sigmoid gates, and mixes the raw streams:

    z   = [h_m ; h_k]            (1, 2d)
    g_m = sigmoid(z W_m + b_m)   (1, d)
    g_k = sigmoid(z W_k + b_k)   (1, d)
    out = g_m * h_m + g_k * h_k
"""

import os
from dataclasses import dataclass

import numpy as np

from . import dataio
from . import gradcore as gc
from .errors import ShapeError, ValidationError

INIT_STD = 0.02


class KnowledgeTable:
    """Case-folded word -> (d,) vector map distilled from graph-node embeddings."""

    def __init__(self, vectors: dict[str, np.ndarray], d: int):
        self.d = d
        self._vectors: dict[str, np.ndarray] = {}
        for word, vec in vectors.items():
            vec = np.asarray(vec, dtype=np.float32).reshape(-1)
            if vec.shape != (d,):
                raise ValidationError(
                    f"knowledge vector for {word!r} has dim {vec.shape[0]}, expected {d}")
            self._vectors.setdefault(word.casefold(), vec)

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, word: str) -> bool:
        return word.casefold() in self._vectors

    def lookup(self, word: str) -> np.ndarray | None:
        return self._vectors.get(word.casefold())

    def save(self, emb_path: str | os.PathLike, words_path: str | os.PathLike) -> None:
        """Write the row-aligned embedding file plus one-word-per-line sidecar."""
        words = list(self._vectors.keys())
        matrix = np.stack([self._vectors[w] for w in words]) if words else None
        if matrix is None:
            raise ValidationError("cannot save an empty knowledge table")
        dataio.write_embedding(matrix, emb_path)
        with open(words_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(words) + "\n")

    @classmethod
    def load(cls, emb_path: str | os.PathLike, words_path: str | os.PathLike
             ) -> "KnowledgeTable":
        matrix = dataio.read_embedding(emb_path)
        with open(words_path, "r", encoding="utf-8") as fh:
            words = [line.strip() for line in fh if line.strip()]
        if len(words) != matrix.shape[0]:
            raise ValidationError(
                f"word list has {len(words)} entries but embedding has "
                f"{matrix.shape[0]} rows")
        return cls({w: matrix[i] for i, w in enumerate(words)}, d=matrix.shape[1])


def knowledge_repr(tokens: list[str], table: KnowledgeTable) -> np.ndarray:
    """Average the table vectors of ``tokens`` into a (1, d) knowledge vector.

    Out-of-vocabulary tokens contribute zero vectors but still count in the
    denominator; an empty or all-OOV token list yields the zero vector.
    """
    if not tokens:
        return np.zeros((1, table.d), dtype=np.float32)
    acc = np.zeros(table.d, dtype=np.float64)
    for tok in tokens:
        vec = table.lookup(tok)
        if vec is not None:
            acc += vec
    acc /= len(tokens)
    return acc.reshape(1, table.d).astype(np.float32)


@dataclass
class GmfParams:
    """Gated-fusion weights; the gates themselves are transient activations."""

    w_m: gc.Tensor  # (2d, d)
    w_k: gc.Tensor  # (2d, d)
    b_m: gc.Tensor  # (1, d)
    b_k: gc.Tensor  # (1, d)

    @classmethod
    def init(cls, d: int, rng: np.random.Generator, dtype=np.float32) -> "GmfParams":
        def gauss(shape, name):
            return gc.parameter(rng.normal(0.0, INIT_STD, size=shape).astype(dtype), name)

        return cls(w_m=gauss((2 * d, d), "gmf.w_m"),
                   w_k=gauss((2 * d, d), "gmf.w_k"),
                   b_m=gauss((1, d), "gmf.b_m"),
                   b_k=gauss((1, d), "gmf.b_k"))

    @property
    def d(self) -> int:
        return self.w_m.shape[1]

    def named(self) -> dict[str, gc.Tensor]:
        return {t.name: t for t in (self.w_m, self.w_k, self.b_m, self.b_k)}


def gmf_fuse(h_m: gc.Tensor, h_k: gc.Tensor, params: GmfParams) -> gc.Tensor:
    """Fuse a (1, d) meme vector with a (1, d) knowledge vector."""
    d = params.d
    if h_m.shape != (1, d) or h_k.shape != (1, d):
        raise ShapeError(
            f"gmf_fuse: inputs must be (1, {d}), got {h_m.shape} and {h_k.shape}")
    z = gc.concat_cols(h_m, h_k)
    g_m = gc.sigmoid(gc.affine(z, params.w_m, params.b_m))
    g_k = gc.sigmoid(gc.affine(z, params.w_k, params.b_k))
    return gc.add(gc.mul(g_m, h_m), gc.mul(g_k, h_k))
