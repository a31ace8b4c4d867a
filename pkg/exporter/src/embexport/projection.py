"""Frozen random projection from an encoder's native width to the engine dim.

Pretrained encoders come in whatever hidden size they come in; the engine
wants a single d. Since nothing here is fine-tuned, the adapter is a fixed
seeded Gaussian projection: deterministic across runs and machines for the
same (label, source dim, target dim, seed) tuple.
"""

import hashlib

import numpy as np


class Projection:
    def __init__(self, src_dim: int, dst_dim: int, label: str, seed: int = 0):
        self.src_dim = src_dim
        self.dst_dim = dst_dim
        if src_dim == dst_dim:
            self.matrix = None
        else:
            digest = hashlib.sha256(
                f"{label}:{src_dim}:{dst_dim}:{seed}".encode()).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            self.matrix = rng.normal(0.0, 1.0 / np.sqrt(dst_dim),
                                     size=(src_dim, dst_dim)).astype(np.float64)

    def apply(self, features: np.ndarray) -> np.ndarray:
        """Project (n, src_dim) features and L2-normalize each row."""
        feats = np.asarray(features, dtype=np.float64)
        if feats.ndim == 1:
            feats = feats.reshape(1, -1)
        if feats.shape[1] != self.src_dim:
            raise ValueError(f"projection expects width {self.src_dim}, "
                             f"got {feats.shape[1]}")
        out = feats if self.matrix is None else feats @ self.matrix
        norms = np.linalg.norm(out, axis=1, keepdims=True)
        norms[norms < 1e-12] = 1.0
        return (out / norms).astype(np.float32)
