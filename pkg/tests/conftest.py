"""Shared test helpers."""

import numpy as np

from memevidence.dataio import MemeSample


def unit(rng, d):
    v = rng.normal(size=d)
    return (v / np.linalg.norm(v)).astype(np.float32)


def make_sample(rng, d=8, n=4, sample_id="t0", labels=None):
    """Random unit-norm sample with all four channels and >=1 positive label."""
    channels = {name: unit(rng, d).reshape(1, d)
                for name in ("mm_meme", "text_meme", "image_meme", "knowledge")}
    sentences = np.stack([unit(rng, d) for _ in range(n)])
    if labels is None:
        labels = [1] + [0] * (n - 1)
    return MemeSample(id=sample_id, channels=channels, sentences=sentences,
                      labels=np.asarray(labels, dtype=np.int64))
