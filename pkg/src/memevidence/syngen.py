"""Deterministic synthetic corpora with a recoverable planted evidence signal.

Each sample gets a unit-norm meme vector m (mm_meme channel) and knowledge
vector k (knowledge channel). Evidence sentences are built as
``normalize(alpha * s + sigma_n * u)`` with fresh unit noise u, where the
carrier s depends on the mode:

    fusion     s = m        (signal recoverable from the meme channel)
    knowledge  s = k        (signal lives only in the knowledge channel)
    text_only  s = topic    (a latent topic vector also mixed into text_meme)

Distractor sentences and unused channels are independent unit noise. A
non-learned cosine threshold rule against the mode's carrier channel serves
as the learnability yardstick.
"""

import os
from dataclasses import dataclass, replace

import numpy as np

from . import dataio
from .errors import ConfigError
from .metrics import MetricsReport, aggregate, case_metrics

MODES = ("fusion", "knowledge", "text_only")

# carrier channel the cosine rule reads, per mode
REFERENCE_CHANNEL = {"fusion": "mm_meme", "knowledge": "knowledge",
                     "text_only": "text_meme"}


@dataclass
class SynthConfig:
    num_samples: int = 1000
    d: int = 32
    n_range: tuple[int, int] = (4, 10)
    evidence_count_range: tuple[int, int] = (1, 3)
    mode: str = "fusion"
    alpha: float = 0.8
    sigma_n: float = 0.3
    seed: int = 42

    def validate(self) -> None:
        n_lo, n_hi = self.n_range
        e_lo, e_hi = self.evidence_count_range
        if self.num_samples < 1:
            raise ConfigError(f"num_samples must be >= 1, got {self.num_samples}")
        if self.d < 1:
            raise ConfigError(f"d must be >= 1, got {self.d}")
        if not (1 <= n_lo <= n_hi <= dataio.MAX_SENTENCES):
            raise ConfigError(f"n_range {self.n_range} outside "
                              f"[1, {dataio.MAX_SENTENCES}]")
        if not (1 <= e_lo <= e_hi):
            raise ConfigError(f"evidence_count_range {self.evidence_count_range} invalid")
        if e_lo > n_lo:
            raise ConfigError(
                f"impossible config: min evidence count {e_lo} exceeds min "
                f"sentence count {n_lo}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (0.0 < self.alpha <= 1.0):
            raise ConfigError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.sigma_n < 0.0:
            raise ConfigError(f"sigma_n must be >= 0, got {self.sigma_n}")


def _unit(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.normal(size=d)
    return v / np.linalg.norm(v)


def _planted(rng: np.random.Generator, carrier: np.ndarray, alpha: float,
             sigma_n: float, d: int) -> np.ndarray:
    v = alpha * carrier + sigma_n * _unit(rng, d)
    return v / np.linalg.norm(v)


def _make_sample(rng: np.random.Generator, config: SynthConfig,
                 sample_id: str) -> dataio.MemeSample:
    d = config.d
    n = int(rng.integers(config.n_range[0], config.n_range[1] + 1))
    e_lo, e_hi = config.evidence_count_range
    n_evidence = int(rng.integers(e_lo, min(e_hi, n) + 1))
    m = _unit(rng, d)
    k = _unit(rng, d)
    topic = _unit(rng, d)
    channels = {"mm_meme": m, "knowledge": k}
    if config.mode == "fusion":
        carrier = m
        channels["text_meme"] = _unit(rng, d)
    elif config.mode == "knowledge":
        carrier = k
        channels["text_meme"] = _unit(rng, d)
    else:
        carrier = topic
        channels["text_meme"] = _planted(rng, topic, config.alpha, config.sigma_n, d)
    channels["image_meme"] = _unit(rng, d)
    positions = rng.permutation(n)[:n_evidence]
    labels = np.zeros(n, dtype=np.int64)
    labels[positions] = 1
    sentences = np.empty((n, d), dtype=np.float64)
    for t in range(n):
        if labels[t]:
            sentences[t] = _planted(rng, carrier, config.alpha, config.sigma_n, d)
        else:
            sentences[t] = _unit(rng, d)
    return dataio.MemeSample(
        id=sample_id,
        channels={name: vec.reshape(1, d).astype(np.float32)
                  for name, vec in channels.items()},
        sentences=sentences.astype(np.float32),
        labels=labels)


def generate(config: SynthConfig, out_dir: str | os.PathLike,
             prefix: str = "corpus") -> str:
    """Write a corpus (manifest + embedding files) and return the manifest path.

    Re-running with the same config and prefix rewrites byte-identical files.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    emb_dir = os.path.join(out_dir, "emb")
    os.makedirs(emb_dir, exist_ok=True)
    records = []
    for i in range(config.num_samples):
        sample = _make_sample(rng, config, f"{prefix}-{i:05d}")
        rel_sent = f"emb/{sample.id}.sent.memx"
        dataio.write_embedding(sample.sentences, os.path.join(out_dir, rel_sent))
        channel_paths = {}
        for name, vec in sample.channels.items():
            rel = f"emb/{sample.id}.{name}.memx"
            dataio.write_embedding(vec, os.path.join(out_dir, rel))
            channel_paths[name] = rel
        records.append({"id": sample.id, "channels": channel_paths,
                        "sentences": rel_sent, "labels": sample.labels.tolist(),
                        "n": sample.n, "d": sample.d})
    manifest = os.path.join(out_dir, f"{prefix}.jsonl")
    dataio.write_manifest(records, manifest)
    return manifest


def generate_splits(config: SynthConfig, out_dir: str | os.PathLike,
                    counts: tuple[int, int, int] = (1000, 100, 100)
                    ) -> dict[str, str]:
    """Write train/val/test corpora with independent per-split streams."""
    config.validate()
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    manifests = {}
    for (split, count), seed_seq in zip(
            zip(("train", "val", "test"), counts), seeds):
        # default_rng accepts a SeedSequence in place of an int seed
        split_cfg = replace(config, num_samples=count, seed=seed_seq)
        manifests[split] = generate(split_cfg, out_dir, prefix=split)
    return manifests


def cosine_rule_labels(sample: dataio.MemeSample, reference_channel: str,
                       threshold: float = 0.5) -> np.ndarray:
    """Label sentences by cosine similarity against a reference channel.

    A zero reference vector (e.g. a zeroed-out channel) predicts no evidence.
    """
    ref = sample.channels[reference_channel].reshape(-1).astype(np.float64)
    ref_norm = np.linalg.norm(ref)
    if ref_norm < 1e-9:
        return np.zeros(sample.n, dtype=np.int64)
    sents = sample.sentences.astype(np.float64)
    norms = np.linalg.norm(sents, axis=1)
    norms[norms < 1e-12] = 1.0
    sims = sents @ ref / (norms * ref_norm)
    return (sims >= threshold).astype(np.int64)


def cosine_rule_report(corpus: list[dataio.MemeSample], reference_channel: str,
                       threshold: float = 0.5) -> MetricsReport:
    cases = [case_metrics(cosine_rule_labels(s, reference_channel, threshold),
                          s.labels) for s in corpus]
    return aggregate(cases)
