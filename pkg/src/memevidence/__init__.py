"""Meme-conditioned evidence sentence labeling.

Given a meme representation, a pooled knowledge representation, and
per-sentence context embeddings, label each context sentence as evidence or
not. Ships a self-contained reverse-mode engine, the gated fusion/attention/
recurrence layers, training and ablation harnesses, metrics, and a synthetic
corpus generator for encoder-free verification.
"""

__version__ = "0.1.0"

from .dataio import MemeSample, load_corpus, pseudo_encode, read_embedding, \
    write_embedding
from .harness import TrainConfig, ablation_sweep, evaluate, train
from .metrics import CaseMetrics, MetricsReport, aggregate, case_metrics
from .model import MimeParams, VariantSpec, VARIANT_TABLE, bce_loss, forward, \
    load_checkpoint, predict, save_checkpoint
from .syngen import SynthConfig, generate, generate_splits

__all__ = [
    "MemeSample", "load_corpus", "pseudo_encode", "read_embedding",
    "write_embedding", "TrainConfig", "ablation_sweep", "evaluate", "train",
    "CaseMetrics", "MetricsReport", "aggregate", "case_metrics", "MimeParams",
    "VariantSpec", "VARIANT_TABLE", "bce_loss", "forward", "load_checkpoint",
    "predict", "save_checkpoint", "SynthConfig", "generate", "generate_splits",
    "__version__",
]
