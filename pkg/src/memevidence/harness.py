"""Training loop, evaluation driver, ablation sweep, and gradient suite.

Training follows the reference recipe: parameters drawn from N(0, 0.02^2),
Adam on the mean per-sample binary cross-entropy of each mini-batch,
deterministic shuffling from the run seed, and the checkpoint with the best
validation macro-F1 kept. Mini-batches are lists of whole samples; since every
sample runs through the pipeline individually, no padding or masking is needed
for variable sentence counts.
"""

import hashlib
import json
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import gradcore as gc
from . import model as model_mod
from .dataio import MemeSample, load_corpus
from .errors import ConfigError, ShapeError, TrainingError
from .kme import GmfParams, gmf_fuse
from .malstm import MaLstmParams, MaLstmState, malstm_cell, malstm_forward
from .mat import MatParams, mat_encode, meme_aware_attention
from .metrics import MetricsReport, aggregate, case_metrics
from .model import MimeParams, VariantSpec, VARIANT_TABLE, bce_loss, forward, predict

PRECISIONS = {"float32": np.float32, "float64": np.float64}


@dataclass
class TrainConfig:
    train_manifest: str = ""
    val_manifest: str = ""
    test_manifest: str = ""
    d: int = 32
    seed: int = 42
    batch_size: int = 16
    epochs: int = 20
    learning_rate: float = 5e-3  # calibrated on the default synthetic corpus
    variant: str = "full"
    heads: int = 4
    threshold: float = 0.5
    precision: str = "float32"
    stop_at_val_f1: float = 1.0  # stop early once validation macro-F1 reaches this

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.d < 1:
            raise ConfigError(f"d must be >= 1, got {self.d}")
        if self.variant not in VARIANT_TABLE:
            raise ConfigError(f"unknown variant {self.variant!r}; "
                              f"known: {sorted(VARIANT_TABLE)}")
        if self.precision not in PRECISIONS:
            raise ConfigError(f"precision must be one of {sorted(PRECISIONS)}")
        if not (0.0 < self.threshold < 1.0):
            raise ConfigError(f"threshold must be in (0, 1), got {self.threshold}")
        if not self.train_manifest or not self.val_manifest:
            raise ConfigError("train_manifest and val_manifest are required")

    def variant_spec(self) -> VariantSpec:
        return VARIANT_TABLE[self.variant]

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


CONFIG_FIELD_TYPES = {
    "train_manifest": str, "val_manifest": str, "test_manifest": str,
    "d": int, "seed": int, "batch_size": int, "epochs": int,
    "learning_rate": float, "variant": str, "heads": int,
    "threshold": float, "precision": str, "stop_at_val_f1": float,
}


def parse_config_file(path: str | os.PathLike) -> TrainConfig:
    """Read a ``key = value`` config file ('#' starts a comment)."""
    values: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            if key not in CONFIG_FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = CONFIG_FIELD_TYPES[key](raw)
    return TrainConfig(**values)


@dataclass
class RunReport:
    config: dict
    train_losses: list[float]
    val_summaries: list[dict]
    best_epoch: int
    best_val_f1: float
    epochs_run: int
    test_summary: dict | None = None
    wall_clock_sec: float = 0.0
    checkpoint_sha256: str | None = None

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "train_losses": self.train_losses,
            "val_summaries": self.val_summaries,
            "best_epoch": self.best_epoch,
            "best_val_f1": self.best_val_f1,
            "epochs_run": self.epochs_run,
            "test_summary": self.test_summary,
            "checkpoint_sha256": self.checkpoint_sha256,
            "wall_clock_sec": self.wall_clock_sec,
        }

    def determinism_digest(self) -> str:
        """Digest of everything except wall-clock timing."""
        payload = self.to_dict()
        payload.pop("wall_clock_sec")
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def to_text(self) -> str:
        lines = [f"variant        {self.config.get('variant')}",
                 f"seed           {self.config.get('seed')}",
                 f"epochs run     {self.epochs_run} (best: {self.best_epoch}, "
                 f"val F1 {self.best_val_f1:.4f})"]
        for i, (loss, val) in enumerate(zip(self.train_losses, self.val_summaries), 1):
            lines.append(f"epoch {i:>3}  loss {loss:.4f}  val F1 {val['f1']:.4f}  "
                         f"EM {val['exact_match']:.4f}")
        if self.test_summary:
            t = self.test_summary
            lines.append("test       acc {accuracy:.4f}  F1 {f1:.4f}  "
                         "prec {precision:.4f}  rec {recall:.4f}  "
                         "EM {exact_match:.4f}".format(**t))
        lines.append(f"wall clock {self.wall_clock_sec:.1f}s")
        return "\n".join(lines)


def _check_corpus_dim(corpus: list[MemeSample], d: int, what: str) -> None:
    for sample in corpus:
        if sample.d != d:
            raise ShapeError(f"{what} corpus: sample {sample.id!r} has dim "
                             f"{sample.d}, model expects {d}")


def evaluate(params: MimeParams, corpus: list[MemeSample],
             threshold: float = 0.5, predictor=None) -> MetricsReport:
    """Score a corpus. ``predictor`` overrides the model (testing hook)."""
    _check_corpus_dim(corpus, params.d, "evaluation")
    cases = []
    for sample in corpus:
        if predictor is not None:
            labels_hat = np.asarray(predictor(sample))
        else:
            labels_hat = predict(forward(sample, params), threshold)
        cases.append(case_metrics(labels_hat, sample.labels))
    return aggregate(cases)


def _snapshot(named: dict[str, gc.Tensor]) -> dict[str, np.ndarray]:
    return {name: t.data.copy() for name, t in named.items()}


def train(config: TrainConfig) -> tuple[RunReport, MimeParams]:
    """Train one variant; returns the report and the best-validation params."""
    config.validate()
    t0 = time.perf_counter()
    dtype = PRECISIONS[config.precision]
    train_corpus = load_corpus(config.train_manifest)
    val_corpus = load_corpus(config.val_manifest)
    test_corpus = load_corpus(config.test_manifest) if config.test_manifest else None
    init_ss, shuffle_ss = np.random.SeedSequence(config.seed).spawn(2)
    params = MimeParams.init(config.variant_spec(), config.d,
                             np.random.default_rng(init_ss),
                             heads=config.heads, dtype=dtype)
    _check_corpus_dim(train_corpus, params.d, "train")
    _check_corpus_dim(val_corpus, params.d, "validation")
    if test_corpus:
        _check_corpus_dim(test_corpus, params.d, "test")
    named = params.named_tensors()
    adam = gc.AdamState(lr=config.learning_rate)
    shuffle_rng = np.random.default_rng(shuffle_ss)

    train_losses: list[float] = []
    val_summaries: list[dict] = []
    best_f1 = -1.0
    best_epoch = 0
    best_state = _snapshot(named)
    epochs_run = 0
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(train_corpus))
        loss_sum = 0.0
        for b0 in range(0, len(order), config.batch_size):
            batch = [train_corpus[i] for i in order[b0:b0 + config.batch_size]]
            with gc.Tape() as tape:
                losses = [bce_loss(forward(sample, params), sample.labels)
                          for sample in batch]
                batch_loss = losses[0] if len(losses) == 1 \
                    else gc.mean_pool_rows(gc.concat_rows(*losses))
                value = batch_loss.item()
                if not np.isfinite(value):
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch}, batch {b0 // config.batch_size}")
                tape.backward(batch_loss)
            adam_grads = {name: t.grad for name, t in named.items()}
            gc.adam_step(named, adam_grads, adam)
            loss_sum += value * len(batch)
        train_losses.append(loss_sum / len(train_corpus))
        val_report = evaluate(params, val_corpus, config.threshold)
        val_summaries.append(val_report.summary())
        epochs_run = epoch
        if val_report.f1 > best_f1:
            best_f1 = val_report.f1
            best_epoch = epoch
            best_state = _snapshot(named)
        if best_f1 >= config.stop_at_val_f1:
            break
    for name, t in named.items():
        t.data = best_state[name]
    test_summary = None
    if test_corpus:
        test_summary = evaluate(params, test_corpus, config.threshold).summary()
    report = RunReport(config=config.to_dict(), train_losses=train_losses,
                       val_summaries=val_summaries, best_epoch=best_epoch,
                       best_val_f1=best_f1, epochs_run=epochs_run,
                       test_summary=test_summary,
                       wall_clock_sec=time.perf_counter() - t0)
    return report, params


def train_to_files(config: TrainConfig, out_dir: str | os.PathLike
                   ) -> tuple[RunReport, str]:
    """Train, then write checkpoint plus text and JSON reports into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    report, params = train(config)
    ckpt_path = os.path.join(out_dir, "model.ckpt")
    model_mod.save_checkpoint(params, ckpt_path)
    with open(ckpt_path, "rb") as fh:
        report.checkpoint_sha256 = hashlib.sha256(fh.read()).hexdigest()
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(report.to_text() + "\n")
    return report, ckpt_path


# ---------------------------------------------------------------------------
# ablation sweep
# ---------------------------------------------------------------------------

TABLE_METRICS = ("accuracy", "f1", "precision", "recall", "exact_match")
TABLE_HEADERS = ("Acc.", "F1", "Prec.", "Rec.", "E-M")


@dataclass
class AblationTable:
    seeds: list[int]
    rows: dict[str, dict] = field(default_factory=dict)  # variant -> stats

    def add(self, variant: str, summaries: list[dict]) -> None:
        stats = {"runs": summaries, "mean": {}, "std": {}}
        for metric in TABLE_METRICS:
            vals = np.array([s[metric] for s in summaries], dtype=np.float64)
            stats["mean"][metric] = float(vals.mean())
            stats["std"][metric] = float(vals.std())
        self.rows[variant] = stats

    def to_dict(self) -> dict:
        return {"seeds": self.seeds, "rows": self.rows}

    def to_text(self) -> str:
        width = max(len(v) for v in self.rows) + 2
        header = "Model".ljust(width) + "  ".join(f"{h:>15}" for h in TABLE_HEADERS)
        lines = [header, "-" * len(header)]
        for variant, stats in self.rows.items():
            cells = [f"{stats['mean'][m]:.3f} ± {stats['std'][m]:.3f}"
                     for m in TABLE_METRICS]
            lines.append(variant.ljust(width) + "  ".join(f"{c:>15}" for c in cells))
        return "\n".join(lines)


def ablation_sweep(base_config: TrainConfig, variants: list[str],
                   seeds: list[int]) -> AblationTable:
    """Train every variant on every seed; aggregate test metrics per variant."""
    if not base_config.test_manifest:
        raise ConfigError("ablation_sweep needs a test manifest")
    table = AblationTable(seeds=list(seeds))
    for variant in variants:
        summaries = []
        for seed in seeds:
            config = replace(base_config, variant=variant, seed=seed)
            report, _ = train(config)
            if report.test_summary is None:
                raise TrainingError(f"variant {variant!r} produced no test summary")
            summaries.append(report.test_summary)
        table.add(variant, summaries)
    return table


# ---------------------------------------------------------------------------
# finite-difference gradient suite (also behind the `gradcheck` CLI command)
# ---------------------------------------------------------------------------


def gradient_suite(h: float = 1e-3, seed: int = 0) -> dict[str, float]:
    """Max relative finite-difference error per component, in float64.

    ReLU feed-forward biases are pushed off the kink (|pre-activation| >> h),
    where central differences would be invalid regardless of the backward.
    """
    rng = np.random.default_rng(seed)
    d, n = 8, 4
    results: dict[str, float] = {}

    def check(name, f, tensors):
        errs = gc.gradient_check(f, tensors, h=h)
        results[name] = max(errs.values())

    def rand_proj(shape):
        return gc.constant(rng.normal(size=shape), dtype=np.float64)

    gmf = GmfParams.init(d, rng, dtype=np.float64)
    h_m = gc.parameter(rng.normal(size=(1, d)), "in.h_m")
    h_k = gc.parameter(rng.normal(size=(1, d)), "in.h_k")
    r = rand_proj((1, d))
    check("gmf_fuse",
          lambda: gc.sum_all(gc.mul(gmf_fuse(h_m, h_k, gmf), r)),
          dict(gmf.named(), h_m=h_m, h_k=h_k))

    mat_p = MatParams.init(d, rng, heads=2, dtype=np.float64)
    mat_p.ff_b1.data[...] = rng.choice([-0.3, 0.3], size=mat_p.ff_b1.shape)
    h_c = gc.parameter(rng.normal(size=(n, d)), "in.h_c")
    r_attn = rand_proj((n, d))
    attn_tensors = {t.name: t for t in (mat_p.w_q, mat_p.w_k, mat_p.w_v, mat_p.u_k,
                                        mat_p.u_v, mat_p.w_k1, mat_p.w_v1,
                                        mat_p.w_k2, mat_p.w_v2)}
    check("meme_aware_attention",
          lambda: gc.sum_all(gc.mul(meme_aware_attention(h_c, h_m, mat_p), r_attn)),
          dict(attn_tensors, h_c=h_c, h_m=h_m))
    r_enc = rand_proj((n, d))
    check("mat_encode",
          lambda: gc.sum_all(gc.mul(mat_encode(h_c, h_m, mat_p), r_enc)),
          dict(mat_p.named(), h_c=h_c, h_m=h_m))

    lstm_p = MaLstmParams.init(d, rng, dtype=np.float64)
    x_t = gc.parameter(rng.normal(size=(1, d)), "in.x_t")
    r_h = rand_proj((1, d))
    r_c = rand_proj((1, d))

    def cell_loss():
        state = malstm_cell(x_t, MaLstmState.zeros(d, dtype=np.float64), h_m, lstm_p)
        return gc.add(gc.sum_all(gc.mul(state.h, r_h)),
                      gc.sum_all(gc.mul(state.c, r_c)))

    check("malstm_cell", cell_loss, dict(lstm_p.named(), x_t=x_t, h_m=h_m))

    x_seq = gc.parameter(rng.normal(size=(3, d)), "in.x_seq")
    r_seq = rand_proj((3, d))
    check("malstm_forward_3step",
          lambda: gc.sum_all(gc.mul(malstm_forward(x_seq, h_m, lstm_p), r_seq)),
          dict(lstm_p.named(), x_seq=x_seq, h_m=h_m))

    z = gc.parameter(rng.normal(size=(6, 1)), "in.z")
    y = rng.integers(0, 2, size=6)
    check("bce_loss", lambda: bce_loss(z, y), {"z": z})

    full = MimeParams.init(VariantSpec.full(), d, rng, heads=2, dtype=np.float64)
    full.mat.ff_b1.data[...] = rng.choice([-0.3, 0.3], size=full.mat.ff_b1.shape)
    channels = {name: (rng.normal(size=(1, d)) / np.sqrt(d)).astype(np.float32)
                for name in ("mm_meme", "text_meme", "image_meme", "knowledge")}
    sample = MemeSample(id="gradcheck", channels=channels,
                        sentences=rng.normal(size=(n, d)).astype(np.float32),
                        labels=np.array([1, 0, 1, 0]))
    check("full_model",
          lambda: bce_loss(forward(sample, full), sample.labels),
          full.named_tensors())
    return results
