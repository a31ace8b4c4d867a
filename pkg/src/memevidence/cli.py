"""Command-line interface: train, eval, predict, gen-synth, gradcheck, ablate."""

import argparse
import json
import os
import sys

import numpy as np

from . import harness, model, syngen
from .dataio import load_corpus
from .errors import MemevidenceError


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--train", dest="train_manifest", help="training manifest")
    p.add_argument("--val", dest="val_manifest", help="validation manifest")
    p.add_argument("--test", dest="test_manifest", help="test manifest")
    p.add_argument("--d", type=int, help="embedding dimension")
    p.add_argument("--seed", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", dest="learning_rate", type=float)
    p.add_argument("--variant", choices=sorted(model.VARIANT_TABLE))
    p.add_argument("--heads", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--precision", choices=sorted(harness.PRECISIONS))
    p.add_argument("--stop-at-val-f1", dest="stop_at_val_f1", type=float)


def _build_config(args: argparse.Namespace) -> harness.TrainConfig:
    config = harness.parse_config_file(args.config) if args.config \
        else harness.TrainConfig()
    for name in harness.CONFIG_FIELD_TYPES:
        value = getattr(args, name, None)
        if value is not None:
            setattr(config, name, value)
    return config


def cmd_train(args) -> int:
    config = _build_config(args)
    report, ckpt = harness.train_to_files(config, args.out)
    print(report.to_text())
    print(f"checkpoint: {ckpt}")
    return 0


def cmd_eval(args) -> int:
    params = model.load_checkpoint(args.checkpoint)
    corpus = load_corpus(args.manifest)
    report = harness.evaluate(params, corpus, threshold=args.threshold)
    print(report.to_text())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
    return 0


def cmd_predict(args) -> int:
    params = model.load_checkpoint(args.checkpoint)
    corpus = load_corpus(args.manifest, require_positive=False)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for sample in corpus:
            logits = model.forward(sample, params).data.reshape(-1)
            probs = (1.0 / (1.0 + np.exp(-logits.astype(np.float64))))
            labels = model.predict(logits, threshold=args.threshold)
            record = {"id": sample.id, "labels": labels.tolist(),
                      "probs": [round(float(p), 6) for p in probs]}
            out.write(json.dumps(record, sort_keys=True) + "\n")
    finally:
        if args.out:
            out.close()
    return 0


def cmd_gen_synth(args) -> int:
    config = syngen.SynthConfig(
        num_samples=args.num_samples, d=args.d, n_range=tuple(args.n_range),
        evidence_count_range=tuple(args.evidence_range), mode=args.mode,
        alpha=args.alpha, sigma_n=args.sigma_n, seed=args.seed)
    if args.splits:
        counts = tuple(int(x) for x in args.splits.split(","))
        if len(counts) != 3:
            raise MemevidenceError("--splits expects train,val,test counts")
        manifests = syngen.generate_splits(config, args.out, counts=counts)
        for split, path in manifests.items():
            print(f"{split}: {path}")
    else:
        manifest = syngen.generate(config, args.out)
        print(manifest)
    return 0


def cmd_gradcheck(args) -> int:
    results = harness.gradient_suite(h=args.h, seed=args.seed)
    worst = max(results.values())
    for name, err in results.items():
        status = "ok" if err < args.tolerance else "FAIL"
        print(f"{name:<24} max rel err {err:.3e}  {status}")
    print(f"worst {worst:.3e} (tolerance {args.tolerance:g})")
    return 0 if worst < args.tolerance else 1


def cmd_ablate(args) -> int:
    config = _build_config(args)
    variants = args.variants.split(",")
    seeds = [int(s) for s in args.seeds.split(",")]
    table = harness.ablation_sweep(config, variants, seeds)
    print(table.to_text())
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "ablation.json"), "w", encoding="utf-8") as fh:
            json.dump(table.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
        with open(os.path.join(args.out, "ablation.txt"), "w", encoding="utf-8") as fh:
            fh.write(table.to_text() + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memevidence",
        description="Meme-conditioned evidence sentence labeling")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a variant and write checkpoint/reports")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", help="optional JSON report path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="write per-sample predictions as JSON lines")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("gen-synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--num-samples", type=int, default=1000)
    p.add_argument("--d", type=int, default=32)
    p.add_argument("--n-range", type=int, nargs=2, default=(4, 10),
                   metavar=("LO", "HI"))
    p.add_argument("--evidence-range", type=int, nargs=2, default=(1, 3),
                   metavar=("LO", "HI"))
    p.add_argument("--mode", choices=syngen.MODES, default="fusion")
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--sigma-n", dest="sigma_n", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--splits", help="train,val,test counts (e.g. 1000,100,100)")
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--h", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ablate", help="train variants across seeds, emit a table")
    _add_config_flags(p)
    p.add_argument("--variants", required=True,
                   help="comma-separated variant names")
    p.add_argument("--seeds", default="0,1,2,3,4",
                   help="comma-separated training seeds")
    p.add_argument("--out", help="output directory for table files")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MemevidenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
