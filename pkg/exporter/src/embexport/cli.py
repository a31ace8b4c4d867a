"""Command-line entry points for batch export and knowledge-table export."""

import argparse
import os
import sys

from .formats import ExportError
from .jobs import ALL_CHANNELS, ExportJob, load_job_records, run_export
from .knowledge import KnowledgeSource, export_knowledge


def cmd_run(args) -> int:
    records = load_job_records(args.job)
    channels = tuple(args.channels.split(","))
    job = ExportJob(records=records, out_dir=args.out, dim=args.dim,
                    channels=channels, text_encoder=args.text_encoder,
                    image_encoder=args.image_encoder,
                    knowledge_emb=args.knowledge_emb,
                    knowledge_words=args.knowledge_words,
                    base_dir=os.path.dirname(os.path.abspath(args.job)),
                    seed=args.seed)
    manifest = run_export(job)
    print(manifest)
    return 0


def cmd_knowledge(args) -> int:
    with open(args.vocab, "r", encoding="utf-8") as fh:
        vocabulary = [line.strip() for line in fh if line.strip()]
    source = KnowledgeSource(args.source_emb, args.source_words)
    kept = export_knowledge(vocabulary, source, args.out_emb, args.out_words)
    print(f"kept {len(kept)} of {len(vocabulary)} words")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embexport",
        description="Run encoders over meme records and write engine-ready files")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="export a job file into a corpus directory")
    p.add_argument("--job", required=True, help="JSONL job records")
    p.add_argument("--out", required=True, help="output corpus directory")
    p.add_argument("--dim", type=int, default=32, help="engine embedding dim")
    p.add_argument("--channels", default=",".join(ALL_CHANNELS),
                   help="comma-separated channels to emit")
    p.add_argument("--text-encoder", default="hash",
                   help="hash[:width] or transformers:<model-or-path>")
    p.add_argument("--image-encoder", default="pixel",
                   help="pixel or torchvision:<arch>[:<state-dict>]")
    p.add_argument("--knowledge-emb", help="node-embedding source matrix")
    p.add_argument("--knowledge-words", help="node-embedding source word list")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for the frozen projections")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("knowledge",
                       help="subset a node-embedding source to a vocabulary")
    p.add_argument("--vocab", required=True, help="one word per line")
    p.add_argument("--source-emb", required=True)
    p.add_argument("--source-words", required=True)
    p.add_argument("--out-emb", required=True)
    p.add_argument("--out-words", required=True)
    p.set_defaults(func=cmd_knowledge)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
