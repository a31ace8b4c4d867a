"""Batch export: job records in, engine-ready corpus out.

A job file is JSON Lines, one meme record per line:

    {"id": "m1", "image": "imgs/m1.png", "ocr_text": "...",
     "context": ["sentence 1", "sentence 2", ...], "evidence": [0, 2]}

``evidence`` lists the indices of gold evidence sentences and may be omitted
for inference-only exports (labels are then all zero). Image paths are
resolved relative to the job file. Context documents are truncated to the
engine limits: at most 10 sentences within a 512-token budget.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from .encoders import build_image_encoder, build_text_encoder
from .formats import ConfigurationError, ExportError, write_embedding, \
    write_manifest
from .knowledge import KnowledgeSource
from .projection import Projection

MAX_SENTENCES = 10
MAX_CONTEXT_TOKENS = 512
ALL_CHANNELS = ("mm_meme", "text_meme", "image_meme", "knowledge")


@dataclass
class ExportJob:
    records: list[dict]
    out_dir: str
    dim: int = 32
    channels: tuple[str, ...] = ALL_CHANNELS
    text_encoder: str = "hash"
    image_encoder: str = "pixel"
    knowledge_emb: str | None = None
    knowledge_words: str | None = None
    base_dir: str = "."  # image paths resolve against this
    seed: int = 0
    manifest_name: str = "manifest.jsonl"

    def validate(self) -> None:
        if self.dim < 1:
            raise ConfigurationError(f"dim must be >= 1, got {self.dim}")
        for channel in self.channels:
            if channel not in ALL_CHANNELS:
                raise ConfigurationError(f"unknown channel {channel!r}")
        if not self.channels:
            raise ConfigurationError("no channels requested")
        if "knowledge" in self.channels and not (self.knowledge_emb
                                                 and self.knowledge_words):
            raise ConfigurationError(
                "knowledge channel requested but no node-embedding source given")


def load_job_records(path: str | os.PathLike) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ExportError(f"{path}:{lineno}: bad JSON record: {exc}") from exc
    return records


def truncate_context(sentences: list[str]) -> list[str]:
    """Apply the engine's context limits: <= 10 sentences, 512-token budget."""
    kept: list[str] = []
    budget = MAX_CONTEXT_TOKENS
    for sentence in sentences:
        if len(kept) >= MAX_SENTENCES:
            break
        tokens = len(sentence.split())
        if kept and tokens > budget:
            break
        kept.append(sentence)
        budget -= tokens
    return kept


def export_context(sentences: list[str], encoder, projection: Projection):
    """One pooled row per sentence, in order; encoder failures name the index."""
    if not sentences:
        raise ExportError("context has no sentences")
    rows = []
    for index, sentence in enumerate(sentences):
        try:
            feats = encoder.encode([sentence])
        except ExportError:
            raise
        except Exception as exc:
            raise ExportError(f"context sentence {index}: encoder failed: {exc}") \
                from exc
        rows.append(projection.apply(feats)[0])
    return np.stack(rows)


class Exporter:
    """Holds the encoders and projections for one job; reusable across records."""

    def __init__(self, job: ExportJob):
        job.validate()
        self.job = job
        self.text_encoder = build_text_encoder(job.text_encoder)
        needs_image = any(c in job.channels for c in ("mm_meme", "image_meme"))
        self.image_encoder = build_image_encoder(job.image_encoder) \
            if needs_image else None
        self.knowledge = KnowledgeSource(job.knowledge_emb, job.knowledge_words) \
            if "knowledge" in job.channels else None
        d = job.dim
        self.proj_context = Projection(self.text_encoder.width, d, "context", job.seed)
        self.proj_text = Projection(self.text_encoder.width, d, "text_meme", job.seed)
        if self.image_encoder is not None:
            self.proj_image = Projection(self.image_encoder.width, d,
                                         "image_meme", job.seed)
            self.proj_mm = Projection(
                self.text_encoder.width + self.image_encoder.width, d,
                "mm_meme", job.seed)
        if self.knowledge is not None and self.knowledge.d != d:
            self.proj_knowledge = Projection(self.knowledge.d, d, "knowledge",
                                             job.seed)
        else:
            self.proj_knowledge = None

    def export_meme(self, record: dict) -> dict:
        """Channel name -> (1, d) array for one record."""
        job = self.job
        ocr_text = record.get("ocr_text", "")
        out: dict = {}
        text_feats = None
        if "text_meme" in job.channels or "mm_meme" in job.channels:
            text_feats = self.text_encoder.encode([ocr_text])
        if "text_meme" in job.channels:
            out["text_meme"] = self.proj_text.apply(text_feats)
        image_feats = None
        if "image_meme" in job.channels or "mm_meme" in job.channels:
            image_path = record.get("image")
            if not image_path:
                raise ExportError(f"record {record.get('id')!r}: image channel "
                                  "requested but no image path given")
            resolved = os.path.join(job.base_dir, image_path)
            image_feats = self.image_encoder.encode([resolved])
        if "image_meme" in job.channels:
            out["image_meme"] = self.proj_image.apply(image_feats)
        if "mm_meme" in job.channels:
            out["mm_meme"] = self.proj_mm.apply(
                np.concatenate([text_feats, image_feats], axis=1))
        if "knowledge" in job.channels:
            pooled = self.knowledge.pool(ocr_text.split())
            if self.proj_knowledge is not None:
                pooled = self.proj_knowledge.apply(pooled)
            out["knowledge"] = pooled
        return out

    def export_record(self, record: dict) -> dict:
        """Write one record's files; returns its manifest entry."""
        job = self.job
        rid = str(record.get("id", "")).strip()
        if not rid:
            raise ExportError("record without an id")
        context = record.get("context") or []
        sentences = truncate_context([str(s) for s in context])
        if not sentences:
            raise ExportError(f"record {rid!r}: context has no sentences")
        matrix = export_context(sentences, self.text_encoder, self.proj_context)
        n = matrix.shape[0]
        labels = [0] * n
        for index in record.get("evidence", []):
            if not (0 <= int(index) < n):
                raise ExportError(
                    f"record {rid!r}: evidence index {index} outside the "
                    f"{n}-sentence truncated context")
            labels[int(index)] = 1
        emb_dir = os.path.join(job.out_dir, "emb")
        os.makedirs(emb_dir, exist_ok=True)
        rel_sent = f"emb/{rid}.sent.memx"
        write_embedding(matrix, os.path.join(job.out_dir, rel_sent))
        channel_paths = {}
        for channel, vector in self.export_meme(record).items():
            rel = f"emb/{rid}.{channel}.memx"
            write_embedding(vector, os.path.join(job.out_dir, rel))
            channel_paths[channel] = rel
        return {"id": rid, "channels": channel_paths, "sentences": rel_sent,
                "labels": labels, "n": n, "d": job.dim}


def run_export(job: ExportJob) -> str:
    """Export every record; returns the manifest path."""
    exporter = Exporter(job)
    os.makedirs(job.out_dir, exist_ok=True)
    entries = []
    seen: set[str] = set()
    for record in job.records:
        entry = exporter.export_record(record)
        if entry["id"] in seen:
            raise ExportError(f"duplicate record id {entry['id']!r}")
        seen.add(entry["id"])
        entries.append(entry)
    manifest = os.path.join(job.out_dir, job.manifest_name)
    write_manifest(entries, manifest)
    return manifest
