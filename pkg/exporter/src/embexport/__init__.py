"""Encoder export: turns meme records into engine-ready embedding corpora."""

__version__ = "0.1.0"

from .formats import ConfigurationError, ExportError, read_embedding, \
    write_embedding, write_manifest
from .jobs import ExportJob, Exporter, export_context, load_job_records, \
    run_export, truncate_context
from .knowledge import KnowledgeSource, export_knowledge
from .projection import Projection

__all__ = [
    "ConfigurationError", "ExportError", "read_embedding", "write_embedding",
    "write_manifest", "ExportJob", "Exporter", "export_context",
    "load_job_records", "run_export", "truncate_context", "KnowledgeSource",
    "export_knowledge", "Projection", "__version__",
]
