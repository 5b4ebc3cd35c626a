"""SSL embedding exporter for the modfuse pipeline."""

from .export import ExportJob, export_embeddings, export_synthetic, verify_integrity

__version__ = "0.1.0"
