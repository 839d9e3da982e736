"""Model-side exporters for the spanwalk input formats."""

from .config import ExportConfig, ExporterError, RawDocument, read_raw_documents
from .encoder import TinyBandedEncoder, ensure_checkpoint, present_pattern
from .export import ExportReport, export_all, insert_markers

__all__ = [
    "ExportConfig",
    "ExporterError",
    "ExportReport",
    "RawDocument",
    "TinyBandedEncoder",
    "ensure_checkpoint",
    "export_all",
    "insert_markers",
    "present_pattern",
    "read_raw_documents",
]
