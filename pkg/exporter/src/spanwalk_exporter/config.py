"""Export configuration and raw-document ingestion."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


class ExporterError(Exception):
    """Raised for checkpoint and input problems the caller must handle."""


@dataclass(frozen=True)
class RawDocument:
    """An untokenized document: one string per paragraph."""

    doc_id: str
    paragraphs: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.paragraphs:
            raise ValueError("a document needs at least one paragraph")
        if any(not p.strip() for p in self.paragraphs):
            raise ValueError("paragraphs must contain text")


@dataclass(frozen=True)
class ExportConfig:
    """Everything one export run depends on.

    window and max_tokens are written verbatim into the dump header, so
    a dump can always be traced back to the settings that produced it.
    """

    checkpoint: str
    out_dir: str
    window: int = 4
    max_tokens: int = 512
    n_layers: int = 2
    n_heads: int = 2
    d_model: int = 32
    vocab_size: int = 997
    batch_size: int = 4
    seed: int = 0
    layer_heads: tuple[tuple[int, int], ...] | None = field(default=None)

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.max_tokens < 4:
            raise ValueError("max_tokens must be >= 4")
        if self.n_layers < 1 or self.n_heads < 1:
            raise ValueError("layer and head counts must be >= 1")
        if self.d_model % self.n_heads:
            raise ValueError("d_model must divide evenly across heads")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")
        if self.layer_heads is not None:
            for layer, head in self.layer_heads:
                if not (0 <= layer < self.n_layers and 0 <= head < self.n_heads):
                    raise ValueError(f"layer/head selection ({layer}, {head}) out of range")


def read_raw_documents(path: str | Path) -> list[RawDocument]:
    """Load raw documents from JSONL: {"doc_id": ..., "paragraphs": [...]}."""
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                docs.append(
                    RawDocument(
                        doc_id=str(rec["doc_id"]),
                        paragraphs=tuple(str(p) for p in rec["paragraphs"]),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ExporterError(f"{path}:{lineno}: bad raw document: {exc}") from exc
    if not docs:
        raise ExporterError(f"{path}: no documents")
    return docs
