"""Export runs: raw documents in, the three consumer input files out.

Produces docs.jsonl, dumps/<doc_id>.awat, and parses.jsonl in exactly
the consumer's formats.  This side never builds graphs or clusters; it
only captures attention, inserts markers, and scores spans.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from spanwalk.attention import AttentionDump, empty_dump, write_dump
from spanwalk.collector import write_parse_file
from spanwalk.documents import Document, write_documents

from .config import ExportConfig, ExporterError, RawDocument, read_raw_documents
from .encoder import ensure_checkpoint, present_pattern, token_id
from .parsing import build_forest, score_spans

log = logging.getLogger("spanwalk_exporter")

MARKER = "</s>"


@dataclass(frozen=True)
class ExportReport:
    docs_path: str
    parses_path: str
    dump_paths: tuple[tuple[str, str], ...]
    truncated: tuple[str, ...]


def insert_markers(raw: RawDocument, max_tokens: int) -> tuple[Document, bool]:
    """Tokenize, prepend one marker per paragraph, cap the token budget.

    Paragraphs that would carry no content after the cap are dropped
    whole; the returned flag says whether anything was cut.
    """
    tokens: list[str] = []
    starts: list[int] = []
    globals_: list[int] = []
    truncated = False
    for para in raw.paragraphs:
        words = para.split()
        if len(tokens) + 1 >= max_tokens:
            truncated = True
            break
        starts.append(len(tokens))
        globals_.append(len(tokens))
        tokens.append(MARKER)
        room = max_tokens - len(tokens)
        if len(words) > room:
            truncated = True
            words = words[:room]
        tokens.extend(words)
    return (
        Document(
            doc_id=raw.doc_id,
            tokens=tuple(tokens),
            paragraph_starts=tuple(starts),
            sentence_starts=None,
            global_positions=tuple(globals_),
        ),
        truncated,
    )


def _attention_to_dump(
    att: np.ndarray, doc: Document, window: int
) -> AttentionDump:
    """Scatter a dense (L, H, N, N) attention tensor into the banded layout.

    Marker rows land in global_rows, marker columns in global_cols, and
    everything else inside the window goes to the band.  Slots shadowed
    by a marker stay zero so row sums are never double-counted.
    """
    n_layers, n_heads, n, _ = att.shape
    dump = empty_dump(n_layers, n_heads, n, window, doc.global_positions)
    globals_set = set(doc.global_positions)
    for gi, g in enumerate(doc.global_positions):
        dump.global_rows[:, :, gi, :] = att[:, :, g, :]
        dump.global_cols[:, :, :, gi] = att[:, :, :, g]
    for src in range(n):
        if src in globals_set:
            continue
        lo = max(0, src - window)
        hi = min(n, src + window + 1)
        for dst in range(lo, hi):
            if dst in globals_set:
                continue
            dump.band[:, :, src, dst - src + window] = att[:, :, src, dst]
    return dump


def _atomic(path: Path, write_fn) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    write_fn(tmp)
    os.replace(tmp, path)


def _select_grid(att: torch.Tensor, cfg: ExportConfig) -> torch.Tensor:
    if cfg.layer_heads is None:
        return att
    layers = sorted({l for l, _ in cfg.layer_heads})
    heads = sorted({h for _, h in cfg.layer_heads})
    return att[:, layers][:, :, heads]


@torch.no_grad()
def export_all(cfg: ExportConfig, raw_docs: list[RawDocument]) -> ExportReport:
    """Run the checkpoint over every document and write all three files."""
    torch.set_num_threads(1)  # keep float reduction order stable across runs
    model = ensure_checkpoint(cfg)
    out_dir = Path(cfg.out_dir)
    dump_dir = out_dir / "dumps"
    dump_dir.mkdir(parents=True, exist_ok=True)

    docs: list[Document] = []
    truncated: list[str] = []
    for raw in raw_docs:
        doc, was_cut = insert_markers(raw, cfg.max_tokens)
        if was_cut:
            log.warning("document %s exceeds %d tokens, truncated",
                        raw.doc_id, cfg.max_tokens)
            truncated.append(raw.doc_id)
        docs.append(doc)

    dump_paths: list[tuple[str, str]] = []
    parse_records: list[dict] = []
    for batch_lo in range(0, len(docs), cfg.batch_size):
        batch = docs[batch_lo : batch_lo + cfg.batch_size]
        width = max(d.n_tokens for d in batch)
        ids = torch.zeros(len(batch), width, dtype=torch.long)
        present = torch.zeros(len(batch), width, width, dtype=torch.bool)
        for row, doc in enumerate(batch):
            for pos, tok in enumerate(doc.tokens):
                ids[row, pos] = token_id(tok, cfg.vocab_size)
            present[row, : doc.n_tokens, : doc.n_tokens] = present_pattern(
                doc.n_tokens, cfg.window, doc.global_positions
            )
            present[row, :, :].diagonal().fill_(True)  # padding rows stay sane
        att_batch = _select_grid(model(ids, present), cfg)
        for row, doc in enumerate(batch):
            n = doc.n_tokens
            att = att_batch[row, :, :, :n, :n].numpy().astype(np.float32)
            dump = _attention_to_dump(att, doc, cfg.window)
            path = dump_dir / (doc.doc_id + ".awat")
            _atomic(path, lambda tmp, d=dump: write_dump(d, tmp))
            dump_paths.append((doc.doc_id, str(path)))

            forest = build_forest(doc)
            doc_ids = ids[row : row + 1, :n]
            doc_present = present[row : row + 1, :n, :n]
            scores = score_spans(model, doc, doc_ids, doc_present, forest,
                                 cfg.vocab_size)
            parse_records.append(
                {"doc_id": doc.doc_id, "nodes": forest, "scores": scores}
            )

    docs_path = out_dir / "docs.jsonl"
    parses_path = out_dir / "parses.jsonl"
    _atomic(docs_path, lambda tmp: write_documents(docs, tmp))
    _atomic(parses_path, lambda tmp: write_parse_file(parse_records, tmp))
    return ExportReport(
        docs_path=str(docs_path),
        parses_path=str(parses_path),
        dump_paths=tuple(dump_paths),
        truncated=tuple(truncated),
    )


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(
        prog="spanwalk-export",
        description="Export encoder attention, markers, and span scores.",
    )
    ap.add_argument("raw_docs", help="JSONL of raw documents")
    ap.add_argument("--out", required=True)
    ap.add_argument("--checkpoint", required=True)
    ap.add_argument("--window", type=int, default=4)
    ap.add_argument("--max-tokens", type=int, default=512)
    ap.add_argument("--layers", type=int, default=2)
    ap.add_argument("--heads", type=int, default=2)
    ap.add_argument("--d-model", type=int, default=32)
    ap.add_argument("--batch-size", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = ExportConfig(
            checkpoint=args.checkpoint,
            out_dir=args.out,
            window=args.window,
            max_tokens=args.max_tokens,
            n_layers=args.layers,
            n_heads=args.heads,
            d_model=args.d_model,
            batch_size=args.batch_size,
            seed=args.seed,
        )
        report = export_all(cfg, read_raw_documents(args.raw_docs))
    except (ExporterError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(report.dump_paths)} documents under {args.out}")
    if report.truncated:
        print(f"truncated: {', '.join(report.truncated)}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
