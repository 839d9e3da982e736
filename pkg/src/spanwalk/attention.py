"""Banded attention storage: per-(layer, head) local bands plus global blocks.

The dump keeps, for every layer-head pair, a local band of width 2*window+1
per query token and two global blocks: rows (marker token to all tokens) and
columns (all tokens to each marker).  Lookup precedence is fixed so that every
(src, dst) pair resolves to at most one stored value:

    1. src is a global marker      -> global_rows
    2. dst is a global marker      -> global_cols
    3. |src - dst| <= window       -> local band
    4. otherwise                   -> absent

Band slots that are out of bounds or shadowed by rule 1/2 are zero-filled and
never read.  Weights are float32 little-endian end to end; oracle comparisons
use exact equality on these stored values.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, TextIO

import numpy as np

from spanwalk.documents import Document
from spanwalk.errors import FormatError

MAGIC = b"AWAT"
VERSION = 1

_HEADER = struct.Struct("<4sHHHIII")


@dataclass(frozen=True)
class AttentionDump:
    """In-memory banded attention for all (layer, head) pairs of one document.

    band:        (n_layers, n_heads, n_tokens, 2*window+1) float32
    global_rows: (n_layers, n_heads, n_global, n_tokens)   float32
    global_cols: (n_layers, n_heads, n_tokens, n_global)   float32
    """

    n_layers: int
    n_heads: int
    n_tokens: int
    window: int
    global_positions: tuple[int, ...]
    band: np.ndarray
    global_rows: np.ndarray
    global_cols: np.ndarray

    @property
    def n_global(self) -> int:
        return len(self.global_positions)

    def global_index(self, position: int) -> int | None:
        """Index into the global blocks for a token position, if global."""
        # positions are sorted and few; linear scan is fine for lookups
        for g, pos in enumerate(self.global_positions):
            if pos == position:
                return g
        return None

    def layer_head_pairs(self) -> list[tuple[int, int]]:
        return [(l, h) for l in range(self.n_layers) for h in range(self.n_heads)]


@dataclass(frozen=True)
class ValidationReport:
    """Findings from structural and row-stochasticity checks.

    ok is true iff both lists are empty.  Row-sum findings are advisory:
    real exporters may emit renormalized or truncated rows.
    """

    row_sum_violations: tuple[tuple[int, int, int, float], ...]
    index_errors: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.row_sum_violations and not self.index_errors


def empty_dump(
    n_layers: int,
    n_heads: int,
    n_tokens: int,
    window: int,
    global_positions: tuple[int, ...] = (),
) -> AttentionDump:
    """Allocate an all-zero dump with the given dimensions."""
    n_global = len(global_positions)
    return AttentionDump(
        n_layers=n_layers,
        n_heads=n_heads,
        n_tokens=n_tokens,
        window=window,
        global_positions=tuple(global_positions),
        band=np.zeros((n_layers, n_heads, n_tokens, 2 * window + 1), dtype=np.float32),
        global_rows=np.zeros((n_layers, n_heads, n_global, n_tokens), dtype=np.float32),
        global_cols=np.zeros((n_layers, n_heads, n_tokens, n_global), dtype=np.float32),
    )


def attention_weight(
    dump: AttentionDump, layer: int, head: int, src: int, dst: int
) -> float | None:
    """Stored weight from src to dst, or None when no entry exists."""
    if not (0 <= layer < dump.n_layers and 0 <= head < dump.n_heads):
        raise IndexError(f"layer/head ({layer}, {head}) out of range")
    if not (0 <= src < dump.n_tokens and 0 <= dst < dump.n_tokens):
        raise IndexError(f"token pair ({src}, {dst}) out of range")
    g = dump.global_index(src)
    if g is not None:
        return float(dump.global_rows[layer, head, g, dst])
    g = dump.global_index(dst)
    if g is not None:
        return float(dump.global_cols[layer, head, src, g])
    off = dst - src + dump.window
    if 0 <= off <= 2 * dump.window:
        return float(dump.band[layer, head, src, off])
    return None


# ---------------------------------------------------------------------------
# binary format
# ---------------------------------------------------------------------------


def write_dump(dump: AttentionDump, dest: BinaryIO | str | Path) -> None:
    """Serialize to the binary dump format (magic AWAT, version 1)."""
    if isinstance(dest, (str, Path)):
        with open(dest, "wb") as fh:
            write_dump(dump, fh)
        return
    dest.write(
        _HEADER.pack(
            MAGIC,
            VERSION,
            dump.n_layers,
            dump.n_heads,
            dump.n_tokens,
            dump.window,
            dump.n_global,
        )
    )
    dest.write(np.asarray(dump.global_positions, dtype="<u4").tobytes())
    for layer in range(dump.n_layers):
        for head in range(dump.n_heads):
            dest.write(dump.band[layer, head].astype("<f4", copy=False).tobytes())
            dest.write(dump.global_rows[layer, head].astype("<f4", copy=False).tobytes())
            dest.write(dump.global_cols[layer, head].astype("<f4", copy=False).tobytes())


def _read_exact(stream: BinaryIO, size: int, what: str) -> bytes:
    data = stream.read(size)
    if len(data) != size:
        raise FormatError(f"truncated dump payload while reading {what}")
    return data


def read_dump(src: BinaryIO | str | Path, doc: Document | None = None) -> AttentionDump:
    """Load a binary dump, optionally checking dimensions against a Document."""
    if isinstance(src, (str, Path)):
        with open(src, "rb") as fh:
            return read_dump(fh, doc)
    header = src.read(_HEADER.size)
    if len(header) < _HEADER.size:
        raise FormatError("truncated dump header")
    magic, version, n_layers, n_heads, n_tokens, window, n_global = _HEADER.unpack(header)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported dump version {version}")
    raw = _read_exact(src, 4 * n_global, "global positions")
    global_positions = tuple(int(x) for x in np.frombuffer(raw, dtype="<u4"))

    width = 2 * window + 1
    band = np.zeros((n_layers, n_heads, n_tokens, width), dtype=np.float32)
    global_rows = np.zeros((n_layers, n_heads, n_global, n_tokens), dtype=np.float32)
    global_cols = np.zeros((n_layers, n_heads, n_tokens, n_global), dtype=np.float32)
    for layer in range(n_layers):
        for head in range(n_heads):
            raw = _read_exact(src, 4 * n_tokens * width, "local band")
            band[layer, head] = np.frombuffer(raw, dtype="<f4").reshape(n_tokens, width)
            raw = _read_exact(src, 4 * n_global * n_tokens, "global rows")
            global_rows[layer, head] = np.frombuffer(raw, dtype="<f4").reshape(
                n_global, n_tokens
            )
            raw = _read_exact(src, 4 * n_tokens * n_global, "global cols")
            global_cols[layer, head] = np.frombuffer(raw, dtype="<f4").reshape(
                n_tokens, n_global
            )
    if src.read(1):
        raise FormatError("trailing bytes after dump payload")

    dump = AttentionDump(
        n_layers=n_layers,
        n_heads=n_heads,
        n_tokens=n_tokens,
        window=window,
        global_positions=global_positions,
        band=band,
        global_rows=global_rows,
        global_cols=global_cols,
    )
    if doc is not None:
        _check_against_document(dump, doc)
    return dump


def _check_against_document(dump: AttentionDump, doc: Document) -> None:
    if dump.n_tokens != doc.n_tokens:
        raise FormatError(
            f"dump declares {dump.n_tokens} tokens, document has {doc.n_tokens}"
        )
    if dump.global_positions != doc.global_positions:
        raise FormatError("dump global positions do not match document")


# ---------------------------------------------------------------------------
# sparse-edge text alternative (small test fixtures)
# ---------------------------------------------------------------------------


def write_sparse_dump(dump: AttentionDump, dest: TextIO | str | Path) -> None:
    """Write the dump as a line-delimited sparse edge list (nonzero entries)."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8") as fh:
            write_sparse_dump(dump, fh)
        return
    header = {
        "n_layers": dump.n_layers,
        "n_heads": dump.n_heads,
        "n_tokens": dump.n_tokens,
        "window": dump.window,
        "global_positions": list(dump.global_positions),
    }
    dest.write(json.dumps(header, separators=(",", ":")) + "\n")
    gset = set(dump.global_positions)
    for layer in range(dump.n_layers):
        for head in range(dump.n_heads):
            for src in range(dump.n_tokens):
                for dst in range(dump.n_tokens):
                    if src not in gset and dst not in gset:
                        if abs(src - dst) > dump.window:
                            continue
                    w = attention_weight(dump, layer, head, src, dst)
                    if w:
                        record = {
                            "layer": layer,
                            "head": head,
                            "src": src,
                            "dst": dst,
                            "weight": w,
                        }
                        dest.write(json.dumps(record, separators=(",", ":")) + "\n")


def read_sparse_dump(src: TextIO | str | Path, doc: Document | None = None) -> AttentionDump:
    """Load the line-delimited sparse-edge fixture format."""
    if isinstance(src, (str, Path)):
        with open(src, encoding="utf-8") as fh:
            return read_sparse_dump(fh, doc)
    lines = [line for line in src if line.strip()]
    if not lines:
        raise FormatError("empty sparse dump")
    try:
        header = json.loads(lines[0])
        dump = empty_dump(
            n_layers=int(header["n_layers"]),
            n_heads=int(header["n_heads"]),
            n_tokens=int(header["n_tokens"]),
            window=int(header["window"]),
            global_positions=tuple(header.get("global_positions", ())),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed sparse dump header: {exc}") from exc
    gidx = {pos: g for g, pos in enumerate(dump.global_positions)}
    for lineno, line in enumerate(lines[1:], 2):
        try:
            rec = json.loads(line)
            layer, head = int(rec["layer"]), int(rec["head"])
            s, d, w = int(rec["src"]), int(rec["dst"]), float(rec["weight"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"line {lineno}: malformed edge record: {exc}") from exc
        if not (0 <= layer < dump.n_layers and 0 <= head < dump.n_heads):
            raise FormatError(f"line {lineno}: layer/head out of range")
        if not (0 <= s < dump.n_tokens and 0 <= d < dump.n_tokens):
            raise FormatError(f"line {lineno}: token index out of range")
        placed = False
        if s in gidx:
            dump.global_rows[layer, head, gidx[s], d] = w
            placed = True
        if d in gidx:
            dump.global_cols[layer, head, s, gidx[d]] = w
            placed = True
        if not placed:
            off = d - s + dump.window
            if 0 <= off <= 2 * dump.window:
                dump.band[layer, head, s, off] = w
            else:
                raise FormatError(
                    f"line {lineno}: edge ({s}, {d}) outside band and not global"
                )
    if doc is not None:
        _check_against_document(dump, doc)
    return dump


def load_attention_dump(path: str | Path, doc: Document | None = None) -> AttentionDump:
    """Load a dump from disk, sniffing binary vs sparse-text by magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return read_dump(path, doc)
    return read_sparse_dump(path, doc)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def _band_mask(dump: AttentionDump) -> np.ndarray:
    """(n_tokens, 2w+1) mask of authoritative band slots (in bounds, unshadowed)."""
    n, w = dump.n_tokens, dump.window
    idx = np.arange(n)[:, None] + np.arange(-w, w + 1)[None, :]
    mask = (idx >= 0) & (idx < n)
    gset = np.zeros(n, dtype=bool)
    if dump.global_positions:
        gset[list(dump.global_positions)] = True
    mask &= ~gset[np.clip(idx, 0, n - 1)]
    mask[gset] = False
    return mask


def validate(
    dump: AttentionDump, doc: Document, tolerance: float = 1e-4
) -> ValidationReport:
    """Report structural index errors and rows whose weights sum outside 1 +- tolerance.

    Findings are report entries, never exceptions; row-stochasticity is
    advisory because exporters may renormalize or truncate rows.
    """
    index_errors: list[str] = []
    if dump.n_tokens != doc.n_tokens:
        index_errors.append(
            f"dump declares {dump.n_tokens} tokens, document has {doc.n_tokens}"
        )
    if dump.global_positions != doc.global_positions:
        index_errors.append("dump global positions do not match document")
    for g in dump.global_positions:
        if g < 0 or g >= dump.n_tokens:
            index_errors.append(f"global position {g} out of token range")

    violations: list[tuple[int, int, int, float]] = []
    if not index_errors and dump.n_tokens > 0:
        mask = _band_mask(dump)
        # out-of-bounds slots only (shadowed in-bounds slots are tolerated)
        n, w = dump.n_tokens, dump.window
        idx = np.arange(n)[:, None] + np.arange(-w, w + 1)[None, :]
        oob = (idx < 0) | (idx >= n)
        gset = set(dump.global_positions)
        gorder = {pos: g for g, pos in enumerate(dump.global_positions)}
        for layer in range(dump.n_layers):
            for head in range(dump.n_heads):
                band = dump.band[layer, head]
                if np.any(band[oob] != 0.0):
                    index_errors.append(
                        f"nonzero out-of-bounds band slot at layer {layer} head {head}"
                    )
                sums = (band.astype(np.float64) * mask).sum(axis=1)
                sums += dump.global_cols[layer, head].astype(np.float64).sum(axis=1)
                grow_sums = dump.global_rows[layer, head].astype(np.float64).sum(axis=1)
                for tok in range(dump.n_tokens):
                    total = grow_sums[gorder[tok]] if tok in gset else sums[tok]
                    if abs(total - 1.0) > tolerance:
                        violations.append((layer, head, tok, float(total)))
                # marker-to-marker entries exist in both blocks and must agree
                for gi, pos_i in enumerate(dump.global_positions):
                    for gj, pos_j in enumerate(dump.global_positions):
                        a = dump.global_rows[layer, head, gi, pos_j]
                        b = dump.global_cols[layer, head, pos_i, gj]
                        if a != b:
                            index_errors.append(
                                f"global row/col mismatch ({pos_i}->{pos_j}) "
                                f"at layer {layer} head {head}: {a} != {b}"
                            )
    return ValidationReport(
        row_sum_violations=tuple(violations), index_errors=tuple(index_errors)
    )
