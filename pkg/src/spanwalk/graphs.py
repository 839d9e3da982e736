"""Span-level graphs pooled from token attention, with global-marker bridges.

A span graph holds one directed edge weight per ordered span pair, pooled
from the token-level entries between the two spans.  Pairs with no entries
(outside the band, no bridge) simply have no edge.  Bridges synthesize
token edges across paragraphs by walking token -> marker -> marker -> token
and taking the geometric mean of the three hop weights; they never replace
an existing local entry.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .attention import AttentionDump
from .documents import Document, Span
from .errors import FormatError


class PoolingMode(Enum):
    MAX = "max"
    MIN = "min"
    MEAN = "mean"

    @property
    def kernel_code(self) -> int:
        return {
            PoolingMode.MAX: _kernels.POOL_MAX,
            PoolingMode.MIN: _kernels.POOL_MIN,
            PoolingMode.MEAN: _kernels.POOL_MEAN,
        }[self]


@dataclass(frozen=True)
class BridgeConfig:
    """Fan-out counts for bridge generation.

    k: source tokens ranked against their own paragraph marker
    l: target markers ranked by attention from the source marker
    m: target tokens ranked by attention from the target marker
    rank_from_marker: rank source tokens by marker->token attention instead
        of the default token->marker direction (the bridge weight itself
        always uses token->marker for the first hop)
    """

    k: int = 3
    l: int = 3
    m: int = 3
    rank_from_marker: bool = False

    def __post_init__(self) -> None:
        if self.k < 1 or self.l < 1 or self.m < 1:
            raise ValueError("bridge fan-out counts must be >= 1")


@dataclass(frozen=True)
class SpanGraph:
    layer: int
    head: int
    nodes: tuple[Span, ...]
    edges: dict[tuple[int, int], float] = field(default_factory=dict)
    bridged: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self) -> None:
        n = len(self.nodes)
        for i, j in self.edges:
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError("edge index out of range")
        if not self.bridged <= set(self.edges):
            raise ValueError("bridged pair without an edge")

    def neighbors(self, i: int) -> list[int]:
        return sorted(j for (a, j) in self.edges if a == i)


def _check_layer_head(dump: AttentionDump, layer: int, head: int) -> None:
    if not (0 <= layer < dump.n_layers):
        raise IndexError(f"layer {layer} out of range")
    if not (0 <= head < dump.n_heads):
        raise IndexError(f"head {head} out of range")


def _span_arrays(spans: Sequence[Span]) -> tuple[np.ndarray, np.ndarray]:
    starts = np.asarray([s.start for s in spans], dtype=np.int64)
    ends = np.asarray([s.end for s in spans], dtype=np.int64)
    return starts, ends


_EMPTY_KEYS = np.zeros(0, dtype=np.int64)
_EMPTY_VALS = np.zeros(0, dtype=np.float64)


def _pool(
    dump: AttentionDump,
    layer: int,
    head: int,
    spans: Sequence[Span],
    mode: PoolingMode,
    overlay_keys: np.ndarray,
    overlay_vals: np.ndarray,
) -> SpanGraph:
    _check_layer_head(dump, layer, head)
    spans = tuple(spans)
    if not spans:
        return SpanGraph(layer=layer, head=head, nodes=())
    starts, ends = _span_arrays(spans)
    weights, present, bridged_flags = _kernels.pool_pairs(
        dump.band[layer, head],
        dump.window,
        dump.n_tokens,
        starts,
        ends,
        mode.kernel_code,
        overlay_keys,
        overlay_vals,
    )
    edges: dict[tuple[int, int], float] = {}
    bridged: set[tuple[int, int]] = set()
    n = len(spans)
    for i in range(n):
        for j in range(n):
            if not present[i, j]:
                continue
            edges[(i, j)] = float(weights[i, j])
            if bridged_flags[i, j]:
                bridged.add((i, j))
    return SpanGraph(
        layer=layer, head=head, nodes=spans, edges=edges, bridged=frozenset(bridged)
    )


def build_span_graph(
    dump: AttentionDump,
    layer: int,
    head: int,
    spans: Sequence[Span],
    mode: PoolingMode = PoolingMode.MAX,
) -> SpanGraph:
    """Pool local attention entries into span-pair edge weights."""
    return _pool(dump, layer, head, spans, mode, _EMPTY_KEYS, _EMPTY_VALS)


def _top(ranked: Iterable[tuple[float, int]], count: int) -> list[tuple[float, int]]:
    # descending weight, ties to the lower token index
    return sorted(ranked, key=lambda wp: (-wp[0], wp[1]))[:count]


def bridge_global(
    dump: AttentionDump,
    layer: int,
    head: int,
    doc: Document,
    cfg: BridgeConfig = BridgeConfig(),
    candidates: Iterable[int] | None = None,
) -> list[tuple[int, int, float]]:
    """Synthesize cross-paragraph token edges through the global markers.

    For every marker s_i: rank the (non-marker) tokens of its paragraph by
    attention to s_i and keep the top k; rank the other markers by attention
    from s_i and keep the top l; for each kept s_j rank the tokens of its
    paragraph by attention from s_j and keep the top m.  Each (t_i, t_j)
    combination yields g = (w[t_i,s_i] * w[s_i,s_j] * w[s_j,t_j]) ** (1/3).

    When `candidates` is given, only those token positions may rank as
    endpoints.  Markers are never endpoints.  A single-paragraph document
    yields an empty list.
    """
    _check_layer_head(dump, layer, head)
    markers = list(dump.global_positions)
    if len(markers) < 2:
        return []
    allowed = None if candidates is None else set(candidates)

    rows = dump.global_rows[layer, head]
    cols = dump.global_cols[layer, head]

    def paragraph_tokens(marker_pos: int) -> list[int]:
        lo, hi = doc.paragraph_range(doc.paragraph_of(marker_pos))
        out = []
        for t in range(lo, hi):
            if doc.is_global(t):
                continue
            if allowed is not None and t not in allowed:
                continue
            out.append(t)
        return out

    edges: list[tuple[int, int, float]] = []
    for si in markers:
        gi = dump.global_index(si)
        src_pool = paragraph_tokens(si)
        if cfg.rank_from_marker:
            src_ranked = [(float(rows[gi, t]), t) for t in src_pool]
        else:
            src_ranked = [(float(cols[t, gi]), t) for t in src_pool]
        src_top = _top(src_ranked, cfg.k)
        if not src_top:
            continue
        marker_ranked = [(float(rows[gi, sj]), sj) for sj in markers if sj != si]
        for _, sj in _top(marker_ranked, cfg.l):
            gj = dump.global_index(sj)
            dst_top = _top([(float(rows[gj, t]), t) for t in paragraph_tokens(sj)], cfg.m)
            if not dst_top:
                continue
            w2 = float(rows[gi, sj])
            for _, ti in src_top:
                w1 = float(cols[ti, gi])
                for w3, tj in dst_top:
                    g = (w1 * w2 * w3) ** (1.0 / 3.0)
                    edges.append((ti, tj, g))
    edges.sort(key=lambda e: (e[0], e[1]))
    return edges


def build_with_bridges(
    dump: AttentionDump,
    layer: int,
    head: int,
    doc: Document,
    spans: Sequence[Span],
    mode: PoolingMode = PoolingMode.MAX,
    cfg: BridgeConfig = BridgeConfig(),
) -> SpanGraph:
    """Pool span-pair weights over local entries plus bridge overlays.

    A bridge is consulted only for token pairs outside the band, so local
    entries are never overwritten.
    """
    spans = tuple(spans)
    span_tokens: set[int] = set()
    for s in spans:
        span_tokens.update(range(s.start, s.end))
    bridges = bridge_global(dump, layer, head, doc, cfg, candidates=span_tokens)
    overlay: dict[int, float] = {}
    for src, dst, g in bridges:
        if abs(src - dst) <= dump.window:
            continue
        overlay[src * dump.n_tokens + dst] = g
    if overlay:
        keys = np.asarray(sorted(overlay), dtype=np.int64)
        vals = np.asarray([overlay[k] for k in sorted(overlay)], dtype=np.float64)
    else:
        keys, vals = _EMPTY_KEYS, _EMPTY_VALS
    return _pool(dump, layer, head, spans, mode, keys, vals)


def write_graph_dump(path: str, graphs: Iterable[SpanGraph]) -> None:
    """One record per edge: layer, head, src/dst span offsets, weight, flag."""
    with open(path, "w", encoding="utf-8") as fh:
        for g in graphs:
            for (i, j) in sorted(g.edges):
                rec = {
                    "layer": g.layer,
                    "head": g.head,
                    "src": [g.nodes[i].start, g.nodes[i].end],
                    "dst": [g.nodes[j].start, g.nodes[j].end],
                    "weight": g.edges[(i, j)],
                    "bridged": (i, j) in g.bridged,
                }
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def iter_graph_dump(path: str):
    """Yield raw edge records from a graph dump."""
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"graph dump line {line_no}: {exc}") from exc
            yield rec
