"""Brute-force reference implementations for the equivalence suite.

Everything here is written directly against the dense matrices from the
synthetic generator, sharing no pooling or traversal code with the
production path.  Slow and obvious on purpose.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

from .documents import Document, Span
from .graphs import BridgeConfig, PoolingMode, SpanGraph
from .synth import DenseAttention


def oracle_bridge_edges(
    dense: DenseAttention,
    doc: Document,
    layer: int,
    head: int,
    cfg: BridgeConfig = BridgeConfig(),
    candidates: Iterable[int] | None = None,
) -> list[tuple[int, int, float]]:
    """Exhaustive re-derivation of the bridge edge list."""
    markers = list(doc.global_positions)
    if len(markers) < 2:
        return []
    allowed = None if candidates is None else set(candidates)
    w = dense.weights[layer, head]

    def tokens_of(marker: int) -> list[int]:
        lo, hi = doc.paragraph_range(doc.paragraph_of(marker))
        return [
            t
            for t in range(lo, hi)
            if not doc.is_global(t) and (allowed is None or t in allowed)
        ]

    out: list[tuple[int, int, float]] = []
    for si in markers:
        pool = tokens_of(si)
        if cfg.rank_from_marker:
            srcs = sorted(pool, key=lambda t: (-float(w[si, t]), t))[: cfg.k]
        else:
            srcs = sorted(pool, key=lambda t: (-float(w[t, si]), t))[: cfg.k]
        if not srcs:
            continue
        others = sorted(
            (s for s in markers if s != si), key=lambda s: (-float(w[si, s]), s)
        )[: cfg.l]
        for sj in others:
            dsts = sorted(tokens_of(sj), key=lambda t: (-float(w[sj, t]), t))[: cfg.m]
            w2 = float(w[si, sj])
            for ti in srcs:
                w1 = float(w[ti, si])
                for tj in dsts:
                    w3 = float(w[sj, tj])
                    out.append((ti, tj, (w1 * w2 * w3) ** (1.0 / 3.0)))
    out.sort(key=lambda e: (e[0], e[1]))
    return out


def oracle_span_graph(
    dense: DenseAttention,
    spans: Sequence[Span],
    mode: PoolingMode,
    bridges: Mapping[tuple[int, int], float] | None = None,
    layer: int = 0,
    head: int = 0,
) -> SpanGraph:
    """Direct double loop over every token pair of every span pair."""
    spans = tuple(spans)
    bridge_map = dict(bridges or {})
    edges: dict[tuple[int, int], float] = {}
    flagged: set[tuple[int, int]] = set()
    for i, sa in enumerate(spans):
        for j, sb in enumerate(spans):
            if i == j:
                continue
            local_vals: list[float] = []
            bridge_vals: list[float] = []
            acc = 0.0
            count = 0
            for m in range(sa.start, sa.end):
                for n in range(sb.start, sb.end):
                    v = dense.weight(layer, head, m, n)
                    if v is not None:
                        local_vals.append(v)
                        acc += v
                        count += 1
                    elif (m, n) in bridge_map:
                        g = bridge_map[(m, n)]
                        bridge_vals.append(g)
                        acc += g
                        count += 1
            if count == 0:
                continue
            if mode is PoolingMode.MAX:
                if bridge_vals and (not local_vals or max(bridge_vals) > max(local_vals)):
                    edges[(i, j)] = max(bridge_vals)
                    flagged.add((i, j))
                else:
                    edges[(i, j)] = max(local_vals)
            elif mode is PoolingMode.MIN:
                if bridge_vals and (not local_vals or min(bridge_vals) < min(local_vals)):
                    edges[(i, j)] = min(bridge_vals)
                    flagged.add((i, j))
                else:
                    edges[(i, j)] = min(local_vals)
            else:
                edges[(i, j)] = acc / count
                if bridge_vals:
                    flagged.add((i, j))
    return SpanGraph(
        layer=layer, head=head, nodes=spans, edges=edges, bridged=frozenset(flagged)
    )


def oracle_clusters(graph: SpanGraph, tau: float) -> list[tuple[int, ...]]:
    """Union-find partition over the symmetrized above-threshold edges."""
    n = len(graph.nodes)
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for (i, j), w in graph.edges.items():
        if w > tau:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for node in range(n):
        groups.setdefault(find(node), []).append(node)
    return sorted(tuple(sorted(members)) for members in groups.values())
