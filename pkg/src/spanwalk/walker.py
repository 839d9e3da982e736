"""Threshold pruning and graph walking over span graphs.

Edges at or below the threshold are dropped; what remains is walked into
span clusters.  The default walk treats edges as undirected and returns
connected components; directed mode returns per-seed reachable sets with
duplicate span-sets merged.  Cross-head collection deduplicates by exact
span-set and caps the per-document cluster count by seeded sampling.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .documents import Document, Span, make_span
from .errors import FormatError
from .graphs import SpanGraph


@dataclass(frozen=True)
class WalkConfig:
    tau: float = 0.45
    directed: bool = False
    max_cluster_spans: int = 8
    sample_limit: int = 32
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if self.max_cluster_spans < 1 or self.sample_limit < 1:
            raise ValueError("cluster caps must be >= 1")


@dataclass(frozen=True)
class Cluster:
    """A linked set of spans found in one (layer, head) graph.

    path_edges index into `spans` and carry the pruned-graph weights that
    connected the members.
    """

    spans: tuple[Span, ...]
    layer: int
    head: int
    used_bridge: bool = False
    path_edges: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self) -> None:
        if not self.spans:
            raise ValueError("cluster must contain at least one span")
        for a, b in zip(self.spans, self.spans[1:]):
            if not (a.start, a.end) < (b.start, b.end):
                raise ValueError("cluster spans must be sorted by start")
            if b.start < a.end:
                raise ValueError("cluster spans must not overlap")

    @property
    def provenance(self) -> tuple[int, int]:
        return (self.layer, self.head)

    def span_key(self) -> frozenset[tuple[int, int]]:
        return frozenset((s.start, s.end) for s in self.spans)


def prune(graph: SpanGraph, tau: float) -> SpanGraph:
    """Keep exactly the edges with weight strictly above tau."""
    edges = {k: w for k, w in graph.edges.items() if w > tau}
    bridged = frozenset(k for k in graph.bridged if k in edges)
    return SpanGraph(
        layer=graph.layer,
        head=graph.head,
        nodes=graph.nodes,
        edges=edges,
        bridged=bridged,
    )


def _members_to_cluster(graph: SpanGraph, members: Sequence[int]) -> Cluster:
    ordered = sorted(members, key=lambda i: (graph.nodes[i].start, graph.nodes[i].end))
    local = {node: idx for idx, node in enumerate(ordered)}
    member_set = set(members)
    path_edges = []
    used_bridge = False
    for (i, j) in sorted(graph.edges):
        if i in member_set and j in member_set:
            path_edges.append((local[i], local[j], graph.edges[(i, j)]))
            if (i, j) in graph.bridged:
                used_bridge = True
    return Cluster(
        spans=tuple(graph.nodes[i] for i in ordered),
        layer=graph.layer,
        head=graph.head,
        used_bridge=used_bridge,
        path_edges=tuple(path_edges),
    )


def _undirected_components(graph: SpanGraph) -> list[list[int]]:
    n = len(graph.nodes)
    adj: list[set[int]] = [set() for _ in range(n)]
    for (i, j) in graph.edges:
        adj[i].add(j)
        adj[j].add(i)
    seen = [False] * n
    components = []
    for root in range(n):
        if seen[root]:
            continue
        stack = [root]
        seen[root] = True
        members = []
        while stack:
            node = stack.pop()
            members.append(node)
            for nb in sorted(adj[node], reverse=True):
                if not seen[nb]:
                    seen[nb] = True
                    stack.append(nb)
        components.append(sorted(members))
    return components


def _directed_reachable(graph: SpanGraph) -> list[list[int]]:
    n = len(graph.nodes)
    out: list[list[int]] = [[] for _ in range(n)]
    for (i, j) in sorted(graph.edges):
        out[i].append(j)
    sets = []
    seen_keys = set()
    for seed in range(n):
        stack = [seed]
        reached = {seed}
        while stack:
            node = stack.pop()
            for nb in reversed(out[node]):
                if nb not in reached:
                    reached.add(nb)
                    stack.append(nb)
        key = frozenset(reached)
        if key not in seen_keys:
            seen_keys.add(key)
            sets.append(sorted(reached))
    return sets


def walk(graph: SpanGraph, directed: bool = False) -> list[Cluster]:
    """Walk a pruned graph into clusters.

    Undirected mode returns the connected components of the symmetrized
    edge set; directed mode returns each seed's reachable set, merging
    duplicates.  Isolated nodes become singleton clusters either way.
    """
    if directed:
        member_sets = _directed_reachable(graph)
    else:
        member_sets = _undirected_components(graph)
    return [_members_to_cluster(graph, members) for members in member_sets]


def collect_clusters(graphs: Sequence[SpanGraph], cfg: WalkConfig = WalkConfig()) -> list[Cluster]:
    """Prune and walk every graph, dedup span-sets, cap by seeded sampling.

    Graphs are visited in ascending (layer, head) order regardless of input
    order, so the result is independent of any execution schedule.
    """
    graphs = sorted(graphs, key=lambda g: (g.layer, g.head))
    if graphs:
        nodes0 = graphs[0].nodes
        for g in graphs[1:]:
            if g.nodes != nodes0:
                raise ValueError("graphs disagree on the node list")
    clusters: list[Cluster] = []
    seen: set[frozenset[tuple[int, int]]] = set()
    for g in graphs:
        for cluster in walk(prune(g, cfg.tau), cfg.directed):
            if len(cluster.spans) > cfg.max_cluster_spans:
                continue
            key = cluster.span_key()
            if key in seen:
                continue
            seen.add(key)
            clusters.append(cluster)
    if len(clusters) > cfg.sample_limit:
        rng = random.Random(cfg.rng_seed)
        keep = sorted(rng.sample(range(len(clusters)), cfg.sample_limit))
        clusters = [clusters[i] for i in keep]
    return clusters


def write_cluster_dump(path: str, items: Iterable[tuple[str, Cluster]]) -> None:
    """One record per cluster: doc_id, provenance, offsets, edge weights."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, c in items:
            rec = {
                "doc_id": doc_id,
                "layer": c.layer,
                "head": c.head,
                "spans": [[s.start, s.end] for s in c.spans],
                "edges": [[i, j, w] for (i, j, w) in c.path_edges],
                "used_bridge": c.used_bridge,
            }
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_cluster_dump(path: str, docs: Mapping[str, Document]) -> list[tuple[str, Cluster]]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                doc = docs[rec["doc_id"]]
                spans = tuple(make_span(doc, s, e) for s, e in rec["spans"])
                cluster = Cluster(
                    spans=spans,
                    layer=rec["layer"],
                    head=rec["head"],
                    used_bridge=bool(rec["used_bridge"]),
                    path_edges=tuple((i, j, float(w)) for i, j, w in rec.get("edges", [])),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"cluster dump line {line_no}: {exc}") from exc
            out.append((rec["doc_id"], cluster))
    return out
