"""Seeded synthetic fixtures: documents, attention, parses, span scores.

The generator emits the same attention values in two encodings, the
banded dump consumed by the production path and a dense matrix consumed
by the brute-force oracles, so equivalence tests can compare them
entry for entry.  Rows are sampled uniform over the present entries and
renormalized; after the float32 cast the largest entry absorbs the
rounding residue, keeping row sums within 1e-6 of one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .attention import AttentionDump
from .collector import ParseNode
from .documents import Document, Span, make_span

MARKER = "</s>"

_VOCAB = (
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta",
    "eta", "theta", "iota", "kappa", "lambda", "sigma",
)


@dataclass(frozen=True)
class SynthSpec:
    n_paragraphs: int = 3
    tokens_per_paragraph: tuple[int, int] = (4, 8)
    window: int = 2
    n_layers: int = 2
    n_heads: int = 2
    span_density: float = 0.3
    rng_seed: int = 0

    def __post_init__(self) -> None:
        lo, hi = self.tokens_per_paragraph
        if self.n_paragraphs < 1 or self.n_layers < 1 or self.n_heads < 1:
            raise ValueError("counts must be >= 1")
        if lo < 1 or hi < lo:
            raise ValueError("bad tokens_per_paragraph range")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if not 0.0 < self.span_density <= 1.0:
            raise ValueError("span_density must lie in (0, 1]")


@dataclass(frozen=True)
class DenseAttention:
    """Oracle-side mirror: full matrices with an explicit presence mask.

    weights[l, h, s, d] is meaningful only where present[s, d]; the
    presence pattern is a function of the document and window alone.
    """

    window: int
    weights: np.ndarray
    present: np.ndarray

    @property
    def n_layers(self) -> int:
        return self.weights.shape[0]

    @property
    def n_heads(self) -> int:
        return self.weights.shape[1]

    @property
    def n_tokens(self) -> int:
        return self.weights.shape[2]

    def weight(self, layer: int, head: int, src: int, dst: int) -> float | None:
        if not self.present[src, dst]:
            return None
        return float(self.weights[layer, head, src, dst])


def _present_pattern(doc: Document, window: int) -> np.ndarray:
    n = doc.n_tokens
    present = np.zeros((n, n), dtype=bool)
    globals_ = list(doc.global_positions)
    for t in range(n):
        if doc.is_global(t):
            present[t, :] = True
            continue
        lo = max(0, t - window)
        hi = min(n, t + window + 1)
        for d in range(lo, hi):
            if not doc.is_global(d):
                present[t, d] = True
        for g in globals_:
            present[t, g] = True
    return present


def _sample_row(rng: np.random.Generator, size: int) -> np.ndarray:
    vals = 0.05 + 0.95 * rng.random(size)
    vals = vals / vals.sum()
    v32 = vals.astype(np.float32)
    residue = 1.0 - float(np.sum(v32, dtype=np.float64))
    top = int(np.argmax(v32))
    v32[top] = np.float32(float(v32[top]) + residue)
    return v32


def _gen_document(spec: SynthSpec, rng: np.random.Generator) -> Document:
    tokens: list[str] = []
    paragraph_starts: list[int] = []
    lo, hi = spec.tokens_per_paragraph
    for _ in range(spec.n_paragraphs):
        paragraph_starts.append(len(tokens))
        tokens.append(MARKER)
        count = int(rng.integers(lo, hi + 1))
        for _ in range(count):
            if rng.random() < 0.12 and len(tokens) > paragraph_starts[-1] + 1:
                tokens.append(".")
            else:
                tokens.append(_VOCAB[int(rng.integers(0, len(_VOCAB)))])
    return Document(
        doc_id=f"synth-{spec.rng_seed}",
        tokens=tuple(tokens),
        paragraph_starts=tuple(paragraph_starts),
        global_positions=tuple(paragraph_starts),
    )


def _gen_forest(doc: Document, rng: np.random.Generator) -> tuple[ParseNode, ...]:
    def build(lo: int, hi: int) -> ParseNode:
        children: tuple[ParseNode, ...] = ()
        if hi - lo >= 2:
            split = int(rng.integers(lo + 1, hi))
            children = (build(lo, split), build(split, hi))
        return ParseNode(span=make_span(doc, lo, hi), label="NODE", children=children)

    roots = []
    for p in range(doc.n_paragraphs):
        plo, phi = doc.paragraph_range(p)
        if phi - plo >= 2:
            roots.append(build(plo + 1, phi))
    return tuple(roots)


def gen_synthetic(
    spec: SynthSpec,
) -> tuple[Document, AttentionDump, DenseAttention, tuple[ParseNode, ...], dict]:
    """Generate one matched fixture set, fully determined by the seed."""
    rng = np.random.default_rng(spec.rng_seed)
    doc = _gen_document(spec, rng)
    n = doc.n_tokens
    L, H, W = spec.n_layers, spec.n_heads, spec.window
    globals_ = list(doc.global_positions)
    g_index = {g: i for i, g in enumerate(globals_)}
    ng = len(globals_)

    band = np.zeros((L, H, n, 2 * W + 1), dtype=np.float32)
    global_rows = np.zeros((L, H, ng, n), dtype=np.float32)
    global_cols = np.zeros((L, H, n, ng), dtype=np.float32)
    dense = np.zeros((L, H, n, n), dtype=np.float64)
    present = _present_pattern(doc, W)

    for layer in range(L):
        for head in range(H):
            for t in range(n):
                targets = np.flatnonzero(present[t])
                row = _sample_row(rng, targets.size)
                dense[layer, head, t, targets] = row.astype(np.float64)
                if doc.is_global(t):
                    gi = g_index[t]
                    global_rows[layer, head, gi, targets] = row
                    for g in globals_:
                        global_cols[layer, head, t, g_index[g]] = dense[
                            layer, head, t, g
                        ]
                else:
                    for d, v in zip(targets, row):
                        if d in g_index:
                            global_cols[layer, head, t, g_index[d]] = v
                        else:
                            band[layer, head, t, d - t + W] = v

    dump = AttentionDump(
        n_layers=L,
        n_heads=H,
        n_tokens=n,
        window=W,
        global_positions=tuple(globals_),
        band=band,
        global_rows=global_rows,
        global_cols=global_cols,
    )
    dense_att = DenseAttention(window=W, weights=dense, present=present)
    forest = _gen_forest(doc, rng)
    scores = {}
    for root in forest:
        for node in root.walk():
            key = (node.span.start, node.span.end)
            if key not in scores:
                scores[key] = float(rng.uniform(0.05, 3.0))
    return doc, dump, dense_att, forest, scores


def sample_spans(
    doc: Document,
    rng: np.random.Generator,
    density: float = 0.5,
    max_len: int = 4,
    max_spans: int = 8,
) -> list[Span]:
    """Random non-overlapping single-paragraph spans, markers excluded."""
    spans: list[Span] = []
    for p in range(doc.n_paragraphs):
        lo, hi = doc.paragraph_range(p)
        pos = lo
        while pos < hi and len(spans) < max_spans:
            if doc.is_global(pos):
                pos += 1
                continue
            if rng.random() < density:
                length = int(rng.integers(1, max_len + 1))
                end = min(pos + length, hi)
                spans.append(make_span(doc, pos, end))
                pos = end + int(rng.integers(0, 2))
            else:
                pos += 1
    return spans
