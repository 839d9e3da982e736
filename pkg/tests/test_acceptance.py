"""Acceptance gate: pinned values and bulk oracle-equivalence sweeps.

Every check prints one PASS/FAIL line so a -s run reads as a report.
Tolerances are stated inline and are not to be loosened.
"""

import math
import random
import time
from contextlib import contextmanager

import numpy as np
import pytest

from spanwalk.attention import empty_dump
from spanwalk.cli import main
from spanwalk.collector import span_loss
from spanwalk.documents import make_span
from spanwalk.errors import SpanwalkError
from spanwalk.graphs import (
    BridgeConfig,
    PoolingMode,
    SpanGraph,
    bridge_global,
    build_span_graph,
    build_with_bridges,
)
from spanwalk.metrics import bleu, rouge_l, score_pair, token_f1
from spanwalk.oracle import oracle_bridge_edges, oracle_clusters, oracle_span_graph
from spanwalk.pipeline import pass_two_profile, run_pass
from spanwalk.synth import SynthSpec, gen_synthetic, sample_spans
from spanwalk.walker import WalkConfig, collect_clusters, prune, walk

from conftest import emit_corpus, make_doc


@contextmanager
def criterion(name):
    try:
        yield
    except Exception:
        print(f"[acceptance] {name}: FAIL")
        raise
    print(f"[acceptance] {name}: PASS")


def _route_dump(w1, w2, w3):
    """Two one-token paragraphs with a single marker route between them."""
    dump = empty_dump(1, 1, 4, window=1, global_positions=(0, 2))
    dump.global_cols[0, 0, 1, 0] = w1   # token -> own marker
    dump.global_rows[0, 0, 0, 2] = w2   # marker -> marker
    dump.global_cols[0, 0, 0, 1] = w2   # mirrored marker-pair entry
    dump.global_rows[0, 0, 1, 3] = w3   # marker -> target token
    return dump


def _route_doc():
    return make_doc([["a"], ["b"]], doc_id="route")


def test_graph_oracle_equivalence():
    """Pooled graphs match the dense-matrix oracle bit for bit."""
    started = time.monotonic()
    instances = 0
    with criterion("graph-oracle-equivalence"):
        for seed in range(36):
            spec = SynthSpec(
                n_paragraphs=2 + seed % 3,
                tokens_per_paragraph=(4, 4 + seed % 9),
                window=1 + seed % 3,
                n_layers=1,
                n_heads=2,
                rng_seed=seed,
            )
            doc, dump, dense, _, _ = gen_synthetic(spec)
            assert dense.n_tokens <= 64
            rng = np.random.default_rng(seed)
            spans = sample_spans(doc, rng, density=0.7)
            if len(spans) < 2:
                spans = sample_spans(doc, rng, density=1.0, max_len=2)
            toks = set()
            for s in spans:
                toks.update(range(s.start, s.end))
            for mode in PoolingMode:
                for head in range(2):
                    plain = build_span_graph(dump, 0, head, spans, mode)
                    want = oracle_span_graph(dense, spans, mode, None, 0, head)
                    assert plain.edges == want.edges
                    assert plain.bridged == frozenset()
                    instances += 1

                    fused = build_with_bridges(dump, 0, head, doc, spans, mode)
                    bridges = {
                        (s, d): g
                        for s, d, g in oracle_bridge_edges(
                            dense, doc, 0, head, BridgeConfig(), candidates=toks
                        )
                    }
                    want = oracle_span_graph(dense, spans, mode, bridges, 0, head)
                    assert fused.edges == want.edges
                    assert fused.bridged == want.bridged
                    instances += 1
        assert instances >= 200, instances
        elapsed = time.monotonic() - started
        assert elapsed < 60.0, f"{elapsed:.1f}s"


def test_cluster_oracle_equivalence():
    """Pruned-walk partitions match union-find, and tighter thresholds refine."""
    with criterion("cluster-oracle-equivalence"):
        rng = random.Random(2024)
        doc = make_doc([["t%d" % i for i in range(14)]])
        spans = tuple(make_span(doc, i + 1, i + 2) for i in range(12))
        for _ in range(200):
            edges = {}
            for _ in range(rng.randint(0, 30)):
                i, j = rng.randrange(12), rng.randrange(12)
                if i != j:
                    edges[(i, j)] = rng.random()
            g = SpanGraph(layer=0, head=0, nodes=spans, edges=edges)
            tau = rng.random() * 0.8
            got = sorted(
                tuple(sorted(spans.index(s) for s in c.spans))
                for c in walk(prune(g, tau))
            )
            assert got == oracle_clusters(g, tau)
            coarse = [set(p) for p in got]
            fine = [
                set(p) for p in oracle_clusters(g, tau + 0.1)
            ]
            for part in fine:
                assert any(part <= whole for whole in coarse)


def test_heatmap_max_pooling_fixture():
    """A hand-encoded token heatmap pools to exactly its largest cell."""
    with criterion("heatmap-max-pooling"):
        doc = make_doc(
            [["a", "single-layer", "forward", "recurrent", "neural", "network",
              "Long", "Short-Term", "Memory"]]
        )
        grid = [
            [0.0001, 0.0134, 0.0021],
            [0.0312, 0.1420, 0.0045],
            [0.0008, 0.0671, 0.0102],
            [0.2103, 0.4762, 0.0933],
            [0.0054, 0.3108, 0.0217],
            [0.0411, 0.0889, 0.0036],
        ]
        dump = empty_dump(1, 1, doc.n_tokens, window=9, global_positions=(0,))
        for i, row in enumerate(grid):
            src = 1 + i
            for j, w in enumerate(row):
                dst = 7 + j
                dump.band[0, 0, src, dst - src + dump.window] = w
        spans = [make_span(doc, 1, 7), make_span(doc, 7, 10)]
        g = build_span_graph(dump, 0, 0, spans, PoolingMode.MAX)
        assert g.edges[(0, 1)] == float(np.float32(0.4762))
        survivors = prune(g, 0.45).edges
        assert (0, 1) in survivors
        linked = [c for c in walk(prune(g, 0.45)) if len(c.spans) == 2]
        assert len(linked) == 1


def test_chain_cluster_fixture():
    """Two above-threshold edges chain three spans; the rest stay out."""
    with criterion("chain-cluster"):
        doc = make_doc(
            [["The", "main", "contributions",
              "a", "single-layer", "forward", "recurrent", "neural", "network",
              "Long", "Short-Term", "Memory",
              "unrelated", "words", "more", "noise"]]
        )
        spans = [
            make_span(doc, 1, 4),     # The main contributions
            make_span(doc, 4, 10),    # a single-layer ... network
            make_span(doc, 10, 13),   # Long Short-Term Memory
            make_span(doc, 13, 15),   # decoy
            make_span(doc, 15, 17),   # decoy
        ]
        dump = empty_dump(1, 1, doc.n_tokens, window=16, global_positions=(0,))

        def put(src, dst, w):
            dump.band[0, 0, src, dst - src + dump.window] = w

        put(3, 4, 0.53)    # chain link one
        put(9, 10, 0.48)   # chain link two
        put(3, 13, 0.31)   # decoy attachments, all below threshold
        put(13, 10, 0.44)
        put(15, 4, 0.29)
        put(16, 15, 0.12)
        g = build_span_graph(dump, 0, 0, spans, PoolingMode.MAX)
        assert g.edges[(0, 1)] == float(np.float32(0.53))
        assert g.edges[(1, 2)] == float(np.float32(0.48))
        clusters = walk(prune(g, 0.45))
        sizes = sorted(len(c.spans) for c in clusters)
        assert sizes == [1, 1, 3]
        (triple,) = [c for c in clusters if len(c.spans) == 3]
        assert [s.start for s in triple.spans] == [1, 4, 10]


def test_span_loss_values():
    """Pinned reconstruction-loss values and strict monotonicity."""
    with criterion("span-loss-values"):
        assert abs(span_loss([math.exp(-1), math.exp(-1)]) - 1.0) < 1e-9
        assert span_loss([1.0, 1.0, 1.0]) == 0.0
        rng = random.Random(5)
        for _ in range(1000):
            probs = [rng.uniform(0.05, 1.0) for _ in range(rng.randint(1, 6))]
            lowered = list(probs)
            i = rng.randrange(len(probs))
            lowered[i] *= rng.uniform(0.3, 0.95)
            assert span_loss(lowered) > span_loss(probs)


def test_bridge_weight_values():
    """Pinned marker-route weights, hop bounds, and non-overwrite."""
    with criterion("bridge-weight-values"):
        doc = _route_doc()
        cfg = BridgeConfig(k=1, l=1, m=1)

        edges = bridge_global(_route_dump(1.0, 1.0, 1.0), 0, 0, doc, cfg)
        (unit,) = [g for s, d, g in edges if (s, d) == (1, 3)]
        assert unit == 1.0

        edges = bridge_global(_route_dump(0.125, 1.0, 1.0), 0, 0, doc, cfg)
        (half,) = [g for s, d, g in edges if (s, d) == (1, 3)]
        assert abs(half - 0.5) < 1e-9

        rng = random.Random(99)
        for _ in range(1000):
            w1, w2, w3 = (rng.uniform(0.01, 1.0) for _ in range(3))
            edges = bridge_global(_route_dump(w1, w2, w3), 0, 0, doc, cfg)
            (g,) = [g for s, d, g in edges if (s, d) == (1, 3)]
            hops = [float(np.float32(w)) for w in (w1, w2, w3)]
            assert min(hops) - 1e-12 <= g <= max(hops) + 1e-12

        # a huge marker route must not displace a weak in-band entry
        weak = make_doc([["a", "b"], ["c", "d"]])
        dump = empty_dump(1, 1, 6, window=2, global_positions=(0, 3))
        dump.band[0, 0, 2, 2 + 2] = 0.05            # 2 -> 4, in window
        dump.global_cols[0, 0, 2, 0] = 1.0
        dump.global_rows[0, 0, 0, 3] = 1.0
        dump.global_cols[0, 0, 0, 1] = 1.0
        dump.global_rows[0, 0, 1, 4] = 1.0
        spans = [make_span(weak, 2, 3), make_span(weak, 4, 5)]
        g = build_with_bridges(dump, 0, 0, weak, spans, PoolingMode.MAX)
        assert g.edges[(0, 1)] == float(np.float32(0.05))
        assert (0, 1) not in g.bridged

        # and across synthetic instances, unflagged edges are untouched
        for seed in range(20):
            doc_s, dump_s, _, _, _ = gen_synthetic(SynthSpec(rng_seed=seed))
            spans_s = sample_spans(doc_s, np.random.default_rng(seed), density=0.7)
            if len(spans_s) < 2:
                continue
            plain = build_span_graph(dump_s, 0, 0, spans_s, PoolingMode.MAX)
            fused = build_with_bridges(dump_s, 0, 0, doc_s, spans_s, PoolingMode.MAX)
            for key, w in fused.edges.items():
                if key in plain.edges:
                    assert w >= plain.edges[key]
                    if key not in fused.bridged:
                        assert w == plain.edges[key]


def test_template_fixture():
    """The canonical three-span cluster renders to the exact masked string."""
    with criterion("template-example"):
        from spanwalk.answers import build_template, connector_fill, spans_preserved

        doc = make_doc(
            [["The", "main", "contributions", "of", "this", "work", "are",
              "a", "single-layer", "forward", "recurrent", "neural", "network",
              "which", "captures", "sentence", "information"]]
        )
        spans = [make_span(doc, 1, 4), make_span(doc, 8, 14), make_span(doc, 16, 18)]
        template = build_template(doc, spans)
        assert template.render() == (
            "The main contributions <mask> a single-layer forward recurrent "
            "neural network <mask> sentence information"
        )
        glue = connector_fill(template)
        assert glue == (
            "The main contributions a single-layer forward recurrent "
            "neural network sentence information"
        )
        assert spans_preserved(template, glue)
        assert spans_preserved(
            template,
            "The main contributions were to develop a single-layer forward "
            "recurrent neural network for sentence information",
        )
        assert not spans_preserved(template, "The main contributions alone")


def test_emit_determinism(tmp_path):
    """Same seed, different worker counts: identical bytes.  Crafted corpus
    reports the pinned statistics."""
    with criterion("emit-determinism"):
        corpus = tmp_path / "corpus"
        assert main(["synth", "--out", str(corpus), "--count", "3",
                     "--seed", "40"]) == 0
        base = [
            "emit",
            "--docs", str(corpus / "docs.jsonl"),
            "--dumps", str(corpus / "dumps"),
            "--parses", str(corpus / "parses.jsonl"),
            "--seed", "3",
        ]
        serial = tmp_path / "serial.jsonl"
        pooled = tmp_path / "pooled.jsonl"
        assert main(base + ["--out", str(serial)]) == 0
        assert main(base + ["--out", str(pooled), "--workers", "4"]) == 0
        assert serial.read_bytes() == pooled.read_bytes()
        assert serial.stat().st_size > 0

        docs, dumps, parses = emit_corpus()
        report = run_pass(
            pass_two_profile(), docs, dumps, parses,
            str(tmp_path / "crafted.jsonl"), seed=0, workers=1,
        )
        s = report.stats
        assert (s.overall, s.with_global, s.multi_span) == (5, 2, 3)
        again = run_pass(
            pass_two_profile(), docs, dumps, parses,
            str(tmp_path / "crafted4.jsonl"), seed=0, workers=4,
        )
        assert (tmp_path / "crafted.jsonl").read_bytes() == (
            tmp_path / "crafted4.jsonl"
        ).read_bytes()
        assert again.stats == s


def test_metric_values():
    """Identity, disjoint, and three hand-derived scores at 1e-6."""
    with criterion("metric-values"):
        full = score_pair("same words here", "same words here")
        assert (full.f1, full.bleu1, full.bleu4, full.rouge_l) == (1.0, 1.0, 1.0, 1.0)
        none = score_pair("red cat", "blue dog")
        assert (none.f1, none.bleu1, none.bleu4, none.rouge_l) == (0.0, 0.0, 0.0, 0.0)

        assert abs(token_f1("x y z", "x y w") - 2 / 3) < 1e-6
        assert abs(rouge_l("w x y z", "w y z") - 6 / 7) < 1e-6
        frozen = math.exp(-0.2) * (1.0 * 0.75 * (2 / 3) * 0.5) ** 0.25
        got = bleu("red cat sat on mat", "red cat sat on floor mat")
        assert abs(got - frozen) < 1e-6
        assert abs(got - 0.5789300674674098) < 1e-6
