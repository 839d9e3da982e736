"""Shared fixture builders for the test suite."""

import io
import json

import pytest

from spanwalk.attention import read_sparse_dump
from spanwalk.documents import Document

MARKER = "</s>"


def make_doc(paragraphs, doc_id="doc", with_markers=True, sentence_starts=None):
    """Build a Document from lists of content tokens, one list per paragraph.

    A marker token is prepended to every paragraph unless with_markers is
    False.
    """
    tokens = []
    starts = []
    globals_ = []
    for para in paragraphs:
        starts.append(len(tokens))
        if with_markers:
            globals_.append(len(tokens))
            tokens.append(MARKER)
        tokens.extend(para)
    return Document(
        doc_id=doc_id,
        tokens=tuple(tokens),
        paragraph_starts=tuple(starts),
        sentence_starts=sentence_starts,
        global_positions=tuple(globals_),
    )


def sparse_dump(doc, window, edges, n_layers=1, n_heads=1):
    """Assemble an AttentionDump from explicit (layer, head, src, dst, w)
    entries, using the sparse-text loader's placement rules."""
    header = {
        "n_layers": n_layers,
        "n_heads": n_heads,
        "n_tokens": doc.n_tokens,
        "window": window,
        "global_positions": list(doc.global_positions),
    }
    lines = [json.dumps(header)]
    for layer, head, src, dst, w in edges:
        lines.append(
            json.dumps(
                {"layer": layer, "head": head, "src": src, "dst": dst, "weight": w}
            )
        )
    return read_sparse_dump(io.StringIO("\n".join(lines) + "\n"), doc)


@pytest.fixture
def two_para_doc():
    return make_doc(
        [["alpha", "beta", "gamma"], ["delta", "epsilon", "zeta"]],
        doc_id="two-para",
    )


def _single_token_parse(doc_id, offsets, loss=2.0):
    return {
        "doc_id": doc_id,
        "nodes": [{"start": s, "end": e, "label": "NP"} for s, e in offsets],
        "scores": [{"start": s, "end": e, "loss": loss} for s, e in offsets],
    }


def emit_corpus():
    """Three documents with hand-set attention for end-to-end emit tests.

    Two documents carry a strong marker route between their only spans
    (cross-paragraph, outside the band), the third is a single paragraph
    with one strong local edge and two isolated spans.
    """
    docs, dumps, parses = [], {}, {}
    for name in ("em-one", "em-two"):
        # tokens: </s> A fa </s> B fb
        doc = make_doc([["A", "fa"], ["B", "fb"]], doc_id=name)
        dumps[name] = sparse_dump(
            doc, window=1,
            edges=[(0, 0, 1, 0, 0.8), (0, 0, 0, 3, 0.9), (0, 0, 3, 4, 0.7)],
        )
        parses[name] = _single_token_parse(name, [(1, 2), (4, 5)])
        docs.append(doc)
    # tokens: </s> E F g1 G g2 H
    doc = make_doc([["E", "F", "g1", "G", "g2", "H"]], doc_id="em-three")
    dumps["em-three"] = sparse_dump(doc, window=1, edges=[(0, 0, 1, 2, 0.9)])
    parses["em-three"] = _single_token_parse(
        "em-three", [(1, 2), (2, 3), (4, 5), (6, 7)]
    )
    docs.append(doc)
    return docs, dumps, parses
