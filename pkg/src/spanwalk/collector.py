"""Candidate span selection from constituency parses.

Spans are scored by mean negative log-probability of regenerating the masked
span (higher means more informative).  Selection is greedy: repeatedly take
the unexcluded candidate with the largest loss and knock out its ancestors
and descendants, so no selected span nests inside another.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, Sequence

from spanwalk.documents import Document, Span, make_span
from spanwalk.errors import FormatError

MAX_CANDIDATE_TOKENS = 16


@dataclass(frozen=True)
class ParseNode:
    """Constituency node over a document span."""

    span: Span
    label: str
    children: tuple["ParseNode", ...] = ()

    def __post_init__(self) -> None:
        prev = self.span.start
        for child in self.children:
            if child.span.start < prev or child.span.end > self.span.end:
                raise ValueError(
                    f"child span [{child.span.start}, {child.span.end}) not contained "
                    f"and ordered within [{self.span.start}, {self.span.end})"
                )
            prev = child.span.end

    def walk(self) -> Iterator["ParseNode"]:
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class ScoredSpan:
    """A span with its reconstruction loss."""

    span: Span
    loss: float

    def __post_init__(self) -> None:
        if self.loss < 0:
            raise ValueError(f"loss must be nonnegative, got {self.loss}")

    @property
    def token_count(self) -> int:
        return len(self.span)


def span_loss(token_probs: Sequence[float]) -> float:
    """Mean negative log-probability over the ground-truth span tokens."""
    if not token_probs:
        raise ValueError("token_probs must be nonempty")
    total = 0.0
    for p in token_probs:
        if p <= 0.0 or p > 1.0:
            raise ValueError(f"token probability {p} outside (0, 1]")
        total += -math.log(p)
    return total / len(token_probs)


def _is_punctuation_span(doc: Document, span: Span) -> bool:
    return all(
        not any(ch.isalnum() for ch in doc.tokens[i]) for i in range(span.start, span.end)
    )


def select_spans(
    forest: Sequence[ParseNode],
    scores: Mapping[tuple[int, int], float],
    doc: Document | None = None,
    max_len: int = MAX_CANDIDATE_TOKENS,
    loss_floor: float = 0.0,
) -> list[Span]:
    """Greedily pick informative, non-nested candidate spans from a forest.

    Candidates are constituents of at most max_len tokens whose loss exceeds
    loss_floor; punctuation-only constituents are skipped when doc is given.
    Picking a node excludes its ancestors and descendants.  Ties break by
    earliest start, then shortest span.  Returns selections sorted by start.
    """
    nodes: list[ParseNode] = []
    parents: dict[int, int | None] = {}

    def visit(node: ParseNode, parent_idx: int | None) -> None:
        idx = len(nodes)
        nodes.append(node)
        parents[idx] = parent_idx
        for child in node.children:
            visit(child, idx)

    for root in forest:
        visit(root, None)

    candidates = []
    for idx, node in enumerate(nodes):
        span = node.span
        if len(span) > max_len:
            continue
        if doc is not None and _is_punctuation_span(doc, span):
            continue
        key = (span.start, span.end)
        if key not in scores:
            raise KeyError(f"missing score for candidate span {key}")
        loss = scores[key]
        if loss > loss_floor:
            candidates.append((idx, loss))

    candidates.sort(key=lambda item: (-item[1], nodes[item[0]].span.start, len(nodes[item[0]].span)))

    descendants: dict[int, list[int]] = {idx: [] for idx in range(len(nodes))}
    for idx in range(len(nodes)):
        anc = parents[idx]
        while anc is not None:
            descendants[anc].append(idx)
            anc = parents[anc]

    excluded: set[int] = set()
    selected: list[Span] = []
    for idx, _loss in candidates:
        if idx in excluded:
            continue
        selected.append(nodes[idx].span)
        excluded.add(idx)
        excluded.update(descendants[idx])
        anc = parents[idx]
        while anc is not None:
            excluded.add(anc)
            anc = parents[anc]
    selected.sort(key=lambda s: (s.start, s.end))
    return selected


# ---------------------------------------------------------------------------
# parse/score file
# ---------------------------------------------------------------------------


def _node_from_record(record: dict, doc: Document) -> ParseNode:
    try:
        start, end = int(record["start"]), int(record["end"])
        label = str(record.get("label", ""))
        children = tuple(
            _node_from_record(child, doc) for child in record.get("children", ())
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed parse node: {exc}") from exc
    try:
        span = make_span(doc, start, end)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc
    return ParseNode(span=span, label=label, children=children)


def _node_to_record(node: ParseNode) -> dict:
    record: dict = {"start": node.span.start, "end": node.span.end, "label": node.label}
    if node.children:
        record["children"] = [_node_to_record(child) for child in node.children]
    return record


def parse_record_to_forest(
    record: dict, doc: Document
) -> tuple[list[ParseNode], dict[tuple[int, int], float]]:
    """Decode one parse/score record into a forest and a span-to-loss map.

    Score entries carry either a precomputed loss or a per-token probability
    list (in which case the loss is recomputed here).
    """
    forest = [_node_from_record(nrec, doc) for nrec in record.get("nodes", ())]
    scores: dict[tuple[int, int], float] = {}
    for srec in record.get("scores", ()):
        try:
            key = (int(srec["start"]), int(srec["end"]))
            if "loss" in srec:
                loss = float(srec["loss"])
            else:
                loss = span_loss([float(p) for p in srec["token_probs"]])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed score record: {exc}") from exc
        if loss < 0:
            raise FormatError(f"negative loss for span {key}")
        scores[key] = loss
    return forest, scores


def forest_to_record(
    doc_id: str, forest: Sequence[ParseNode], scores: Mapping[tuple[int, int], float]
) -> dict:
    return {
        "doc_id": doc_id,
        "nodes": [_node_to_record(n) for n in forest],
        "scores": [
            {"start": s, "end": e, "loss": scores[(s, e)]}
            for (s, e) in sorted(scores)
        ],
    }


def load_parse_file(path: str | Path) -> dict[str, dict]:
    """Map doc_id to its raw parse/score record (decoded lazily per document)."""
    records: dict[str, dict] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                doc_id = str(record["doc_id"])
            except (json.JSONDecodeError, KeyError) as exc:
                raise FormatError(f"{path}:{lineno}: malformed parse record: {exc}") from exc
            records[doc_id] = record
    return records


def write_parse_file(records: Sequence[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")
