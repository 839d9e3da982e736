"""Built-in parse backend: balanced constituency forests plus
masked-decoding span scores from the toy encoder.

The forest side is a stand-in for an off-the-shelf parser: balanced
binary trees over each paragraph's content tokens, which gives the span
selector a realistic mix of nested candidates.  The scoring side is the
real thing in miniature: mask the span, re-encode, and read the model's
probability of each original token.
"""

from __future__ import annotations

import torch

from spanwalk.documents import Document

from .encoder import MASK_ID, TinyBandedEncoder, token_id


def _split_range(start: int, end: int, depth: int) -> dict:
    label = "NP" if depth % 2 == 0 else "VP"
    node: dict = {"start": start, "end": end, "label": label}
    if end - start >= 2:
        mid = (start + end) // 2
        node["children"] = [
            _split_range(start, mid, depth + 1),
            _split_range(mid, end, depth + 1),
        ]
    return node


def build_forest(doc: Document) -> list[dict]:
    """One balanced tree per paragraph's content range, markers excluded."""
    roots = []
    globals_set = set(doc.global_positions)
    starts = list(doc.paragraph_starts) + [doc.n_tokens]
    for lo, hi in zip(starts, starts[1:]):
        while lo in globals_set and lo < hi:
            lo += 1
        if hi - lo >= 1:
            roots.append(_split_range(lo, hi, 0))
    return roots


def _collect_offsets(node: dict, out: set) -> None:
    out.add((node["start"], node["end"]))
    for child in node.get("children", ()):
        _collect_offsets(child, out)


@torch.no_grad()
def score_spans(
    model: TinyBandedEncoder,
    doc: Document,
    ids: torch.Tensor,
    present: torch.Tensor,
    forest: list[dict],
    vocab_size: int,
) -> list[dict]:
    """Per-span token probabilities via masked re-encoding.

    Emits raw probabilities; the consumer recomputes the loss itself, so
    this side never owns the loss formula.
    """
    offsets: set = set()
    for root in forest:
        _collect_offsets(root, offsets)
    records = []
    for start, end in sorted(offsets):
        masked = ids.clone()
        masked[0, start:end] = MASK_ID
        hidden = model.hidden_states(masked, present)
        logits = hidden[0] @ model.embed.weight.T
        probs = torch.softmax(logits, dim=-1)
        token_probs = [
            float(probs[pos, token_id(doc.tokens[pos], vocab_size)])
            for pos in range(start, end)
        ]
        records.append({"start": start, "end": end, "token_probs": token_probs})
    return records
