"""Token-overlap F1, Bleu-1/4, and Rouge-L for answer comparison.

All metrics share one normalization: lowercase, strip punctuation
characters, drop the articles a/an/the, collapse whitespace.  Scores are
in [0, 1]; two empty strings compare as 1.0, empty against nonempty as 0.
"""

from __future__ import annotations

import math
import string
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

_ARTICLES = frozenset({"a", "an", "the"})
_PUNCT = str.maketrans("", "", string.punctuation)


def normalize_tokens(text: str) -> list[str]:
    words = text.lower().translate(_PUNCT).split()
    return [w for w in words if w not in _ARTICLES]


@dataclass(frozen=True)
class MetricReport:
    f1: float
    bleu1: float
    bleu4: float
    rouge_l: float

    def __post_init__(self) -> None:
        for v in (self.f1, self.bleu1, self.bleu4, self.rouge_l):
            if not 0.0 <= v <= 1.0:
                raise ValueError("metric outside [0, 1]")


def token_f1(prediction: str, reference: str) -> float:
    pred = normalize_tokens(prediction)
    ref = normalize_tokens(reference)
    if not pred and not ref:
        return 1.0
    if not pred or not ref:
        return 0.0
    common = sum((Counter(pred) & Counter(ref)).values())
    if common == 0:
        return 0.0
    precision = common / len(pred)
    recall = common / len(ref)
    return 2 * precision * recall / (precision + recall)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(prediction: str, reference: str, max_n: int = 4, smoothing: bool = False) -> float:
    """Modified n-gram precision with brevity penalty.

    Orders where the prediction has no n-grams at all are skipped, so an
    identical short pair still scores 1.0.  A zero precision at any used
    order yields 0.0 unless smoothing is on (add-half on zero counts).
    """
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    pred = normalize_tokens(prediction)
    ref = normalize_tokens(reference)
    if not pred and not ref:
        return 1.0
    if not pred or not ref:
        return 0.0
    log_sum = 0.0
    used = 0
    for n in range(1, max_n + 1):
        counts = _ngrams(pred, n)
        total = sum(counts.values())
        if total == 0:
            continue
        ref_counts = _ngrams(ref, n)
        clipped = sum(min(c, ref_counts[g]) for g, c in counts.items())
        if clipped == 0:
            if not smoothing:
                return 0.0
            precision = 0.5 / total
        else:
            precision = clipped / total
        log_sum += math.log(precision)
        used += 1
    if used == 0:
        return 0.0
    brevity = 1.0 if len(pred) >= len(ref) else math.exp(1.0 - len(ref) / len(pred))
    return brevity * math.exp(log_sum / used)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    # single-row DP
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        row = [0]
        for j, y in enumerate(b, 1):
            if x == y:
                row.append(prev[j - 1] + 1)
            else:
                row.append(max(prev[j], row[j - 1]))
        prev = row
    return prev[-1]


def rouge_l(prediction: str, reference: str) -> float:
    """LCS-based F-measure with equal precision/recall weighting."""
    pred = normalize_tokens(prediction)
    ref = normalize_tokens(reference)
    if not pred and not ref:
        return 1.0
    if not pred or not ref:
        return 0.0
    lcs = _lcs_length(pred, ref)
    if lcs == 0:
        return 0.0
    precision = lcs / len(pred)
    recall = lcs / len(ref)
    return 2 * precision * recall / (precision + recall)


def score_pair(prediction: str, reference: str) -> MetricReport:
    return MetricReport(
        f1=token_f1(prediction, reference),
        bleu1=bleu(prediction, reference, max_n=1),
        bleu4=bleu(prediction, reference, max_n=4),
        rouge_l=rouge_l(prediction, reference),
    )


def best_over_references(prediction: str, references: Sequence[str]) -> MetricReport:
    """Per-metric maximum over several references."""
    if not references:
        raise ValueError("need at least one reference")
    reports = [score_pair(prediction, r) for r in references]
    return MetricReport(
        f1=max(r.f1 for r in reports),
        bleu1=max(r.bleu1 for r in reports),
        bleu4=max(r.bleu4 for r in reports),
        rouge_l=max(r.rouge_l for r in reports),
    )
