"""Span-graph linking over banded transformer attention.

spanwalk selects informative constituent spans from long documents, links
spans that may be thousands of tokens apart by walking thresholded
attention graphs (with marker-token bridges across paragraphs), and emits
masked answer templates plus QA-candidate records with dataset statistics.
"""

from spanwalk.documents import Document, Span, load_document, make_span
from spanwalk.attention import AttentionDump, ValidationReport, attention_weight, validate
from spanwalk.collector import ParseNode, ScoredSpan, select_spans, span_loss
from spanwalk.graphs import (
    BridgeConfig,
    PoolingMode,
    SpanGraph,
    bridge_global,
    build_span_graph,
    build_with_bridges,
)
from spanwalk.walker import Cluster, WalkConfig, collect_clusters, prune, walk
from spanwalk.answers import (
    AnswerTemplate,
    QAPairCandidate,
    build_template,
    connector_fill,
    external_fill,
    gather_context_sentences,
)
from spanwalk.metrics import MetricReport, bleu, rouge_l, score_pair, token_f1
from spanwalk.pipeline import DatasetStats, PassProfile, dataset_stats, run_pass

__version__ = "0.1.0"

__all__ = [
    "AnswerTemplate",
    "AttentionDump",
    "BridgeConfig",
    "Cluster",
    "DatasetStats",
    "Document",
    "MetricReport",
    "ParseNode",
    "PassProfile",
    "PoolingMode",
    "QAPairCandidate",
    "ScoredSpan",
    "Span",
    "SpanGraph",
    "ValidationReport",
    "WalkConfig",
    "attention_weight",
    "bleu",
    "bridge_global",
    "build_span_graph",
    "build_template",
    "build_with_bridges",
    "collect_clusters",
    "connector_fill",
    "dataset_stats",
    "external_fill",
    "gather_context_sentences",
    "load_document",
    "make_span",
    "prune",
    "rouge_l",
    "run_pass",
    "score_pair",
    "select_spans",
    "span_loss",
    "token_f1",
    "validate",
    "walk",
]
