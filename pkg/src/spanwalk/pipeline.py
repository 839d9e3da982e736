"""End-to-end dataset construction.

A pass profile bundles the knobs for one sweep over the corpus: pass one
runs on local attention only, pass two turns the global-marker bridges
on.  Documents are processed independently (optionally across a worker
pool) and their records are emitted strictly in input order, so the
output bytes depend only on the inputs, the profile, and the seed.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .answers import (
    QAPairCandidate,
    build_template,
    connector_fill,
    external_fill,
    gather_context_sentences,
    generate_question,
)
from .attention import AttentionDump
from .collector import parse_record_to_forest, select_spans
from .documents import Document
from .errors import FormatError, SpanwalkError
from .graphs import BridgeConfig, PoolingMode, build_span_graph, build_with_bridges
from .walker import WalkConfig, collect_clusters

log = logging.getLogger("spanwalk")


@dataclass(frozen=True)
class PassProfile:
    name: str
    use_global_bridges: bool
    pooling: PoolingMode = PoolingMode.MAX
    walk: WalkConfig = WalkConfig()
    bridge: BridgeConfig = BridgeConfig()
    layer_head_filter: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self) -> None:
        if self.name == "pass-one" and self.use_global_bridges:
            raise ValueError("pass-one runs without global bridges")
        if self.name == "pass-two" and not self.use_global_bridges:
            raise ValueError("pass-two runs with global bridges")


def pass_one_profile(**overrides) -> PassProfile:
    return PassProfile(name="pass-one", use_global_bridges=False, **overrides)


def pass_two_profile(**overrides) -> PassProfile:
    return PassProfile(name="pass-two", use_global_bridges=True, **overrides)


@dataclass(frozen=True)
class DatasetStats:
    overall: int = 0
    with_global: int = 0
    multi_span: int = 0
    fallback_fills: int = 0
    per_doc: tuple[tuple[str, int], ...] = ()

    def __post_init__(self) -> None:
        if self.with_global > self.overall or self.multi_span > self.overall:
            raise ValueError("flag counts cannot exceed the record count")

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "with_global": self.with_global,
            "multi_span": self.multi_span,
            "fallback_fills": self.fallback_fills,
            "per_doc": {doc_id: n for doc_id, n in self.per_doc},
        }


@dataclass(frozen=True)
class RunReport:
    stats: DatasetStats
    skipped: tuple[str, ...]
    manifest: dict
    dataset_path: str
    manifest_path: str


def profile_to_dict(profile: PassProfile) -> dict:
    return {
        "name": profile.name,
        "use_global_bridges": profile.use_global_bridges,
        "pooling": profile.pooling.value,
        "walk": {
            "tau": profile.walk.tau,
            "directed": profile.walk.directed,
            "max_cluster_spans": profile.walk.max_cluster_spans,
            "sample_limit": profile.walk.sample_limit,
        },
        "bridge": {
            "k": profile.bridge.k,
            "l": profile.bridge.l,
            "m": profile.bridge.m,
            "rank_from_marker": profile.bridge.rank_from_marker,
        },
        "layer_head_filter": (
            None
            if profile.layer_head_filter is None
            else [list(p) for p in profile.layer_head_filter]
        ),
    }


def candidate_to_record(c: QAPairCandidate) -> dict:
    return {
        "doc_id": c.doc_id,
        "layer": c.layer,
        "head": c.head,
        "spans": [[s, e] for s, e in c.spans],
        "answer": c.answer,
        "question": c.question,
        "context_sentences": list(c.context_sentences),
        "used_bridge": c.used_bridge,
        "multi_span": c.multi_span,
        "fallback_fill": c.fallback_fill,
    }


def record_to_candidate(rec: dict) -> QAPairCandidate:
    try:
        return QAPairCandidate(
            doc_id=rec["doc_id"],
            layer=rec["layer"],
            head=rec["head"],
            spans=tuple((int(s), int(e)) for s, e in rec["spans"]),
            answer=rec["answer"],
            question=rec["question"],
            context_sentences=tuple(rec["context_sentences"]),
            used_bridge=bool(rec["used_bridge"]),
            multi_span=bool(rec["multi_span"]),
            fallback_fill=bool(rec.get("fallback_fill", False)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad dataset record: {exc}") from exc


def _process_document(
    profile: PassProfile,
    doc: Document,
    dump: AttentionDump,
    parse_record: dict,
    doc_seed: int,
    infill_channel,
    qg_channel,
    qg_separator: str,
) -> list[QAPairCandidate]:
    forest, scores = parse_record_to_forest(parse_record, doc)
    spans = select_spans(forest, scores, doc)
    if not spans:
        return []
    pairs = profile.layer_head_filter or dump.layer_head_pairs()
    graphs = []
    for layer, head in pairs:
        if profile.use_global_bridges:
            g = build_with_bridges(
                dump, layer, head, doc, spans, profile.pooling, profile.bridge
            )
        else:
            g = build_span_graph(dump, layer, head, spans, profile.pooling)
        graphs.append(g)
    cfg = dataclasses.replace(profile.walk, rng_seed=doc_seed)
    out = []
    for cluster in collect_clusters(graphs, cfg):
        template = build_template(doc, cluster)
        if infill_channel is not None:
            answer, fallback = external_fill(template, infill_channel)
        else:
            answer, fallback = connector_fill(template), False
        sentences = gather_context_sentences(doc, cluster)
        question = ""
        if qg_channel is not None:
            question, _ = generate_question(answer, sentences, qg_channel, qg_separator)
        out.append(
            QAPairCandidate(
                doc_id=doc.doc_id,
                layer=cluster.layer,
                head=cluster.head,
                spans=tuple((s.start, s.end) for s in cluster.spans),
                answer=answer,
                question=question,
                context_sentences=tuple(sentences),
                used_bridge=cluster.used_bridge,
                multi_span=len(cluster.spans) >= 2,
                fallback_fill=fallback,
            )
        )
    return out


def run_pass(
    profile: PassProfile,
    documents: Sequence[Document],
    dumps: Mapping[str, AttentionDump],
    parses: Mapping[str, dict],
    out_path: str,
    *,
    seed: int = 0,
    workers: int = 1,
    infill_channel=None,
    qg_channel=None,
    qg_separator: str = " | ",
    input_digests: Mapping[str, str] | None = None,
    manifest_path: str | None = None,
) -> RunReport:
    """Run one pass over a corpus, writing the dataset and its manifest.

    Per-document randomness is seeded by `seed` plus the document's
    position, so worker count never changes the output bytes.  Documents
    that fail with unexpected errors are logged and skipped; format and
    configuration problems abort the run.
    """
    for doc in documents:
        if doc.doc_id not in dumps:
            raise FormatError(f"no attention dump for document {doc.doc_id!r}")
        if doc.doc_id not in parses:
            raise FormatError(f"no parse record for document {doc.doc_id!r}")
        if dumps[doc.doc_id].n_tokens != doc.n_tokens:
            raise FormatError(f"dump token count mismatch for {doc.doc_id!r}")

    def job(index: int, doc: Document):
        return _process_document(
            profile,
            doc,
            dumps[doc.doc_id],
            parses[doc.doc_id],
            seed + index,
            infill_channel,
            qg_channel,
            qg_separator,
        )

    results: list[list[QAPairCandidate] | None] = [None] * len(documents)
    skipped: list[str] = []
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(job, i, d) for i, d in enumerate(documents)]
            for i, fut in enumerate(futures):
                try:
                    results[i] = fut.result()
                except SpanwalkError:
                    raise
                except Exception:
                    log.exception("skipping document %s", documents[i].doc_id)
                    skipped.append(documents[i].doc_id)
    else:
        for i, doc in enumerate(documents):
            try:
                results[i] = job(i, doc)
            except SpanwalkError:
                raise
            except Exception:
                log.exception("skipping document %s", doc.doc_id)
                skipped.append(doc.doc_id)

    overall = with_global = multi = fallback = 0
    per_doc: list[tuple[str, int]] = []
    with open(out_path, "w", encoding="utf-8") as fh:
        for recs in results:
            if not recs:
                continue
            per_doc.append((recs[0].doc_id, len(recs)))
            for c in recs:
                overall += 1
                with_global += c.used_bridge
                multi += c.multi_span
                fallback += c.fallback_fill
                fh.write(json.dumps(candidate_to_record(c), separators=(",", ":")) + "\n")

    stats = DatasetStats(
        overall=overall,
        with_global=with_global,
        multi_span=multi,
        fallback_fills=fallback,
        per_doc=tuple(per_doc),
    )
    config = profile_to_dict(profile)
    config_blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    manifest = {
        "config": config,
        "config_hash": hashlib.sha256(config_blob.encode()).hexdigest(),
        "seed": seed,
        "inputs": dict(input_digests or {}),
        "documents": [d.doc_id for d in documents],
        "span_selection": "reselect-per-pass",
        "f1_normalization": "lowercase, strip punctuation, drop articles, collapse whitespace",
    }
    if manifest_path is None:
        manifest_path = out_path + ".manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(manifest, sort_keys=True, separators=(",", ":")) + "\n")
    return RunReport(
        stats=stats,
        skipped=tuple(skipped),
        manifest=manifest,
        dataset_path=out_path,
        manifest_path=manifest_path,
    )


def iter_dataset(path: str) -> Iterable[QAPairCandidate]:
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"dataset line {line_no}: {exc}") from exc
            yield record_to_candidate(rec)


def dataset_stats(path: str) -> DatasetStats:
    """Recompute the run-time statistics from the record flags."""
    overall = with_global = multi = fallback = 0
    per_doc: dict[str, int] = {}
    for c in iter_dataset(path):
        overall += 1
        with_global += c.used_bridge
        multi += c.multi_span
        fallback += c.fallback_fill
        per_doc[c.doc_id] = per_doc.get(c.doc_id, 0) + 1
    return DatasetStats(
        overall=overall,
        with_global=with_global,
        multi_span=multi,
        fallback_fills=fallback,
        per_doc=tuple(per_doc.items()),
    )
