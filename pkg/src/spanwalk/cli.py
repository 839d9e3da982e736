"""Command-line front end.

Subcommands: validate, collect, link, emit, stats, synth, score.  Every
tuning flag can also come from a flat key=value profile file passed with
--profile; explicit flags win over file values.  Exit codes: 0 success,
1 validation findings, 2 configuration or format failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .answers import ProcessChannel
from .attention import load_attention_dump, validate, write_dump
from .collector import forest_to_record, parse_record_to_forest, select_spans, load_parse_file
from .documents import Document, iter_documents, write_documents
from .errors import SpanwalkError
from .graphs import (
    BridgeConfig,
    PoolingMode,
    build_span_graph,
    build_with_bridges,
    write_graph_dump,
)
from .pipeline import dataset_stats, pass_one_profile, pass_two_profile, run_pass
from .synth import SynthSpec, gen_synthetic
from .walker import WalkConfig, collect_clusters, write_cluster_dump
from .metrics import score_pair

_PROFILE_KEYS = {
    "tau": float,
    "pooling": str,
    "k": int,
    "l": int,
    "m": int,
    "sample_limit": int,
    "seed": int,
    "workers": int,
    "directed": None,
    "pass": str,
}

_DEFAULTS = {
    "tau": 0.45,
    "pooling": "max",
    "k": 3,
    "l": 3,
    "m": 3,
    "sample_limit": 32,
    "seed": 0,
    "workers": 1,
    "directed": False,
    "pass": "two",
}


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def read_profile_file(path: str) -> dict:
    """Flat key=value lines; '#' starts a comment; keys mirror the flags."""
    values: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, _, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            if key not in _PROFILE_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            caster = _PROFILE_KEYS[key]
            try:
                values[key] = _parse_bool(raw) if caster is None else caster(raw)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return values


def _merge_options(args: argparse.Namespace) -> dict:
    merged = dict(_DEFAULTS)
    if getattr(args, "profile", None):
        merged.update(read_profile_file(args.profile))
    flag_map = {
        "tau": "tau",
        "pooling": "pooling",
        "k": "k",
        "l": "l",
        "m": "m",
        "sample_limit": "sample_limit",
        "seed": "seed",
        "workers": "workers",
        "pass_name": "pass",
    }
    for attr, key in flag_map.items():
        val = getattr(args, attr, None)
        if val is not None:
            merged[key] = val
    if getattr(args, "directed", False):
        merged["directed"] = True
    return merged


def _build_profile(opts: dict):
    pooling = PoolingMode(opts["pooling"])
    walk = WalkConfig(
        tau=opts["tau"],
        directed=opts["directed"],
        sample_limit=opts["sample_limit"],
        rng_seed=opts["seed"],
    )
    bridge = BridgeConfig(k=opts["k"], l=opts["l"], m=opts["m"])
    if opts["pass"] == "one":
        return pass_one_profile(pooling=pooling, walk=walk, bridge=bridge)
    if opts["pass"] == "two":
        return pass_two_profile(pooling=pooling, walk=walk, bridge=bridge)
    raise ValueError(f"unknown pass {opts['pass']!r}")


def _load_docs(path: str) -> list[Document]:
    return list(iter_documents(path))


def _load_dumps(path: str, docs: list[Document]) -> dict:
    p = Path(path)
    dumps = {}
    if p.is_dir():
        for doc in docs:
            for suffix in (".awat", ".jsonl"):
                fp = p / (doc.doc_id + suffix)
                if fp.exists():
                    dumps[doc.doc_id] = load_attention_dump(fp, doc)
                    break
            else:
                raise FileNotFoundError(f"no dump for {doc.doc_id!r} under {path}")
    else:
        if len(docs) != 1:
            raise ValueError("a single dump file requires a single-document corpus")
        dumps[docs[0].doc_id] = load_attention_dump(p, docs[0])
    return dumps


def _sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _selected_spans(doc: Document, parse_records: dict):
    if doc.doc_id not in parse_records:
        raise ValueError(f"no parse record for document {doc.doc_id!r}")
    forest, scores = parse_record_to_forest(parse_records[doc.doc_id], doc)
    return select_spans(forest, scores, doc)


def _cmd_validate(args: argparse.Namespace) -> int:
    docs = _load_docs(args.docs)
    dumps = _load_dumps(args.dumps, docs)
    findings = 0
    for doc in docs:
        report = validate(dumps[doc.doc_id], doc, tolerance=args.tolerance)
        if report.ok:
            print(f"{doc.doc_id}: ok")
            continue
        findings += 1
        print(
            f"{doc.doc_id}: {len(report.index_errors)} structural errors, "
            f"{len(report.row_sum_violations)} row-sum violations"
        )
        for msg in report.index_errors:
            print(f"  {msg}")
        for layer, head, token, total in report.row_sum_violations[:20]:
            print(f"  row sum {total:.6f} at layer {layer} head {head} token {token}")
        if len(report.row_sum_violations) > 20:
            print(f"  ... {len(report.row_sum_violations) - 20} more")
    return 1 if findings else 0


def _cmd_collect(args: argparse.Namespace) -> int:
    docs = _load_docs(args.docs)
    parse_records = load_parse_file(args.parses)
    out = sys.stdout if args.out is None else open(args.out, "w", encoding="utf-8")
    try:
        for doc in docs:
            spans = _selected_spans(doc, parse_records)
            rec = {"doc_id": doc.doc_id, "spans": [[s.start, s.end] for s in spans]}
            out.write(json.dumps(rec, separators=(",", ":")) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_link(args: argparse.Namespace) -> int:
    opts = _merge_options(args)
    profile = _build_profile(opts)
    docs = _load_docs(args.docs)
    dumps = _load_dumps(args.dumps, docs)
    parse_records = load_parse_file(args.parses)
    all_graphs = []
    cluster_items = []
    for index, doc in enumerate(docs):
        dump = dumps[doc.doc_id]
        spans = _selected_spans(doc, parse_records)
        graphs = []
        for layer, head in dump.layer_head_pairs():
            if profile.use_global_bridges:
                g = build_with_bridges(
                    dump, layer, head, doc, spans, profile.pooling, profile.bridge
                )
            else:
                g = build_span_graph(dump, layer, head, spans, profile.pooling)
            graphs.append(g)
        all_graphs.extend(graphs)
        cfg_seed = opts["seed"] + index
        cfg = WalkConfig(
            tau=opts["tau"],
            directed=opts["directed"],
            sample_limit=opts["sample_limit"],
            rng_seed=cfg_seed,
        )
        for cluster in collect_clusters(graphs, cfg):
            cluster_items.append((doc.doc_id, cluster))
    if args.out_graphs:
        write_graph_dump(args.out_graphs, all_graphs)
    if args.out_clusters:
        write_cluster_dump(args.out_clusters, cluster_items)
    if not args.out_graphs and not args.out_clusters:
        for doc_id, cluster in cluster_items:
            offsets = [[s.start, s.end] for s in cluster.spans]
            print(
                f"{doc_id} layer={cluster.layer} head={cluster.head} "
                f"spans={offsets} used_bridge={cluster.used_bridge}"
            )
    return 0


def _cmd_emit(args: argparse.Namespace) -> int:
    opts = _merge_options(args)
    profile = _build_profile(opts)
    docs = _load_docs(args.docs)
    dumps = _load_dumps(args.dumps, docs)
    parse_records = load_parse_file(args.parses)
    digests = {
        "documents": _sha256_file(args.docs),
        "parses": _sha256_file(args.parses),
    }
    dump_dir = Path(args.dumps)
    if dump_dir.is_dir():
        for doc in docs:
            for suffix in (".awat", ".jsonl"):
                fp = dump_dir / (doc.doc_id + suffix)
                if fp.exists():
                    digests[f"dump:{doc.doc_id}"] = _sha256_file(str(fp))
                    break
    else:
        digests["dump"] = _sha256_file(args.dumps)
    infill = ProcessChannel(args.infill_cmd.split(), args.timeout_ms) if args.infill_cmd else None
    qg = ProcessChannel(args.qg_cmd.split(), args.timeout_ms) if args.qg_cmd else None
    try:
        report = run_pass(
            profile,
            docs,
            dumps,
            parse_records,
            args.out,
            seed=opts["seed"],
            workers=opts["workers"],
            infill_channel=infill,
            qg_channel=qg,
            input_digests=digests,
            manifest_path=args.manifest,
        )
    finally:
        if infill is not None:
            infill.close()
        if qg is not None:
            qg.close()
    print(json.dumps(report.stats.to_dict(), sort_keys=True))
    if report.skipped:
        print(f"skipped: {', '.join(report.skipped)}", file=sys.stderr)
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    print(json.dumps(dataset_stats(args.dataset).to_dict(), sort_keys=True))
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_dir = out_dir / "dumps"
    dump_dir.mkdir(exist_ok=True)
    docs = []
    parse_recs = []
    for i in range(args.count):
        spec = SynthSpec(
            n_paragraphs=args.paragraphs,
            tokens_per_paragraph=(args.tokens_lo, args.tokens_hi),
            window=args.window,
            n_layers=args.layers,
            n_heads=args.heads,
            rng_seed=args.seed + i,
        )
        doc, dump, _, forest, scores = gen_synthetic(spec)
        docs.append(doc)
        parse_recs.append(forest_to_record(doc.doc_id, forest, scores))
        write_dump(dump, dump_dir / (doc.doc_id + ".awat"))
    write_documents(docs, out_dir / "docs.jsonl")
    from .collector import write_parse_file

    write_parse_file(parse_recs, out_dir / "parses.jsonl")
    print(f"wrote {len(docs)} documents under {out_dir}")
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    with open(args.predictions, encoding="utf-8") as fh:
        preds = fh.read().splitlines()
    with open(args.references, encoding="utf-8") as fh:
        refs = fh.read().splitlines()
    if len(preds) != len(refs):
        raise ValueError(
            f"line counts differ: {len(preds)} predictions, {len(refs)} references"
        )
    out = sys.stdout if args.out is None else open(args.out, "w", encoding="utf-8")
    try:
        totals = {"f1": 0.0, "bleu1": 0.0, "bleu4": 0.0, "rouge_l": 0.0}
        for i, (p, r) in enumerate(zip(preds, refs)):
            rep = score_pair(p, r)
            rec = {
                "index": i,
                "f1": rep.f1,
                "bleu1": rep.bleu1,
                "bleu4": rep.bleu4,
                "rouge_l": rep.rouge_l,
            }
            for key in totals:
                totals[key] += rec[key]
            out.write(json.dumps(rec, separators=(",", ":")) + "\n")
        count = max(len(preds), 1)
        aggregate = {"aggregate": True}
        aggregate.update({key: totals[key] / count for key in totals})
        out.write(json.dumps(aggregate, separators=(",", ":")) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _add_tuning_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--profile", help="flat key=value options file")
    sub.add_argument("--tau", type=float, default=None)
    sub.add_argument("--pooling", choices=["max", "min", "mean"], default=None)
    sub.add_argument("--k", type=int, default=None)
    sub.add_argument("--l", type=int, default=None)
    sub.add_argument("--m", type=int, default=None)
    sub.add_argument("--sample-limit", dest="sample_limit", type=int, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--workers", type=int, default=None)
    sub.add_argument("--directed", action="store_true")
    sub.add_argument("--pass", dest="pass_name", choices=["one", "two"], default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spanwalk",
        description="Link document spans through banded attention graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a dump against its documents")
    p.add_argument("--docs", required=True)
    p.add_argument("--dumps", required=True)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("collect", help="select candidate spans")
    p.add_argument("--docs", required=True)
    p.add_argument("--parses", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_collect)

    p = sub.add_parser("link", help="build graphs and clusters")
    p.add_argument("--docs", required=True)
    p.add_argument("--dumps", required=True)
    p.add_argument("--parses", required=True)
    p.add_argument("--out-graphs")
    p.add_argument("--out-clusters")
    _add_tuning_flags(p)
    p.set_defaults(fn=_cmd_link)

    p = sub.add_parser("emit", help="run the full pipeline")
    p.add_argument("--docs", required=True)
    p.add_argument("--dumps", required=True)
    p.add_argument("--parses", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    p.add_argument("--infill-cmd", help="filter command for answer infilling")
    p.add_argument("--qg-cmd", help="filter command for question generation")
    p.add_argument("--timeout-ms", type=int, default=10000)
    _add_tuning_flags(p)
    p.set_defaults(fn=_cmd_emit)

    p = sub.add_parser("stats", help="recompute dataset statistics")
    p.add_argument("--dataset", required=True)
    p.set_defaults(fn=_cmd_stats)

    p = sub.add_parser("synth", help="generate synthetic fixtures")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--paragraphs", type=int, default=3)
    p.add_argument("--tokens-lo", type=int, default=4)
    p.add_argument("--tokens-hi", type=int, default=8)
    p.add_argument("--window", type=int, default=2)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("score", help="compare predictions against references")
    p.add_argument("--predictions", required=True)
    p.add_argument("--references", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_score)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (SpanwalkError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
