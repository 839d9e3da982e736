"""Dataset construction runs: ordering, stats, manifests, failure handling."""

import hashlib
import json

import pytest

from spanwalk.answers import FunctionChannel
from spanwalk.errors import FormatError
from spanwalk.pipeline import (
    DatasetStats,
    PassProfile,
    candidate_to_record,
    dataset_stats,
    iter_dataset,
    pass_one_profile,
    pass_two_profile,
    record_to_candidate,
    run_pass,
)

from conftest import emit_corpus


def run_emit(tmp_path, profile, name="out.jsonl", **kw):
    docs, dumps, parses = emit_corpus()
    out = tmp_path / name
    report = run_pass(profile, docs, dumps, parses, str(out), **kw)
    return report, out


class TestPassProfile:
    def test_name_flag_consistency(self):
        with pytest.raises(ValueError):
            PassProfile(name="pass-one", use_global_bridges=True)
        with pytest.raises(ValueError):
            PassProfile(name="pass-two", use_global_bridges=False)
        assert not pass_one_profile().use_global_bridges
        assert pass_two_profile().use_global_bridges

    def test_custom_names_free(self):
        p = PassProfile(name="ablation", use_global_bridges=True)
        assert p.use_global_bridges


class TestRunPass:
    def test_pass_two_stats(self, tmp_path):
        report, out = run_emit(tmp_path, pass_two_profile())
        s = report.stats
        assert (s.overall, s.with_global, s.multi_span) == (5, 2, 3)
        assert s.fallback_fills == 0
        assert s.per_doc == (("em-one", 1), ("em-two", 1), ("em-three", 3))

    def test_pass_one_never_uses_bridges(self, tmp_path):
        report, out = run_emit(tmp_path, pass_one_profile())
        assert report.stats.with_global == 0
        for c in iter_dataset(str(out)):
            assert not c.used_bridge
        # the cross-paragraph pair only exists via markers
        assert report.stats.overall == 7

    def test_worker_count_does_not_change_bytes(self, tmp_path):
        _, serial = run_emit(tmp_path, pass_two_profile(), "serial.jsonl",
                             seed=3, workers=1)
        _, pooled = run_emit(tmp_path, pass_two_profile(), "pooled.jsonl",
                             seed=3, workers=4)
        assert serial.read_bytes() == pooled.read_bytes()

    def test_same_seed_same_bytes(self, tmp_path):
        _, a = run_emit(tmp_path, pass_two_profile(), "a.jsonl", seed=9)
        _, b = run_emit(tmp_path, pass_two_profile(), "b.jsonl", seed=9)
        assert a.read_bytes() == b.read_bytes()

    def test_dataset_stats_match_run_report(self, tmp_path):
        report, out = run_emit(tmp_path, pass_two_profile())
        assert dataset_stats(str(out)) == report.stats

    def test_records_round_trip(self, tmp_path):
        report, out = run_emit(tmp_path, pass_two_profile())
        back = list(iter_dataset(str(out)))
        assert len(back) == report.stats.overall
        for c in back:
            assert candidate_to_record(record_to_candidate(candidate_to_record(c))) == (
                candidate_to_record(c)
            )

    def test_answers_and_context(self, tmp_path):
        report, out = run_emit(tmp_path, pass_two_profile())
        by_doc = {}
        for c in iter_dataset(str(out)):
            by_doc.setdefault(c.doc_id, []).append(c)
        (pair,) = by_doc["em-one"]
        assert pair.answer == "A B"
        assert pair.context_sentences == ("A fa", "B fb")
        assert pair.used_bridge and pair.multi_span

    def test_missing_dump_rejected(self, tmp_path):
        docs, dumps, parses = emit_corpus()
        del dumps["em-two"]
        with pytest.raises(FormatError, match="no attention dump"):
            run_pass(pass_two_profile(), docs, dumps, parses,
                     str(tmp_path / "x.jsonl"))

    def test_missing_parse_rejected(self, tmp_path):
        docs, dumps, parses = emit_corpus()
        del parses["em-three"]
        with pytest.raises(FormatError, match="no parse record"):
            run_pass(pass_two_profile(), docs, dumps, parses,
                     str(tmp_path / "x.jsonl"))

    def test_token_mismatch_rejected(self, tmp_path):
        docs, dumps, parses = emit_corpus()
        dumps["em-one"] = dumps["em-three"]
        with pytest.raises(FormatError, match="token count mismatch"):
            run_pass(pass_two_profile(), docs, dumps, parses,
                     str(tmp_path / "x.jsonl"))

    def test_unexpected_error_skips_document(self, tmp_path, caplog):
        docs, dumps, parses = emit_corpus()
        # a constituent with no score entry trips a KeyError mid-run
        parses["em-two"] = {
            "doc_id": "em-two",
            "nodes": [{"start": 1, "end": 2, "label": "NP"}],
            "scores": [],
        }
        report = run_pass(pass_two_profile(), docs, dumps, parses,
                          str(tmp_path / "x.jsonl"))
        assert report.skipped == ("em-two",)
        assert "em-two" not in dict(report.stats.per_doc)
        assert report.stats.overall == 4

    def test_fallback_fill_accounting(self, tmp_path):
        stubborn = FunctionChannel(lambda line: "irrelevant words")
        report, out = run_emit(tmp_path, pass_two_profile(),
                               infill_channel=stubborn)
        assert report.stats.fallback_fills == report.stats.overall
        for c in iter_dataset(str(out)):
            assert c.fallback_fill

    def test_cooperating_infill_channel(self, tmp_path):
        glue = FunctionChannel(lambda line: line.replace("<mask>", "links to"))
        report, out = run_emit(tmp_path, pass_two_profile(),
                               infill_channel=glue)
        assert report.stats.fallback_fills == 0
        answers = {c.doc_id: c.answer for c in iter_dataset(str(out))
                   if c.multi_span}
        assert answers["em-one"] == "A links to B"

    def test_question_channel_wiring(self, tmp_path):
        qg = FunctionChannel(lambda line: "what connects " + line.split(" | ")[0] + "?")
        _, out = run_emit(tmp_path, pass_two_profile(), qg_channel=qg)
        questions = [c.question for c in iter_dataset(str(out))]
        assert all(q.startswith("what connects ") for q in questions)


class TestManifest:
    def test_fields_and_hash(self, tmp_path):
        report, out = run_emit(tmp_path, pass_two_profile(), seed=7,
                               input_digests={"docs.jsonl": "abc123"})
        m = json.loads((tmp_path / "out.jsonl.manifest.json").read_text())
        assert m == report.manifest
        assert m["seed"] == 7
        assert m["documents"] == ["em-one", "em-two", "em-three"]
        assert m["inputs"] == {"docs.jsonl": "abc123"}
        assert m["span_selection"] == "reselect-per-pass"
        blob = json.dumps(m["config"], sort_keys=True, separators=(",", ":"))
        assert m["config_hash"] == hashlib.sha256(blob.encode()).hexdigest()

    def test_no_timestamps_and_stable_bytes(self, tmp_path):
        import time
        run_emit(tmp_path, pass_two_profile(), "a.jsonl", seed=1)
        time.sleep(0.05)
        run_emit(tmp_path, pass_two_profile(), "b.jsonl", seed=1)
        a = (tmp_path / "a.jsonl.manifest.json").read_bytes()
        b = (tmp_path / "b.jsonl.manifest.json").read_bytes()
        assert a == b

    def test_walk_seed_excluded_from_config(self, tmp_path):
        report, _ = run_emit(tmp_path, pass_two_profile())
        assert "rng_seed" not in report.manifest["config"]["walk"]
        assert set(report.manifest["config"]["walk"]) == {
            "tau", "directed", "max_cluster_spans", "sample_limit"
        }

    def test_explicit_manifest_path(self, tmp_path):
        docs, dumps, parses = emit_corpus()
        mpath = tmp_path / "custom-manifest.json"
        report = run_pass(pass_two_profile(), docs, dumps, parses,
                          str(tmp_path / "d.jsonl"), manifest_path=str(mpath))
        assert report.manifest_path == str(mpath)
        assert mpath.exists()


class TestDatasetIO:
    def test_malformed_record_rejected(self):
        with pytest.raises(FormatError):
            record_to_candidate({"doc_id": "d"})

    def test_stats_validation(self):
        with pytest.raises(ValueError):
            DatasetStats(overall=1, with_global=2)

    def test_stats_to_dict(self):
        s = DatasetStats(overall=3, with_global=1, multi_span=2,
                         per_doc=(("d", 3),))
        assert s.to_dict()["per_doc"] == {"d": 3}

    def test_iter_dataset_rejects_bad_lines(self, tmp_path):
        p = tmp_path / "bad.jsonl"
        p.write_text("not json\n")
        with pytest.raises(FormatError):
            list(iter_dataset(str(p)))
