"""Configuration and raw-document ingestion."""

import pytest

from spanwalk_exporter.config import (
    ExportConfig,
    ExporterError,
    RawDocument,
    read_raw_documents,
)

from conftest import raw_doc, write_raw_file


class TestExportConfig:
    def _cfg(self, **kw):
        base = dict(checkpoint="c.pt", out_dir="out")
        base.update(kw)
        return ExportConfig(**base)

    def test_defaults_valid(self):
        cfg = self._cfg()
        assert cfg.window == 4 and cfg.n_heads == 2

    def test_rejections(self):
        with pytest.raises(ValueError):
            self._cfg(window=0)
        with pytest.raises(ValueError):
            self._cfg(max_tokens=2)
        with pytest.raises(ValueError):
            self._cfg(d_model=30, n_heads=4)
        with pytest.raises(ValueError):
            self._cfg(batch_size=0)
        with pytest.raises(ValueError):
            self._cfg(layer_heads=((5, 0),))


class TestRawDocuments:
    def test_empty_paragraphs_rejected(self):
        with pytest.raises(ValueError):
            RawDocument(doc_id="d", paragraphs=())
        with pytest.raises(ValueError):
            RawDocument(doc_id="d", paragraphs=("text", "   "))

    def test_read_round_trip(self, tmp_path):
        docs = [raw_doc("a"), raw_doc("b", ("just one paragraph here",))]
        path = tmp_path / "raw.jsonl"
        write_raw_file(path, docs)
        back = read_raw_documents(path)
        assert [d.doc_id for d in back] == ["a", "b"]
        assert back[1].paragraphs == ("just one paragraph here",)

    def test_bad_line_rejected(self, tmp_path):
        path = tmp_path / "raw.jsonl"
        path.write_text('{"doc_id": "a"}\n')
        with pytest.raises(ExporterError, match="raw.jsonl:1"):
            read_raw_documents(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "raw.jsonl"
        path.write_text("\n")
        with pytest.raises(ExporterError, match="no documents"):
            read_raw_documents(path)
