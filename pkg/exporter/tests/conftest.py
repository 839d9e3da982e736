"""Shared builders for exporter tests."""

import json

import pytest

from spanwalk_exporter.config import ExportConfig, RawDocument

RAW_PARAGRAPHS = (
    "the quick brown fox jumped over the lazy dog",
    "a stitch in time saves nine so they say",
)


def raw_doc(doc_id="toy", paragraphs=RAW_PARAGRAPHS):
    return RawDocument(doc_id=doc_id, paragraphs=tuple(paragraphs))


def tiny_config(tmp_path, **overrides):
    base = dict(
        checkpoint=str(tmp_path / "ckpt.pt"),
        out_dir=str(tmp_path / "run"),
        window=2,
        max_tokens=128,
        n_layers=2,
        n_heads=2,
        d_model=16,
        seed=11,
    )
    base.update(overrides)
    return ExportConfig(**base)


def write_raw_file(path, docs):
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps(
                {"doc_id": d.doc_id, "paragraphs": list(d.paragraphs)}
            ) + "\n")


@pytest.fixture
def corpus(tmp_path):
    docs = [
        raw_doc("exp-one"),
        raw_doc("exp-two", (
            "every good boy deserves fudge today",
            "the rain in spain stays mainly on the plain",
            "all work and no play makes a dull day",
        )),
    ]
    raw_path = tmp_path / "raw.jsonl"
    write_raw_file(raw_path, docs)
    return docs, raw_path
