"""Document model: token sequences with paragraph, sentence, and marker structure.

A document is a flat token sequence in one shared coordinate system.  Paragraph
markers (the special paragraph-initial tokens that receive global attention)
are materialized as real tokens, so every index in every file refers to the
same sequence; rendering operations skip the marker positions.
"""

from __future__ import annotations

import io
import json
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, TextIO

from spanwalk.errors import FormatError

# Tokens that end a sentence when no explicit sentence_starts are provided.
SENTENCE_FINAL = (".", "?", "!")


@dataclass(frozen=True)
class Document:
    """A long document as an immutable token sequence with structure indices.

    paragraph_starts is strictly increasing and begins at 0.  global_positions
    lists the inserted paragraph-marker tokens; each must sit at a paragraph
    start.  sentence_starts, when given, must refine paragraph boundaries.
    """

    doc_id: str
    tokens: tuple[str, ...]
    paragraph_starts: tuple[int, ...]
    sentence_starts: tuple[int, ...] | None = None
    global_positions: tuple[int, ...] = ()
    _global_set: frozenset[int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        n = len(self.tokens)
        if n == 0:
            raise ValueError("document has no tokens")
        ps = self.paragraph_starts
        if not ps or ps[0] != 0:
            raise ValueError("paragraph_starts must begin at 0")
        if any(b <= a for a, b in zip(ps, ps[1:])):
            raise ValueError("paragraph_starts must be strictly increasing")
        if ps[-1] >= n:
            raise ValueError("paragraph index out of range")
        pset = set(ps)
        gp = self.global_positions
        if any(b <= a for a, b in zip(gp, gp[1:])):
            raise ValueError("global_positions must be strictly increasing")
        for g in gp:
            if g < 0 or g >= n:
                raise ValueError(f"global position {g} out of range")
            if g not in pset:
                raise ValueError("global token not at paragraph start")
        ss = self.sentence_starts
        if ss is not None:
            if any(b <= a for a, b in zip(ss, ss[1:])):
                raise ValueError("sentence_starts must be strictly increasing")
            if ss and (ss[0] < 0 or ss[-1] >= n):
                raise ValueError("sentence start out of range")
            if not pset.issubset(ss):
                raise ValueError("sentence_starts must refine paragraph boundaries")
        object.__setattr__(self, "_global_set", frozenset(gp))

    @property
    def n_tokens(self) -> int:
        return len(self.tokens)

    @property
    def n_paragraphs(self) -> int:
        return len(self.paragraph_starts)

    def is_global(self, index: int) -> bool:
        return index in self._global_set

    def paragraph_of(self, index: int) -> int:
        """Paragraph index containing token `index`."""
        if index < 0 or index >= self.n_tokens:
            raise IndexError(f"token index {index} out of range")
        return bisect_right(self.paragraph_starts, index) - 1

    def paragraph_range(self, paragraph: int) -> tuple[int, int]:
        """Half-open token range [start, end) of a paragraph."""
        if paragraph < 0 or paragraph >= self.n_paragraphs:
            raise IndexError(f"paragraph {paragraph} out of range")
        start = self.paragraph_starts[paragraph]
        if paragraph + 1 < self.n_paragraphs:
            return start, self.paragraph_starts[paragraph + 1]
        return start, self.n_tokens

    def paragraph_marker(self, paragraph: int) -> int | None:
        """Position of the paragraph's global marker, or None when absent."""
        start = self.paragraph_range(paragraph)[0]
        return start if start in self._global_set else None

    def content_positions(self, paragraph: int) -> list[int]:
        """Non-marker token positions of a paragraph."""
        lo, hi = self.paragraph_range(paragraph)
        return [i for i in range(lo, hi) if i not in self._global_set]

    def sentence_intervals(self) -> list[tuple[int, int]]:
        """Half-open sentence intervals covering all tokens.

        Uses sentence_starts when present; otherwise falls back to splitting
        after sentence-final punctuation tokens, never crossing a paragraph
        boundary.
        """
        starts = self.sentence_starts
        if starts is None:
            derived = set(self.paragraph_starts)
            for i, tok in enumerate(self.tokens[:-1]):
                if tok in SENTENCE_FINAL:
                    derived.add(i + 1)
            starts = tuple(sorted(derived))
        bounds = list(starts) + [self.n_tokens]
        return [(bounds[k], bounds[k + 1]) for k in range(len(starts))]

    def render(self, start: int, end: int) -> str:
        """Token text of [start, end) joined by single spaces, markers skipped."""
        if start < 0 or end > self.n_tokens or start >= end:
            raise IndexError(f"render range [{start}, {end}) out of range")
        return " ".join(
            self.tokens[i] for i in range(start, end) if i not in self._global_set
        )


@dataclass(frozen=True, order=True)
class Span:
    """Half-open token span [start, end) within a single paragraph.

    Spans never cover a global-marker token; use make_span to derive the
    paragraph index and enforce that against a Document.
    """

    start: int
    end: int
    paragraph: int

    def __post_init__(self) -> None:
        if self.start >= self.end:
            raise ValueError(f"empty span [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start


def make_span(doc: Document, start: int, end: int) -> Span:
    """Build a Span for [start, end), validating the document invariants."""
    if start < 0 or end > doc.n_tokens or start >= end:
        raise ValueError(f"span [{start}, {end}) out of document range")
    para = doc.paragraph_of(start)
    if doc.paragraph_of(end - 1) != para:
        raise ValueError(f"span [{start}, {end}) crosses a paragraph boundary")
    for i in range(start, end):
        if doc.is_global(i):
            raise ValueError(f"span [{start}, {end}) covers global marker at {i}")
    return Span(start, end, para)


def document_from_record(record: dict) -> Document:
    """Build a Document from a parsed line record."""
    try:
        doc = Document(
            doc_id=str(record["doc_id"]),
            tokens=tuple(record["tokens"]),
            paragraph_starts=tuple(record["paragraph_starts"]),
            sentence_starts=(
                tuple(record["sentence_starts"])
                if record.get("sentence_starts") is not None
                else None
            ),
            global_positions=tuple(record.get("global_positions", ())),
        )
    except KeyError as exc:
        raise FormatError(f"document record missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise FormatError(str(exc)) from exc
    return doc


def document_to_record(doc: Document) -> dict:
    record: dict = {
        "doc_id": doc.doc_id,
        "tokens": list(doc.tokens),
        "paragraph_starts": list(doc.paragraph_starts),
    }
    if doc.sentence_starts is not None:
        record["sentence_starts"] = list(doc.sentence_starts)
    record["global_positions"] = list(doc.global_positions)
    return record


def save_document(doc: Document) -> str:
    """Canonical single-line serialization of a document."""
    return json.dumps(document_to_record(doc), ensure_ascii=False, separators=(",", ":"))


def load_document(stream: TextIO | str) -> Document:
    """Load exactly one document record from line-delimited text."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    lines = [line for line in stream if line.strip()]
    if len(lines) != 1:
        raise FormatError(f"expected one document record, found {len(lines)}")
    try:
        record = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed document record: {exc}") from exc
    return document_from_record(record)


def iter_documents(path: str | Path) -> Iterator[Document]:
    """Yield documents from a line-delimited file, one record per line."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: malformed record: {exc}") from exc
            yield document_from_record(record)


def write_documents(docs: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(save_document(doc))
            fh.write("\n")
