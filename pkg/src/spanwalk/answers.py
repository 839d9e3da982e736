"""Masked answer templates, infilling channels, and QG context gathering.

A cluster's spans become a template of span texts separated by "<mask>"
placeholders.  The built-in connector fill just deletes the masks; a real
infiller runs out of process behind a one-line-in/one-line-out channel.
Channel answers are checked against the span-preservation contract and
fall back to the connector on any violation or channel failure.
"""

from __future__ import annotations

import queue
import subprocess
import threading
import time
from dataclasses import dataclass
from typing import Sequence

from .documents import Document, Span
from .errors import ChannelError
from .walker import Cluster

MASK_TOKEN = "<mask>"


@dataclass(frozen=True)
class AnswerTemplate:
    """Alternating span texts and mask placeholders, document order."""

    segments: tuple[str, ...]
    span_offsets: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("template must contain at least one segment")
        texts = self.segments[0::2]
        masks = self.segments[1::2]
        if any(t == MASK_TOKEN for t in texts) or any(m != MASK_TOKEN for m in masks):
            raise ValueError("segments must alternate span text and mask")
        if len(self.segments) % 2 == 0:
            raise ValueError("template must start and end with span text")
        if len(self.span_offsets) != len(texts):
            raise ValueError("one offset pair per text segment")

    @property
    def span_texts(self) -> tuple[str, ...]:
        return self.segments[0::2]

    @property
    def mask_count(self) -> int:
        return len(self.segments) // 2

    def render(self) -> str:
        return " ".join(self.segments)


@dataclass(frozen=True)
class QAPairCandidate:
    doc_id: str
    layer: int
    head: int
    spans: tuple[tuple[int, int], ...]
    answer: str
    question: str
    context_sentences: tuple[str, ...]
    used_bridge: bool
    multi_span: bool
    fallback_fill: bool = False

    def __post_init__(self) -> None:
        if self.multi_span != (len(self.spans) >= 2):
            raise ValueError("multi_span flag must match the span count")
        if not self.context_sentences:
            raise ValueError("context_sentences must be nonempty")


def build_template(doc: Document, cluster: Cluster | Sequence[Span]) -> AnswerTemplate:
    """Interleave the cluster's span texts with mask placeholders.

    Spans are ordered by start offset no matter how they are supplied.
    """
    spans = cluster.spans if isinstance(cluster, Cluster) else tuple(cluster)
    spans = sorted(spans, key=lambda s: (s.start, s.end))
    if not spans:
        raise ValueError("cannot build a template from zero spans")
    segments: list[str] = []
    offsets: list[tuple[int, int]] = []
    for s in spans:
        if s.end > doc.n_tokens:
            raise ValueError("span out of document range")
        if segments:
            segments.append(MASK_TOKEN)
        segments.append(doc.render(s.start, s.end))
        offsets.append((s.start, s.end))
    return AnswerTemplate(segments=tuple(segments), span_offsets=tuple(offsets))


def connector_fill(template: AnswerTemplate) -> str:
    """Drop the masks: span texts joined by single spaces."""
    return " ".join(template.span_texts)


def spans_preserved(template: AnswerTemplate, answer: str) -> bool:
    """Check the infiller contract on a candidate answer.

    Every span's token sequence must occur contiguously in the answer,
    and the spans must appear in document order.
    """
    answer_tokens = answer.split()
    pos = 0
    for text in template.span_texts:
        want = text.split()
        found = -1
        for i in range(pos, len(answer_tokens) - len(want) + 1):
            if answer_tokens[i : i + len(want)] == want:
                found = i
                break
        if found < 0:
            return False
        pos = found + len(want)
    return True


class FunctionChannel:
    """Wraps a plain callable as a channel.  Mostly for tests and plug-ins
    that happen to be importable."""

    def __init__(self, fn):
        self._fn = fn

    def ask(self, line: str) -> str:
        try:
            return str(self._fn(line))
        except Exception as exc:
            raise ChannelError(str(exc)) from exc

    def close(self) -> None:
        pass


class ProcessChannel:
    """Long-lived filter process: one request line in, one answer line out."""

    def __init__(self, argv: Sequence[str], timeout_ms: int = 10000):
        self.timeout_ms = timeout_ms
        self._proc = subprocess.Popen(
            list(argv),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._lock = threading.Lock()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line.rstrip("\n"))
        self._lines.put(None)

    def ask(self, line: str) -> str:
        line = line.replace("\n", " ")
        with self._lock:
            if self._proc.poll() is not None:
                raise ChannelError("channel process has exited")
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.write(line + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise ChannelError(f"channel write failed: {exc}") from exc
            try:
                answer = self._lines.get(timeout=self.timeout_ms / 1000.0)
            except queue.Empty:
                raise ChannelError("channel timed out") from None
            if answer is None:
                raise ChannelError("channel closed its output")
            return answer

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                if self._proc.stdin is not None:
                    self._proc.stdin.close()
                self._proc.wait(timeout=2)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class FileChannel:
    """Request/response files: request N is line N, answer N is line N.

    The responder appends one answer line per request line.  ask() polls
    the response file until the matching line shows up or the timeout
    elapses.
    """

    def __init__(
        self,
        request_path: str,
        response_path: str,
        timeout_ms: int = 10000,
        poll_interval: float = 0.05,
    ):
        self.request_path = request_path
        self.response_path = response_path
        self.timeout_ms = timeout_ms
        self.poll_interval = poll_interval
        self._lock = threading.Lock()
        self._sent = 0

    def ask(self, line: str) -> str:
        line = line.replace("\n", " ")
        with self._lock:
            index = self._sent
            with open(self.request_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
            self._sent += 1
            deadline = time.monotonic() + self.timeout_ms / 1000.0
            while time.monotonic() < deadline:
                try:
                    with open(self.response_path, "r", encoding="utf-8") as fh:
                        lines = fh.read().split("\n")
                except FileNotFoundError:
                    lines = []
                if len(lines) > index + 1:
                    return lines[index]
                time.sleep(self.poll_interval)
            raise ChannelError("response file timed out")

    def close(self) -> None:
        pass


def external_fill(template: AnswerTemplate, channel) -> tuple[str, bool]:
    """Fill a template through a channel.

    Returns (answer, used_fallback).  The fallback is the connector fill,
    taken on channel failure or when the answer violates the span
    preservation contract.
    """
    try:
        answer = channel.ask(template.render())
    except ChannelError:
        return connector_fill(template), True
    if not spans_preserved(template, answer):
        return connector_fill(template), True
    return answer, False


def gather_context_sentences(doc: Document, cluster: Cluster | Sequence[Span]) -> list[str]:
    """Sentences overlapping any cluster span, document order, deduplicated."""
    spans = cluster.spans if isinstance(cluster, Cluster) else tuple(cluster)
    out = []
    for lo, hi in doc.sentence_intervals():
        for s in spans:
            if s.start < hi and lo < s.end:
                text = doc.render(lo, hi)
                if text:
                    out.append(text)
                break
    return out


def build_qg_input(answer: str, sentences: Sequence[str], separator: str = " | ") -> str:
    return answer + separator + " ".join(sentences)


def generate_question(
    answer: str, sentences: Sequence[str], channel, separator: str = " | "
) -> tuple[str, bool]:
    """Ask the QG channel for a question.  Returns (question, ok)."""
    try:
        return channel.ask(build_qg_input(answer, sentences, separator)), True
    except ChannelError:
        return "", False
