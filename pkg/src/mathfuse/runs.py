"""Ranked runs and relevance judgments in TREC interchange format.

A run file has six whitespace-separated columns per line::

    topic Q0 doc_id rank score run_tag

and a qrels file has four::

    topic 0 doc_id grade
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

DEFAULT_MAX_DEPTH = 1000

# Binary relevance thresholds (grade >= threshold means relevant).
PROFILES: dict[str, int] = {
    "arqmath": 2,
    "ntcir-full": 2,
    "ntcir-partial": 1,
}


class RunFormatError(ValueError):
    """A line of a run or qrels file could not be parsed."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class RunValidationError(ValueError):
    """Parsed content violates a run or judgment invariant."""


@dataclass(frozen=True)
class ScoredDoc:
    doc_id: str
    rank: int
    score: float

    def __post_init__(self):
        if not self.doc_id or any(c.isspace() for c in self.doc_id):
            raise RunValidationError(f"invalid doc_id {self.doc_id!r}")
        if self.rank < 1:
            raise RunValidationError(f"rank must be >= 1, got {self.rank}")
        if not math.isfinite(self.score):
            raise RunValidationError(f"non-finite score for {self.doc_id}")


def _check_topic(topic: str, docs: Sequence[ScoredDoc]) -> None:
    seen = set()
    prev_score = math.inf
    for expected_rank, doc in enumerate(docs, start=1):
        if doc.doc_id in seen:
            raise RunValidationError(
                f"topic {topic}: duplicate doc_id {doc.doc_id}")
        seen.add(doc.doc_id)
        if doc.rank != expected_rank:
            raise RunValidationError(
                f"topic {topic}: ranks are not consecutive "
                f"(expected {expected_rank}, got {doc.rank})")
        if doc.score > prev_score:
            raise RunValidationError(
                f"topic {topic}: score increases at rank {doc.rank}")
        prev_score = doc.score


@dataclass(frozen=True)
class RankedRun:
    """Per-topic ranked lists.

    Construction checks the structural invariants (unique doc ids, ranks
    1..n, non-increasing scores). The depth limit is a separate parameter
    of :func:`validate_run` and :func:`parse_run`.
    """

    run_tag: str
    topics: Mapping[str, tuple[ScoredDoc, ...]] = field(default_factory=dict)

    def __post_init__(self):
        frozen = {}
        for topic, docs in self.topics.items():
            docs = tuple(docs)
            _check_topic(topic, docs)
            frozen[topic] = docs
        object.__setattr__(self, "topics", frozen)

    def __getitem__(self, topic: str) -> tuple[ScoredDoc, ...]:
        return self.topics[topic]

    def __contains__(self, topic) -> bool:
        return topic in self.topics

    def __len__(self) -> int:
        return len(self.topics)

    def topic_ids(self) -> list[str]:
        return list(self.topics)

    def get(self, topic: str) -> tuple[ScoredDoc, ...]:
        return self.topics.get(topic, ())

    def scores(self, topic: str) -> dict[str, float]:
        return {d.doc_id: d.score for d in self.get(topic)}

    def ranks(self, topic: str) -> dict[str, int]:
        return {d.doc_id: d.rank for d in self.get(topic)}

    def max_depth(self) -> int:
        return max((len(docs) for docs in self.topics.values()), default=0)


def validate_run(run: RankedRun, max_depth: int | None = DEFAULT_MAX_DEPTH) -> RankedRun:
    if max_depth is not None:
        for topic, docs in run.topics.items():
            if len(docs) > max_depth:
                raise RunValidationError(
                    f"topic {topic}: {len(docs)} documents exceeds "
                    f"maximum depth {max_depth}")
    return run


def ranked_entry(scores: Mapping[str, float] | Iterable[tuple[str, float]],
                 depth: int | None = None) -> tuple[ScoredDoc, ...]:
    """Sort (doc_id, score) pairs by descending score, ties by ascending
    doc_id, and assign ranks 1..n."""
    items = scores.items() if isinstance(scores, Mapping) else scores
    ordered = sorted(items, key=lambda kv: (-kv[1], kv[0]))
    if depth is not None:
        ordered = ordered[:depth]
    return tuple(ScoredDoc(doc_id, rank, float(score))
                 for rank, (doc_id, score) in enumerate(ordered, start=1))


def _decode(data: bytes | str) -> str:
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


def parse_run(data: bytes | str, run_tag_override: str | None = None,
              max_depth: int | None = DEFAULT_MAX_DEPTH) -> RankedRun:
    grouped: dict[str, list[ScoredDoc]] = {}
    run_tag = run_tag_override
    for line_no, line in enumerate(_decode(data).splitlines(), start=1):
        cols = line.split()
        if not cols:
            continue
        if len(cols) != 6:
            raise RunFormatError(f"expected 6 columns, got {len(cols)}", line_no)
        topic, _q0, doc_id, rank_s, score_s, tag = cols
        try:
            rank = int(rank_s)
        except ValueError:
            raise RunFormatError(f"non-integer rank {rank_s!r}", line_no) from None
        try:
            score = float(score_s)
        except ValueError:
            raise RunFormatError(f"non-numeric score {score_s!r}", line_no) from None
        if not math.isfinite(score):
            raise RunFormatError(f"non-finite score {score_s!r}", line_no)
        if rank < 1:
            raise RunFormatError(f"rank must be >= 1, got {rank}", line_no)
        if run_tag is None:
            run_tag = tag
        grouped.setdefault(topic, []).append(ScoredDoc(doc_id, rank, score))

    topics = {}
    for topic, docs in grouped.items():
        # Stable sort: equal ranks keep input order and are caught below.
        topics[topic] = sorted(docs, key=lambda d: d.rank)
    run = RankedRun(run_tag or "run", topics)
    return validate_run(run, max_depth)


def format_score(score: float, precision: int | None = None) -> str:
    if precision is None:
        return repr(float(score))
    return f"{score:.{precision}g}"


def write_run(run: RankedRun, precision: int | None = None) -> bytes:
    """Serialize to TREC format.

    With ``precision=None`` scores use the shortest round-tripping repr, so
    ``parse_run(write_run(run)) == run``. A fixed number of significant
    digits can be requested instead; rounding is monotone, so rank order
    stays valid, but distinct scores may collapse into ties.
    """
    lines = []
    for topic, docs in run.topics.items():
        for d in docs:
            lines.append(f"{topic} Q0 {d.doc_id} {d.rank} "
                         f"{format_score(d.score, precision)} {run.run_tag}\n")
    return "".join(lines).encode("utf-8")


def truncate_run(run: RankedRun, depth: int) -> RankedRun:
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    return RankedRun(run.run_tag,
                     {t: docs[:depth] for t, docs in run.topics.items()})


@dataclass(frozen=True)
class JudgmentSet:
    grades: Mapping[tuple[str, str], int]
    binary_threshold: int = 2

    def __post_init__(self):
        if self.binary_threshold < 1:
            raise RunValidationError(
                f"binary_threshold must be >= 1, got {self.binary_threshold}")
        by_topic: dict[str, dict[str, int]] = {}
        for (topic, doc_id), grade in self.grades.items():
            if grade < 0:
                raise RunValidationError(
                    f"negative grade {grade} for ({topic}, {doc_id})")
            by_topic.setdefault(topic, {})[doc_id] = int(grade)
        object.__setattr__(self, "grades", dict(self.grades))
        object.__setattr__(self, "_by_topic", by_topic)

    def topic_ids(self) -> list[str]:
        return list(self._by_topic)

    def for_topic(self, topic: str) -> dict[str, int]:
        return self._by_topic.get(topic, {})

    def is_relevant(self, grade: int) -> bool:
        return grade >= self.binary_threshold

    def with_threshold(self, threshold: int) -> JudgmentSet:
        return JudgmentSet(self.grades, threshold)

    def restrict(self, topics: Iterable[str]) -> JudgmentSet:
        keep = set(topics)
        return JudgmentSet({k: g for k, g in self.grades.items() if k[0] in keep},
                           self.binary_threshold)


def parse_qrels(data: bytes | str, binary_threshold: int = 2) -> JudgmentSet:
    grades: dict[tuple[str, str], int] = {}
    for line_no, line in enumerate(_decode(data).splitlines(), start=1):
        cols = line.split()
        if not cols:
            continue
        if len(cols) != 4:
            raise RunFormatError(f"expected 4 columns, got {len(cols)}", line_no)
        topic, _iter, doc_id, grade_s = cols
        try:
            grade = int(grade_s)
        except ValueError:
            raise RunFormatError(f"non-integer grade {grade_s!r}", line_no) from None
        if grade < 0:
            raise RunValidationError(f"line {line_no}: negative grade {grade}")
        key = (topic, doc_id)
        if key in grades:
            raise RunValidationError(
                f"line {line_no}: duplicate judgment for ({topic}, {doc_id})")
        grades[key] = grade
    return JudgmentSet(grades, binary_threshold)


def write_qrels(judgments: JudgmentSet) -> bytes:
    return "".join(f"{t} 0 {d} {g}\n"
                   for (t, d), g in judgments.grades.items()).encode("utf-8")
