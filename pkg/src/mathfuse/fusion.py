"""Rank fusion of two or more runs.

Every method works per topic over the union of the input lists, sorts by
descending fused score with ties broken by ascending doc_id, and cuts the
result to ``depth``. Documents retrieved by no input never appear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from sklearn.base import BaseEstimator

from ._validation import check_alpha, check_positive_int, check_run, check_runs
from .runs import DEFAULT_MAX_DEPTH, RankedRun, ScoredDoc, ranked_entry

METHODS = ("linear", "borda", "combsum", "isr", "logisr", "rrf", "rerank")
NORMALIZATIONS = ("minmax", "none")


def minmax_normalize(entry: Sequence[ScoredDoc]) -> list[ScoredDoc]:
    """Rescale one topic's scores to [0, 1]; all-equal scores map to 1.0."""
    if not entry:
        return []
    hi = max(d.score for d in entry)
    lo = min(d.score for d in entry)
    span = hi - lo
    if span > 0:
        return [ScoredDoc(d.doc_id, d.rank, (d.score - lo) / span) for d in entry]
    return [ScoredDoc(d.doc_id, d.rank, 1.0) for d in entry]


def _source_scores(entry: Sequence[ScoredDoc], normalization: str) -> dict[str, float]:
    if normalization == "minmax":
        entry = minmax_normalize(entry)
    elif normalization != "none":
        raise ValueError(f"unknown normalization {normalization!r}")
    return {d.doc_id: d.score for d in entry}


def _all_topics(runs: Sequence[RankedRun]) -> list[str]:
    topics = {}
    for run in runs:
        for t in run.topics:
            topics.setdefault(t, None)
    return list(topics)


def _sum_parts(parts: dict[str, list[float]]) -> dict[str, float]:
    # fsum is exact, so fused scores do not depend on run order.
    return {doc: math.fsum(p) for doc, p in parts.items()}


def _fuse_by(runs, topic_scorer, depth, run_tag, topics=None) -> RankedRun:
    depth = check_positive_int(depth, "depth")
    out = {}
    for topic in (topics if topics is not None else _all_topics(runs)):
        scores = topic_scorer(topic)
        if scores:
            out[topic] = ranked_entry(scores, depth)
    return RankedRun(run_tag, out)


def linear_fuse(dense: RankedRun, structure: RankedRun, alpha: float,
                depth: int = DEFAULT_MAX_DEPTH, normalization: str = "minmax",
                run_tag: str = "linear", topics=None) -> RankedRun:
    """Convex combination ``alpha * dense + (1 - alpha) * structure``.

    Each source is normalized within its own topic list; a document missing
    from one source takes 0 from it.
    """
    check_run(dense, "dense")
    check_run(structure, "structure")
    alpha = check_alpha(alpha)

    def scorer(topic):
        sd = _source_scores(dense.get(topic), normalization)
        sa = _source_scores(structure.get(topic), normalization)
        return {doc: alpha * sd.get(doc, 0.0) + (1.0 - alpha) * sa.get(doc, 0.0)
                for doc in {**sd, **sa}}

    return _fuse_by([dense, structure], scorer, depth, run_tag, topics)


def rerank(base: RankedRun, scorer: RankedRun | Callable[[str, str], float | None],
           depth: int = DEFAULT_MAX_DEPTH, run_tag: str | None = None) -> RankedRun:
    """Re-score the base run's candidates; no documents are added.

    ``scorer`` is a run (its scores are looked up) or a callable
    ``f(topic, doc_id)`` returning a score or None. Uncovered documents
    score 0.
    """
    check_run(base, "base")
    if isinstance(scorer, RankedRun):
        run = scorer
        cache: dict[str, dict[str, float]] = {}

        def lookup(topic, doc_id):
            if topic not in cache:
                cache[topic] = run.scores(topic)
            return cache[topic].get(doc_id)
    else:
        lookup = scorer

    def topic_scores(topic):
        out = {}
        for d in base.get(topic):
            s = lookup(topic, d.doc_id)
            out[d.doc_id] = 0.0 if s is None else float(s)
        return out

    return _fuse_by([base], topic_scores, depth, run_tag or base.run_tag)


def rrf_fuse(runs: Sequence[RankedRun], k: int = 60, depth: int = DEFAULT_MAX_DEPTH,
             run_tag: str = "rrf") -> RankedRun:
    runs = check_runs(runs)
    k = check_positive_int(k, "k")

    def scorer(topic):
        parts: dict[str, list[float]] = {}
        for run in runs:
            for d in run.get(topic):
                parts.setdefault(d.doc_id, []).append(1.0 / (k + d.rank))
        return _sum_parts(parts)

    return _fuse_by(runs, scorer, depth, run_tag)


def borda_fuse(runs: Sequence[RankedRun], depth: int = DEFAULT_MAX_DEPTH,
               run_tag: str = "borda") -> RankedRun:
    """Each run awards ``N - rank + 1`` points, N being the topic's union pool size."""
    runs = check_runs(runs)

    def scorer(topic):
        pool = {d.doc_id for run in runs for d in run.get(topic)}
        n = len(pool)
        out = dict.fromkeys(pool, 0.0)
        for run in runs:
            for d in run.get(topic):
                out[d.doc_id] += n - d.rank + 1
        return out

    return _fuse_by(runs, scorer, depth, run_tag)


def combsum_fuse(runs: Sequence[RankedRun], depth: int = DEFAULT_MAX_DEPTH,
                 normalization: str = "minmax", run_tag: str = "combsum") -> RankedRun:
    runs = check_runs(runs)

    def scorer(topic):
        parts: dict[str, list[float]] = {}
        for run in runs:
            for doc, s in _source_scores(run.get(topic), normalization).items():
                parts.setdefault(doc, []).append(s)
        return _sum_parts(parts)

    return _fuse_by(runs, scorer, depth, run_tag)


def _isr_family(runs, weight: Callable[[int], float], depth, run_tag) -> RankedRun:
    runs = check_runs(runs)

    def scorer(topic):
        parts: dict[str, list[float]] = {}
        for run in runs:
            for d in run.get(topic):
                parts.setdefault(d.doc_id, []).append(1.0 / d.rank ** 2)
        return {doc: weight(len(p)) * math.fsum(p) for doc, p in parts.items()}

    return _fuse_by(runs, scorer, depth, run_tag)


def isr_fuse(runs: Sequence[RankedRun], depth: int = DEFAULT_MAX_DEPTH,
             run_tag: str = "isr") -> RankedRun:
    """``n(d) * sum(1 / rank^2)`` with n(d) the number of runs containing d."""
    return _isr_family(runs, float, depth, run_tag)


def log_isr_fuse(runs: Sequence[RankedRun], depth: int = DEFAULT_MAX_DEPTH,
                 run_tag: str = "logisr") -> RankedRun:
    """``log(1 + n(d)) * sum(1 / rank^2)``."""
    return _isr_family(runs, lambda n: math.log1p(n), depth, run_tag)


@dataclass(frozen=True)
class FusionSpec:
    method: str = "linear"
    alpha: float = 0.5
    rrf_k: int = 60
    normalization: str = "minmax"
    depth: int = DEFAULT_MAX_DEPTH

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown fusion method {self.method!r}; "
                             f"expected one of {METHODS}")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"unknown normalization {self.normalization!r}")
        check_alpha(self.alpha)
        check_positive_int(self.rrf_k, "rrf_k")
        check_positive_int(self.depth, "depth")


def fuse(runs: Sequence[RankedRun], spec: FusionSpec = FusionSpec(),
         run_tag: str | None = None) -> RankedRun:
    """Dispatch on ``spec.method``.

    ``linear`` expects exactly (dense, structure); ``rerank`` expects
    (base, scorer).
    """
    runs = check_runs(runs)
    tag = run_tag or spec.method
    if spec.method in ("linear", "rerank") and len(runs) != 2:
        raise ValueError(f"{spec.method} fusion takes exactly two runs, got {len(runs)}")
    if spec.method == "linear":
        return linear_fuse(runs[0], runs[1], spec.alpha, spec.depth,
                           spec.normalization, tag)
    if spec.method == "rerank":
        return rerank(runs[0], runs[1], spec.depth, tag)
    if spec.method == "rrf":
        return rrf_fuse(runs, spec.rrf_k, spec.depth, tag)
    if spec.method == "borda":
        return borda_fuse(runs, spec.depth, tag)
    if spec.method == "combsum":
        return combsum_fuse(runs, spec.depth, spec.normalization, tag)
    if spec.method == "isr":
        return isr_fuse(runs, spec.depth, tag)
    return log_isr_fuse(runs, spec.depth, tag)


class RunFusion(BaseEstimator):
    """Estimator wrapper: ``transform(runs)`` returns the fused run.

    Fusion has no learned state, so ``fit`` only validates parameters.
    """

    def __init__(self, method="linear", alpha=0.5, rrf_k=60,
                 normalization="minmax", depth=DEFAULT_MAX_DEPTH, run_tag=None):
        self.method = method
        self.alpha = alpha
        self.rrf_k = rrf_k
        self.normalization = normalization
        self.depth = depth
        self.run_tag = run_tag

    def _spec(self) -> FusionSpec:
        return FusionSpec(self.method, self.alpha, self.rrf_k,
                          self.normalization, self.depth)

    def fit(self, runs=None, y=None):
        self.spec_ = self._spec()
        return self

    def transform(self, runs) -> RankedRun:
        return fuse(runs, self._spec(), self.run_tag)

    def fit_transform(self, runs, y=None) -> RankedRun:
        return self.fit(runs, y).transform(runs)
