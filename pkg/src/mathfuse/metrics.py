"""Prime-variant evaluation: NDCG', MAP', P'@k, BPref and Judged per mille.

Prime metrics drop unjudged documents from each ranked list before
scoring. Topics present in the judgments but missing from the run score 0
and count toward the means.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .runs import DEFAULT_MAX_DEPTH, JudgmentSet, RankedRun, ScoredDoc

METRIC_NAMES = ("ndcg_prime", "map_prime", "p10_prime", "bpref")
DISPLAY_NAMES = {
    "ndcg_prime": "NDCG'",
    "map_prime": "MAP'",
    "p10_prime": "P'@10",
    "bpref": "BPref",
}
ALIASES = {
    "ndcg": "ndcg_prime", "ndcg'": "ndcg_prime",
    "map": "map_prime", "map'": "map_prime",
    "p10": "p10_prime", "p@10": "p10_prime", "p'@10": "p10_prime",
}


def metric_name(name: str) -> str:
    key = ALIASES.get(name.lower(), name.lower())
    if key not in METRIC_NAMES:
        raise ValueError(f"unknown metric {name!r}; expected one of {METRIC_NAMES}")
    return key


def prime_filter(entry: Sequence[ScoredDoc], judgments: JudgmentSet,
                 topic: str) -> list[ScoredDoc]:
    judged = judgments.for_topic(topic)
    kept = [d for d in entry if d.doc_id in judged]
    return [ScoredDoc(d.doc_id, rank, d.score) for rank, d in enumerate(kept, start=1)]


# -- per-topic kernels ------------------------------------------------------

def _ndcg(doc_ids: Sequence[str], grades: Mapping[str, int]) -> float:
    ideal = sorted((g for g in grades.values() if g > 0), reverse=True)
    idcg = sum(g / math.log2(r + 1) for r, g in enumerate(ideal, start=1))
    if idcg == 0:
        return 0.0
    dcg = sum(grades.get(d, 0) / math.log2(r + 1)
              for r, d in enumerate(doc_ids, start=1))
    return dcg / idcg


def _ap(doc_ids: Sequence[str], grades: Mapping[str, int], threshold: int) -> float:
    n_rel = sum(1 for g in grades.values() if g >= threshold)
    if n_rel == 0:
        return 0.0
    hits = 0
    total = 0.0
    for r, d in enumerate(doc_ids, start=1):
        if grades.get(d, -1) >= threshold:
            hits += 1
            total += hits / r
    return total / n_rel


def _precision(doc_ids: Sequence[str], grades: Mapping[str, int], threshold: int,
               k: int) -> float:
    return sum(1 for d in doc_ids[:k] if grades.get(d, -1) >= threshold) / k


def _bpref(doc_ids: Sequence[str], grades: Mapping[str, int], threshold: int) -> float:
    n_rel = sum(1 for g in grades.values() if g >= threshold)
    n_nonrel = len(grades) - n_rel
    if n_rel == 0 or n_nonrel == 0:
        return 0.0
    denom = min(n_rel, n_nonrel)
    nonrel_above = 0
    total = 0.0
    for d in doc_ids:
        g = grades.get(d)
        if g is None:
            continue
        if g >= threshold:
            if nonrel_above:
                total += 1.0 - min(nonrel_above, n_rel) / denom
            else:
                total += 1.0
        else:
            nonrel_above += 1
    return total / n_rel


def _judged_ids(entry, grades) -> list[str]:
    return [d.doc_id for d in entry if d.doc_id in grades]


def _topics(run: RankedRun, judgments: JudgmentSet) -> list[str]:
    return sorted(set(run.topics) | set(judgments.topic_ids()))


def _per_topic(run, judgments, kernel) -> dict[str, float]:
    out = {}
    for topic in _topics(run, judgments):
        grades = judgments.for_topic(topic)
        out[topic] = kernel(_judged_ids(run.get(topic), grades), grades)
    return out


def ndcg_prime(run: RankedRun, judgments: JudgmentSet) -> dict[str, float]:
    """Per-topic NDCG' with linear gain and log2(rank + 1) discount."""
    return _per_topic(run, judgments, _ndcg)


def map_prime(run: RankedRun, judgments: JudgmentSet) -> dict[str, float]:
    t = judgments.binary_threshold
    return _per_topic(run, judgments, lambda ids, g: _ap(ids, g, t))


def p_at_k_prime(run: RankedRun, judgments: JudgmentSet, k: int = 10) -> dict[str, float]:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    t = judgments.binary_threshold
    return _per_topic(run, judgments, lambda ids, g: _precision(ids, g, t, k))


def bpref(run: RankedRun, judgments: JudgmentSet) -> dict[str, float]:
    """trec_eval bpref, except that topics with no judged non-relevant
    document score 0. Unjudged documents never count, so the judged-only
    subsequence gives the same value as the full list."""
    t = judgments.binary_threshold
    return _per_topic(run, judgments, lambda ids, g: _bpref(ids, g, t))


def judged_per_mille(run: RankedRun, judgments: JudgmentSet,
                     depth: int = DEFAULT_MAX_DEPTH) -> float:
    """1000 x judged fraction of the top ``depth`` documents, averaged over
    topics with at least one retrieved document."""
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    rates = []
    for topic, entry in run.topics.items():
        entry = entry[:depth]
        if not entry:
            continue
        grades = judgments.for_topic(topic)
        rates.append(1000.0 * len(_judged_ids(entry, grades)) / len(entry))
    return sum(rates) / len(rates) if rates else 0.0


_KERNELS: dict[str, Callable] = {
    "ndcg_prime": lambda ids, g, t, k: _ndcg(ids, g),
    "map_prime": lambda ids, g, t, k: _ap(ids, g, t),
    "p10_prime": lambda ids, g, t, k: _precision(ids, g, t, k),
    "bpref": lambda ids, g, t, k: _bpref(ids, g, t),
}


@dataclass
class MetricReport:
    per_topic: dict[str, dict[str, float]]
    means: dict[str, float]
    judged_per_mille: float
    unjudged_topics: list[str] = field(default_factory=list)

    def value(self, metric: str, topic: str | None = None) -> float:
        key = metric_name(metric)
        return self.means[key] if topic is None else self.per_topic[topic][key]

    def format_table(self) -> str:
        names = list(self.means)
        headers = ["topic"] + [DISPLAY_NAMES.get(n, n) for n in names]
        rows = [[t] + [f"{v[n]:.4f}" for n in names] for t, v in self.per_topic.items()]
        rows.append(["mean"] + [f"{self.means[n]:.4f}" for n in names])
        headers.append("Judged‰")
        for row in rows[:-1]:
            row.append("")
        rows[-1].append(f"{self.judged_per_mille:.1f}")
        return format_columns(headers, rows)

    def key_values(self) -> str:
        lines = []
        for topic, values in self.per_topic.items():
            for n, v in values.items():
                lines.append(f"{n} {topic} {v:.6f}")
        for n, v in self.means.items():
            lines.append(f"{n} mean {v:.6f}")
        lines.append(f"judged_per_mille mean {self.judged_per_mille:.6f}")
        return "\n".join(lines) + "\n"


def format_columns(headers: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    rows = [list(headers)] + [list(r) for r in rows]
    widths = [max(len(r[i]) for r in rows) for i in range(len(headers))]
    return "\n".join("  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                               for i, (c, w) in enumerate(zip(r, widths))).rstrip()
                     for r in rows) + "\n"


def evaluate(run: RankedRun, judgments: JudgmentSet,
             metrics: Sequence[str] = METRIC_NAMES, depth: int = DEFAULT_MAX_DEPTH,
             k: int = 10, n_jobs: int = 1) -> MetricReport:
    """Evaluate ``run`` at ``depth``; results do not depend on ``n_jobs``."""
    metrics = [metric_name(m) for m in metrics]
    t = judgments.binary_threshold
    topics = _topics(run, judgments)

    def one(topic):
        grades = judgments.for_topic(topic)
        ids = _judged_ids(run.get(topic)[:depth], grades)
        return {m: _KERNELS[m](ids, grades, t, k) for m in metrics}

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            values = list(pool.map(one, topics))
    else:
        values = [one(topic) for topic in topics]
    per_topic = dict(zip(topics, values))
    means = {m: (sum(v[m] for v in values) / len(values) if values else 0.0)
             for m in metrics}
    unjudged = [topic for topic in run.topics if not judgments.for_topic(topic)]
    return MetricReport(per_topic, means, judged_per_mille(run, judgments, depth),
                        sorted(unjudged))


def aggregate_by_group(report: MetricReport, groups: Mapping[str, str],
                       default_group: str = "other") -> dict[str, dict[str, float]]:
    """Mean per-topic metric values within each group label."""
    buckets: dict[str, list[dict[str, float]]] = {}
    for topic, values in report.per_topic.items():
        buckets.setdefault(groups.get(topic, default_group), []).append(values)
    return {g: {m: sum(v[m] for v in vs) / len(vs) for m in vs[0]}
            for g, vs in sorted(buckets.items())}


def parse_groups(data: bytes | str) -> dict[str, str]:
    """``topic_id group`` per line."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    groups = {}
    for line_no, line in enumerate(data.splitlines(), start=1):
        cols = line.split()
        if not cols:
            continue
        if len(cols) != 2:
            raise ValueError(f"groups line {line_no}: expected 'topic group'")
        groups[cols[0]] = cols[1]
    return groups
