import math
import random

import pytest

from mathfuse.runs import JudgmentSet, RankedRun, ScoredDoc


def make_entry(pairs):
    """[(doc_id, score), ...] in rank order -> tuple of ScoredDoc."""
    return tuple(ScoredDoc(d, r, float(s)) for r, (d, s) in enumerate(pairs, start=1))


def make_run(tag="run", **topics):
    return RankedRun(tag, {t.replace("_", "."): make_entry(p) for t, p in topics.items()})


def random_run(rng: random.Random, topics, pool, depth_range=(1, 15), tag="r",
               distinct=True):
    out = {}
    for t in topics:
        n = rng.randint(*depth_range)
        docs = rng.sample(pool, min(n, len(pool)))
        if distinct:
            scores = sorted(rng.sample(range(1, 10_000), len(docs)), reverse=True)
            scores = [s / 100.0 for s in scores]
        else:
            scores = sorted((rng.randint(0, 3) for _ in docs), reverse=True)
        out[t] = make_entry(zip(docs, scores))
    return RankedRun(tag, out)


def random_qrels(rng: random.Random, topics, pool, frac=0.5, threshold=2):
    grades = {}
    for t in topics:
        for d in pool:
            if rng.random() < frac:
                grades[(t, d)] = rng.randint(0, 3)
    return JudgmentSet(grades, threshold)


# -- independent oracles -----------------------------------------------------

def oracle_ndcg(ranked_ids, grades):
    """Straight from the definition: judged-only list, linear gain, log2 discount."""
    judged = [d for d in ranked_ids if d in grades]
    dcg = 0.0
    for i in range(len(judged)):
        dcg += grades[judged[i]] / math.log2(i + 2)
    ideal = sorted([g for g in grades.values() if g > 0], reverse=True)
    idcg = 0.0
    for i in range(len(ideal)):
        idcg += ideal[i] / math.log2(i + 2)
    return dcg / idcg if idcg > 0 else 0.0


def oracle_linear(dense_entry, struct_entry, alpha):
    """Hand-rolled min-max + convex combination; returns ordered doc ids."""
    def norm(entry):
        if not entry:
            return {}
        vals = [d.score for d in entry]
        lo, hi = min(vals), max(vals)
        return {d.doc_id: ((d.score - lo) / (hi - lo) if hi > lo else 1.0) for d in entry}

    a, b = norm(dense_entry), norm(struct_entry)
    docs = set(a) | set(b)
    fused = [(alpha * a.get(d, 0.0) + (1 - alpha) * b.get(d, 0.0), d) for d in docs]
    fused.sort(key=lambda x: (-x[0], x[1]))
    return [d for _, d in fused]


@pytest.fixture
def rng():
    return random.Random(20221016)


# -- acceptance reporting ------------------------------------------------------

_criteria = {}   # nodeid -> (number, label)
_outcomes = {}   # number -> "PASS" / "FAIL"


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, label): acceptance criterion")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark is not None:
            _criteria[item.nodeid] = mark.args


def pytest_runtest_logreport(report):
    if report.nodeid not in _criteria:
        return
    number = _criteria[report.nodeid][0]
    if report.failed:
        _outcomes[number] = "FAIL"
    elif report.when == "call" and report.passed:
        _outcomes.setdefault(number, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, label in sorted(set(_criteria.values())):
        outcome = _outcomes.get(number, "FAIL")
        terminalreporter.write_line(f"criterion {number}: {outcome}  {label}")
