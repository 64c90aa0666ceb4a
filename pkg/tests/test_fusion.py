import math

import pytest

from mathfuse.fusion import (FusionSpec, RunFusion, borda_fuse, combsum_fuse, fuse,
                             isr_fuse, linear_fuse, log_isr_fuse, minmax_normalize,
                             rerank, rrf_fuse)
from mathfuse.runs import validate_run

from conftest import make_entry, make_run, oracle_linear, random_run

POOL = [f"d{i}" for i in range(30)]
TOPICS = ["A.1", "A.2", "A.3"]


def ids(run, topic):
    return [d.doc_id for d in run[topic]]


def test_minmax():
    out = minmax_normalize(make_entry([("a", 6), ("b", 4), ("c", 2)]))
    assert [d.score for d in out] == [1.0, 0.5, 0.0]
    assert [d.score for d in minmax_normalize(make_entry([("a", 3.3), ("b", 3.3)]))] == [1.0, 1.0]
    assert minmax_normalize(make_entry([("a", -7)]))[0].score == 1.0
    assert minmax_normalize([]) == []


def test_linear_endpoints():
    dense = make_run("d", A_1=[("a", 9), ("b", 5), ("c", 1)])
    struct = make_run("s", A_1=[("c", 3), ("x", 2), ("a", 1)])
    assert ids(linear_fuse(dense, struct, 0.0), "A.1")[:3] == ["c", "x", "a"]
    top = [d for d in ids(linear_fuse(dense, struct, 1.0), "A.1") if d in {"a", "b", "c"}]
    assert top == ["a", "b", "c"]


def test_linear_missing_docs_score_zero():
    dense = make_run("d", T=[("d1", 4.0)])
    struct = make_run("s", T=[("d2", 0.5)])
    fused = linear_fuse(dense, struct, 0.3)["T"]
    assert [d.doc_id for d in fused] == ["d2", "d1"]
    assert fused[0].score == pytest.approx(0.7)
    assert fused[1].score == pytest.approx(0.3)


def test_linear_rejects_bad_alpha():
    run = make_run(T=[("a", 1)])
    with pytest.raises(ValueError):
        linear_fuse(run, run, 1.5)


def test_linear_matches_oracle(rng):
    for _ in range(50):
        dense = random_run(rng, TOPICS, POOL, tag="d")
        struct = random_run(rng, TOPICS, POOL, tag="s", distinct=False)
        alpha = rng.choice([0.1, 0.25, 0.5, 0.9])
        fused = linear_fuse(dense, struct, alpha)
        for t in TOPICS:
            assert ids(fused, t) == oracle_linear(dense.get(t), struct.get(t), alpha)


def test_depth_cut():
    dense = make_run("d", T=[(f"a{i}", 100 - i) for i in range(10)])
    struct = make_run("s", T=[(f"b{i}", 100 - i) for i in range(10)])
    assert len(linear_fuse(dense, struct, 0.5, depth=4)["T"]) == 4
    assert len(rrf_fuse([dense, struct], depth=7)["T"]) == 7


def test_rerank():
    base = make_run("b", T=[("d1", 2.0), ("d2", 1.0)])
    assert rerank(base, base) == base
    scorer = make_run("s", T=[("d2", 5.0), ("d1", 1.0), ("extra", 0.5)])
    out = rerank(base, scorer)
    assert ids(out, "T") == ["d2", "d1"]
    empty = make_run("s", U=[("z", 1.0)])
    out = rerank(make_run("b", T=[("d2", 2.0), ("d1", 1.0)]), empty)
    assert ids(out, "T") == ["d1", "d2"]
    assert [d.score for d in out["T"]] == [0.0, 0.0]
    assert ids(rerank(base, lambda t, d: {"d1": 0.1}.get(d)), "T") == ["d1", "d2"]


def test_rrf():
    a = make_run("a", T=[("x", 9), ("y", 8)])
    b = make_run("b", T=[("y", 9), ("x", 8), ("z", 1)])
    fused = rrf_fuse([a, b], k=60)["T"]
    scores = {d.doc_id: d.score for d in fused}
    assert scores["x"] == pytest.approx(1 / 61 + 1 / 62, abs=1e-15)
    assert scores["x"] == pytest.approx(0.0325225, abs=1e-7)
    assert scores["z"] == 1 / 63
    assert [d.doc_id for d in fused] == ["x", "y", "z"]  # tie x/y broken by id
    only = rrf_fuse([make_run("a", T=[("q", 1)]), make_run("b", U=[("r", 1)])])
    assert only["T"][0].score == 1 / 61


def test_borda():
    single = make_run("a", T=[("x", 1)])
    assert borda_fuse([single, single])["T"][0].score == 2
    a = make_run("a", T=[("p", 2), ("q", 1)])
    b = make_run("b", T=[("p", 2), ("q", 1)])
    assert ids(borda_fuse([a, b]), "T") == ["p", "q"]
    c = make_run("c", T=[("p", 3), ("q", 2), ("r", 1)])
    # pool N = 3: p gets 3 + 3, q gets 2 + 2, r gets 1 from c only
    assert [d.score for d in borda_fuse([a, c])["T"]] == [6, 4, 1]


def test_combsum():
    a = make_run("a", T=[("x", 10), ("y", 5), ("z", 0)])
    b = make_run("b", T=[("x", 2), ("w", 1)])
    fused = combsum_fuse([a, b])["T"]
    assert fused[0].doc_id == "x" and fused[0].score == 2.0


def test_combsum_matches_oracle_and_linear_half(rng):
    for _ in range(50):
        a = random_run(rng, TOPICS, POOL, tag="a")
        b = random_run(rng, TOPICS, POOL, tag="b")
        fused = combsum_fuse([a, b])
        half = linear_fuse(a, b, 0.5)
        for t in TOPICS:
            expected = {}
            for entry in (a[t], b[t]):
                vals = [d.score for d in entry]
                lo, hi = min(vals), max(vals)
                for d in entry:
                    expected[d.doc_id] = expected.get(d.doc_id, 0.0) + (
                        (d.score - lo) / (hi - lo) if hi > lo else 1.0)
            for d in fused[t]:
                assert d.score == pytest.approx(expected[d.doc_id], abs=1e-12)
            assert ids(fused, t) == ids(half, t)


def test_isr_and_logisr():
    a = make_run("a", T=[("x", 2), ("y", 1)])
    b = make_run("b", T=[("x", 2)])
    isr = {d.doc_id: d.score for d in isr_fuse([a, b])["T"]}
    assert isr == {"x": 4.0, "y": 0.25}
    log_isr = {d.doc_id: d.score for d in log_isr_fuse([a, b])["T"]}
    assert log_isr["x"] == pytest.approx(math.log(3) * 2)
    assert log_isr["y"] == pytest.approx(math.log(2) * 0.25)
    assert "z" not in log_isr


@pytest.mark.parametrize("method", [rrf_fuse, borda_fuse, combsum_fuse, isr_fuse, log_isr_fuse])
def test_symmetric_methods(method, rng):
    for _ in range(20):
        a = random_run(rng, TOPICS, POOL, tag="a")
        b = random_run(rng, TOPICS, POOL, tag="b")
        c = random_run(rng, TOPICS[:2], POOL, tag="c")
        assert method([a, b, c]) == method([c, a, b])


@pytest.mark.parametrize("method", ["linear", "borda", "combsum", "isr", "logisr", "rrf", "rerank"])
def test_outputs_are_valid_runs(method, rng):
    for _ in range(10):
        a = random_run(rng, TOPICS, POOL, tag="a", depth_range=(1, 30))
        b = random_run(rng, TOPICS, POOL, tag="b", distinct=False, depth_range=(1, 30))
        out = fuse([a, b], FusionSpec(method=method, depth=12))
        validate_run(out, max_depth=12)
        retrieved = {d.doc_id for r in (a, b) for t in r.topics for d in r[t]}
        assert all(d.doc_id in retrieved for t in out.topics for d in out[t])


def test_spec_validation():
    with pytest.raises(ValueError):
        FusionSpec(method="combmnz")
    with pytest.raises(ValueError):
        FusionSpec(alpha=-0.1)
    with pytest.raises(ValueError):
        FusionSpec(rrf_k=0)
    with pytest.raises(ValueError):
        fuse([make_run(T=[("a", 1)])], FusionSpec())


def test_estimator():
    a = make_run("a", T=[("x", 2), ("y", 1)])
    b = make_run("b", T=[("y", 2), ("x", 1)])
    est = RunFusion(method="rrf", rrf_k=10)
    assert est.get_params()["rrf_k"] == 10
    assert est.fit_transform([a, b]) == rrf_fuse([a, b], k=10, run_tag="rrf")
    est.set_params(method="linear", alpha=1.0)
    assert ids(est.transform([a, b]), "T") == ["x", "y"]
