import io
import sys

import pytest

from mathfuse import cli
from mathfuse.dense import ToyEncoder
from mathfuse.fusion import linear_fuse
from mathfuse.metrics import evaluate
from mathfuse.runs import parse_run, write_qrels, write_run

from conftest import random_qrels, random_run

TOPICS = [f"A.{i}" for i in range(1, 11)]
POOL = [f"d{i}" for i in range(40)]


@pytest.fixture
def files(tmp_path, rng):
    dense = random_run(rng, TOPICS, POOL, tag="dense", depth_range=(5, 30))
    struct = random_run(rng, TOPICS, POOL, tag="a0", depth_range=(5, 30))
    qrels = random_qrels(rng, TOPICS, POOL, frac=0.5)
    paths = {}
    for name, data in [("a.run", write_run(dense)), ("b.run", write_run(struct)),
                       ("qrels.txt", write_qrels(qrels))]:
        path = tmp_path / name
        path.write_bytes(data)
        paths[name] = str(path)
    paths["dir"] = tmp_path
    return paths, dense, struct, qrels


def test_fuse_linear(files):
    paths, dense, struct, _ = files
    out = str(paths["dir"] / "out.run")
    assert cli.main(["fuse", "--method", "linear", "--alpha", "0.5",
                     paths["a.run"], paths["b.run"], "-o", out]) == 0
    fused = parse_run(open(out, "rb").read())
    assert fused.topics == linear_fuse(dense, struct, 0.5).topics


@pytest.mark.parametrize("method", ["borda", "combsum", "isr", "logisr", "rrf"])
def test_fuse_methods_emit_valid_runs(files, method):
    paths = files[0]
    out = paths["dir"] / "out.run"
    assert cli.main(["fuse", "--method", method, "--depth", "10", "--run-tag", "x",
                     paths["a.run"], paths["b.run"], "-o", str(out)]) == 0
    run = parse_run(out.read_bytes(), max_depth=10)
    assert run.run_tag == "x"


def test_rerank(files):
    paths = files[0]
    out = paths["dir"] / "rr.run"
    assert cli.main(["rerank", paths["b.run"], paths["a.run"], "-o", str(out)]) == 0
    base, reranked = parse_run(open(paths["b.run"], "rb").read()), parse_run(out.read_bytes())
    for t in base.topics:
        assert {d.doc_id for d in base[t]} == {d.doc_id for d in reranked[t]}


def test_eval(files, capsys):
    paths, dense, _, qrels = files
    kv = paths["dir"] / "kv.txt"
    groups = paths["dir"] / "groups.txt"
    groups.write_text("A.1 calc\nA.2 proof\n")
    assert cli.main(["eval", "--profile", "arqmath", paths["a.run"], paths["qrels.txt"],
                     "--kv", str(kv), "--groups", str(groups)]) == 0
    out = capsys.readouterr().out
    assert "NDCG'" in out and "calc" in out and "other" in out
    report = evaluate(dense, qrels)
    line = f"ndcg_prime mean {report.means['ndcg_prime']:.6f}"
    assert line in kv.read_text().splitlines()


def test_eval_custom_threshold(files, capsys):
    paths, dense, _, qrels = files
    assert cli.main(["eval", "--threshold", "1", paths["a.run"], paths["qrels.txt"]]) == 0
    out = capsys.readouterr().out
    expected = evaluate(dense, qrels.with_threshold(1)).means["map_prime"]
    assert f"{expected:.4f}" in out.splitlines()[-1]


def test_tune(files):
    paths = files[0]
    out = paths["dir"] / "fused.run"
    report = paths["dir"] / "folds.txt"
    assert cli.main(["tune", "--folds", "5", "--grid", "0.1:0.9:0.1", paths["a.run"],
                     paths["b.run"], paths["qrels.txt"], "-o", str(out),
                     "--report", str(report)]) == 0
    parse_run(out.read_bytes())
    lines = report.read_text().splitlines()
    assert len(lines) == 5
    for i, line in enumerate(lines):
        fold, alpha, objective = line.split()
        assert int(fold) == i and 0.1 <= float(alpha) <= 0.9 and 0 <= float(objective) <= 1


def test_score(tmp_path):
    enc = ToyEncoder(dim=2).set_table({"x": [1.0, 0.0], "y": [0.0, 1.0]})
    enc.save_table(tmp_path / "t.txt")
    (tmp_path / "q.txt").write_text("Q1 x\nQ2 y\n")
    (tmp_path / "p.txt").write_text("p1 x x\np2 y\np3 x y\n")
    out = tmp_path / "s.run"
    for mode in ["dpr", "colbert"]:
        assert cli.main(["score", "--queries", str(tmp_path / "q.txt"),
                         "--passages", str(tmp_path / "p.txt"), "--table", str(tmp_path / "t.txt"),
                         "--mode", mode, "-o", str(out)]) == 0
        run = parse_run(out.read_bytes())
        # p2 shares nothing with Q1 in either mode
        assert run["Q1"][-1].doc_id == "p2"
        if mode == "dpr":
            assert run["Q1"][0].doc_id == "p1"
        assert len(run["Q1"]) == 3


def test_tokenize(monkeypatch, capsys):
    monkeypatch.setattr(sys, "stdin", io.StringIO("a $\\dfrac{1}{2}$\nplain text\n"))
    assert cli.main(["tokenize"]) == 0
    assert capsys.readouterr().out == "a <frac> <{> <1> <}> <{> <2> <}>\nplain text\n"


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["fuse", "--nope", "a", "b"])
    assert exc.value.code == 2


def test_file_errors(tmp_path, capsys):
    missing = str(tmp_path / "missing.run")
    assert cli.main(["eval", missing, missing]) == 1
    assert "missing.run" in capsys.readouterr().err
    bad = tmp_path / "bad.run"
    bad.write_text("A.1 Q0 d1 1\n")
    assert cli.main(["fuse", str(bad), str(bad)]) == 1
    assert "line 1" in capsys.readouterr().err
