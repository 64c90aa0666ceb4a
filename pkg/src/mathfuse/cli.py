"""Command-line entry point: ``mathfuse <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import fusion, metrics, tuning
from .dense import METRICS, MODES, ToyEncoder
from .runs import (DEFAULT_MAX_DEPTH, PROFILES, RankedRun, parse_qrels, parse_run,
                   write_run)
from .tokenizer import SynonymTable, pretokenize, render

log = logging.getLogger("mathfuse")


class CLIError(Exception):
    pass


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CLIError(f"{path}: {exc.strerror or exc}") from None


def _write(path: str | None, data: bytes) -> None:
    if path is None or path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        return
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise CLIError(f"{path}: {exc.strerror or exc}") from None


def _load_run(path: str, max_depth: int) -> RankedRun:
    try:
        return parse_run(_read(path), max_depth=max_depth)
    except ValueError as exc:
        raise CLIError(f"{path}: {exc}") from None


def _load_qrels(path: str, threshold: int):
    try:
        return parse_qrels(_read(path), threshold)
    except ValueError as exc:
        raise CLIError(f"{path}: {exc}") from None


def _threshold(args) -> int:
    if args.threshold is not None:
        return args.threshold
    return PROFILES[args.profile]


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _read_tokenized(path: str) -> list[tuple[str, list[str]]]:
    """``id tok tok ...`` per line."""
    rows = []
    seen = set()
    for line_no, line in enumerate(_read(path).decode("utf-8").splitlines(), start=1):
        cols = line.split()
        if not cols:
            continue
        if len(cols) < 2:
            raise CLIError(f"{path}: line {line_no}: expected an id followed by tokens")
        if cols[0] in seen:
            raise CLIError(f"{path}: line {line_no}: duplicate id {cols[0]}")
        seen.add(cols[0])
        rows.append((cols[0], cols[1:]))
    return rows


# -- subcommands ------------------------------------------------------------

def cmd_tokenize(args) -> None:
    table = SynonymTable.load(args.synonyms) if args.synonyms else None
    out = sys.stdout
    for line in sys.stdin:
        out.write(render(pretokenize(line.rstrip("\n"), table, args.display_math)) + "\n")


def cmd_score(args) -> None:
    try:
        encoder = ToyEncoder.from_table_file(args.table, mode=args.mode,
                                             metric=args.metric)
    except OSError as exc:
        raise CLIError(f"{args.table}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise CLIError(f"{args.table}: {exc}") from None
    queries = _read_tokenized(args.queries)
    passages = _read_tokenized(args.passages)
    topics = {qid: encoder.score_collection(tokens, passages, depth=args.depth)
              for qid, tokens in queries}
    run = RankedRun(args.run_tag or args.mode, {t: e for t, e in topics.items() if e})
    _write(args.output, write_run(run))


def cmd_fuse(args) -> None:
    runs = [_load_run(p, args.max_depth) for p in args.runs]
    spec = fusion.FusionSpec(args.method, args.alpha, args.k, args.normalization,
                             args.depth)
    fused = fusion.fuse(runs, spec, args.run_tag)
    _write(args.output, write_run(fused))


def cmd_rerank(args) -> None:
    base = _load_run(args.base, args.max_depth)
    scorer = _load_run(args.scorer, args.max_depth)
    out = fusion.rerank(base, scorer, args.depth, args.run_tag or "rerank")
    _write(args.output, write_run(out))


def cmd_tune(args) -> None:
    dense = _load_run(args.dense, args.max_depth)
    structure = _load_run(args.structure, args.max_depth)
    qrels = _load_qrels(args.qrels, _threshold(args))
    cfg = tuning.CVConfig(args.folds, tuning.parse_grid(args.grid), args.objective,
                          args.depth, args.normalization)
    result = tuning.tune_and_fuse(dense, structure, qrels, cfg, args.run_tag)
    _write(args.output, write_run(result.fused_run))
    report = tuning.format_fold_report(result)
    if args.report:
        _write(args.report, report.encode("utf-8"))
    else:
        sys.stderr.write(report)
    log.info("held-out %s: concatenated %.4f, fold mean %.4f", cfg.objective,
             result.summary["concatenated"], result.summary["fold_mean"])


def cmd_eval(args) -> None:
    run = _load_run(args.run, args.max_depth)
    qrels = _load_qrels(args.qrels, _threshold(args))
    report = metrics.evaluate(run, qrels, depth=args.depth, n_jobs=args.threads)
    sys.stdout.write(report.format_table())
    if report.unjudged_topics:
        log.warning("topics without judgments: %s", " ".join(report.unjudged_topics))
    if args.groups:
        groups = metrics.parse_groups(_read(args.groups))
        by_group = metrics.aggregate_by_group(report, groups)
        names = list(report.means)
        sys.stdout.write("\n" + metrics.format_columns(
            ["group"] + [metrics.DISPLAY_NAMES[n] for n in names],
            [[g] + [f"{v[n]:.4f}" for n in names] for g, v in by_group.items()]))
    if args.kv:
        _write(args.kv, report.key_values().encode("utf-8"))


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("--threads", type=_positive, default=os.cpu_count() or 1,
                        help="cap on per-topic parallelism")

    parser = argparse.ArgumentParser(prog="mathfuse",
                                     description="Math-aware run fusion and evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_depth(p):
        p.add_argument("--depth", type=_positive, default=DEFAULT_MAX_DEPTH,
                       help="output cut per topic (default 1000)")
        p.add_argument("--max-depth", type=_positive, default=DEFAULT_MAX_DEPTH,
                       help="maximum list length accepted in input runs")

    def with_profile(p):
        p.add_argument("--profile", choices=sorted(PROFILES), default="arqmath")
        p.add_argument("--threshold", type=_positive, default=None,
                       help="custom binary relevance threshold (overrides --profile)")

    p = sub.add_parser("tokenize", parents=[common],
                       help="pre-tokenize text+LaTeX from stdin, one document per line")
    p.add_argument("--synonyms", help="synonym table file")
    p.add_argument("--display-math", action="store_true",
                   help="also recognize $$...$$ and \\[...\\]")
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("score", parents=[common], help="exhaustively score passages")
    p.add_argument("--queries", required=True, help="'topic tok tok ...' per line")
    p.add_argument("--passages", required=True, help="'doc_id tok tok ...' per line")
    p.add_argument("--table", required=True, help="embedding table file")
    p.add_argument("--mode", choices=MODES, default="dpr")
    p.add_argument("--metric", choices=METRICS, default="dot")
    p.add_argument("--depth", type=_positive, default=DEFAULT_MAX_DEPTH)
    p.add_argument("--run-tag")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("fuse", parents=[common], help="fuse two or more runs")
    p.add_argument("runs", nargs="+")
    p.add_argument("--method", choices=fusion.METHODS, default="linear")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--k", type=_positive, default=60, help="RRF constant")
    p.add_argument("--normalization", choices=fusion.NORMALIZATIONS, default="minmax")
    with_depth(p)
    p.add_argument("--run-tag")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("rerank", parents=[common],
                       help="re-score a base run's candidates with another run's scores")
    p.add_argument("base")
    p.add_argument("scorer")
    with_depth(p)
    p.add_argument("--run-tag")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_rerank)

    p = sub.add_parser("tune", parents=[common],
                       help="cross-validate the linear fusion weight")
    p.add_argument("dense")
    p.add_argument("structure")
    p.add_argument("qrels")
    p.add_argument("--folds", type=_positive, default=5)
    p.add_argument("--grid", default="0.1:0.9:0.1")
    p.add_argument("--objective", default="ndcg_prime")
    p.add_argument("--normalization", choices=fusion.NORMALIZATIONS, default="minmax")
    with_profile(p)
    with_depth(p)
    p.add_argument("--run-tag", default="linear-cv")
    p.add_argument("-o", "--output")
    p.add_argument("--report", help="write 'fold alpha objective' lines here "
                                    "instead of stderr")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("eval", parents=[common], help="prime-variant evaluation")
    p.add_argument("run")
    p.add_argument("qrels")
    with_profile(p)
    with_depth(p)
    p.add_argument("--groups", help="'topic_id group' per line")
    p.add_argument("--kv", help="write 'metric topic value' lines here")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        args.func(args)
    except CLIError as exc:
        print(f"mathfuse {args.command}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"mathfuse {args.command}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"mathfuse {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
