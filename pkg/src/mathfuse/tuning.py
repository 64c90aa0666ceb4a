"""Cross-validated choice of the linear fusion weight."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_grid, check_positive_int, check_run
from .fusion import linear_fuse
from .metrics import evaluate, metric_name
from .runs import DEFAULT_MAX_DEPTH, JudgmentSet, RankedRun

DEFAULT_GRID = tuple(round(0.1 * i, 10) for i in range(1, 10))
# Objective differences below this are treated as ties (smallest alpha wins).
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class CVConfig:
    folds: int = 5
    grid: tuple[float, ...] = DEFAULT_GRID
    objective: str = "ndcg_prime"
    depth: int = DEFAULT_MAX_DEPTH
    normalization: str = "minmax"

    def __post_init__(self):
        if check_positive_int(self.folds, "folds") < 2:
            raise ValueError(f"folds must be >= 2, got {self.folds}")
        object.__setattr__(self, "grid", check_grid(self.grid))
        object.__setattr__(self, "objective", metric_name(self.objective))
        check_positive_int(self.depth, "depth")


@dataclass
class FoldResult:
    fold: int
    alpha: float
    train_objective: float
    heldout_topics: list[str]
    heldout_metrics: dict[str, float]

    @property
    def heldout_objective(self) -> float:
        vals = list(self.heldout_metrics.values())
        return sum(vals) / len(vals) if vals else 0.0


@dataclass
class CVResult:
    per_fold: list[FoldResult]
    fused_run: RankedRun
    summary: dict[str, float] = field(default_factory=dict)


def parse_grid(text: str) -> tuple[float, ...]:
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("grid step must be positive")
        n = int(round((stop - start) / step)) + 1
        return check_grid(round(start + i * step, 10) for i in range(n))
    return check_grid(float(p) for p in text.split(",") if p.strip())


def assign_folds(topic_ids: Sequence[str], folds: int) -> dict[str, int]:
    """Sort topics and deal them round-robin into ``folds`` folds."""
    topics = sorted(set(topic_ids))
    if len(topics) < folds:
        raise ValueError(f"need at least {folds} topics for {folds} folds, "
                         f"got {len(topics)}")
    return {t: i % folds for i, t in enumerate(topics)}


def _objective(run, judgments, topics, cfg) -> dict[str, float]:
    report = evaluate(run, judgments.restrict(topics), [cfg.objective], cfg.depth)
    return {t: report.per_topic[t][cfg.objective] for t in topics}


def grid_scores(dense, structure, judgments, topics, cfg: CVConfig) -> dict[float, float]:
    """Mean objective over ``topics`` for every alpha in the grid.

    Only the judgments of ``topics`` are read.
    """
    out = {}
    for alpha in cfg.grid:
        fused = linear_fuse(dense, structure, alpha, cfg.depth, cfg.normalization,
                            topics=topics)
        values = _objective(fused, judgments, topics, cfg)
        out[alpha] = sum(values.values()) / len(values)
    return out


def best_alpha(scores: dict[float, float]) -> float:
    best = None
    for alpha in sorted(scores):
        if best is None or scores[alpha] > scores[best] + TIE_TOLERANCE:
            best = alpha
    return best


def evaluated_topics(dense, structure, judgments) -> list[str]:
    """Judged topics retrieved by at least one of the two runs."""
    present = set(dense.topics) | set(structure.topics)
    return sorted(t for t in judgments.topic_ids() if t in present)


def tune_and_fuse(dense: RankedRun, structure: RankedRun, judgments: JudgmentSet,
                  cv: CVConfig = CVConfig(), run_tag: str = "linear-cv") -> CVResult:
    """Per fold, pick alpha on the other folds and fuse the held-out topics."""
    check_run(dense, "dense")
    check_run(structure, "structure")
    topics = evaluated_topics(dense, structure, judgments)
    fold_of = assign_folds(topics, cv.folds)

    per_fold = []
    fused_topics = {}
    for fold in range(cv.folds):
        heldout = [t for t in topics if fold_of[t] == fold]
        train = [t for t in topics if fold_of[t] != fold]
        scores = grid_scores(dense, structure, judgments, train, cv)
        alpha = best_alpha(scores)
        fused = linear_fuse(dense, structure, alpha, cv.depth, cv.normalization,
                            topics=heldout)
        fused_topics.update(fused.topics)
        per_fold.append(FoldResult(fold, alpha, scores[alpha], heldout,
                                   _objective(fused, judgments, heldout, cv)))

    fused_run = RankedRun(run_tag, {t: fused_topics[t] for t in topics if t in fused_topics})
    concatenated = _objective(fused_run, judgments, topics, cv)
    summary = {
        "concatenated": sum(concatenated.values()) / len(concatenated),
        "fold_mean": sum(f.heldout_objective for f in per_fold) / len(per_fold),
    }
    return CVResult(per_fold, fused_run, summary)


def format_fold_report(result: CVResult) -> str:
    lines = [f"{f.fold} {f.alpha:g} {f.heldout_objective:.6f}" for f in result.per_fold]
    return "\n".join(lines) + "\n"


class CVLinearFusion(BaseEstimator):
    """Linear fusion whose weight is chosen by k-fold cross validation.

    ``X`` is the pair ``(dense, structure)`` and ``y`` the judgments.
    After ``fit``, ``transform`` fuses each topic with the alpha chosen
    without its fold; topics not seen during ``fit`` use ``alpha_``, the
    best weight over all fitted topics.
    """

    def __init__(self, folds=5, grid=DEFAULT_GRID, objective="ndcg_prime",
                 depth=DEFAULT_MAX_DEPTH, normalization="minmax"):
        self.folds = folds
        self.grid = grid
        self.objective = objective
        self.depth = depth
        self.normalization = normalization

    def _config(self) -> CVConfig:
        return CVConfig(self.folds, tuple(self.grid), self.objective, self.depth,
                        self.normalization)

    def fit(self, X, y: JudgmentSet):
        dense, structure = X
        cfg = self._config()
        self.cv_result_ = tune_and_fuse(dense, structure, y, cfg)
        self.topic_alpha_ = {t: f.alpha for f in self.cv_result_.per_fold
                             for t in f.heldout_topics}
        topics = evaluated_topics(dense, structure, y)
        self.alpha_ = best_alpha(grid_scores(dense, structure, y, topics, cfg))
        return self

    def transform(self, X) -> RankedRun:
        check_is_fitted(self, "topic_alpha_")
        dense, structure = X
        cfg = self._config()
        out = {}
        for topic in dict.fromkeys([*dense.topics, *structure.topics]):
            alpha = self.topic_alpha_.get(topic, self.alpha_)
            fused = linear_fuse(dense, structure, alpha, cfg.depth,
                                cfg.normalization, topics=[topic])
            out.update(fused.topics)
        return RankedRun("linear-cv", out)

    def fit_transform(self, X, y: JudgmentSet) -> RankedRun:
        return self.fit(X, y).cv_result_.fused_run
