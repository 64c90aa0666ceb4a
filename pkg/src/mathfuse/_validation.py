"""Argument checks shared by the estimators and functional APIs."""

from __future__ import annotations

from typing import Sequence

from .runs import RankedRun


def check_run(run, name: str = "run") -> RankedRun:
    if not isinstance(run, RankedRun):
        raise TypeError(f"{name} must be a RankedRun, got {type(run).__name__}")
    return run


def check_runs(runs, min_runs: int = 2) -> list[RankedRun]:
    if isinstance(runs, RankedRun):
        runs = [runs]
    runs = [check_run(r, f"runs[{i}]") for i, r in enumerate(runs)]
    if len(runs) < min_runs:
        raise ValueError(f"need at least {min_runs} runs, got {len(runs)}")
    return runs


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return alpha


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or int(value) != value or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_grid(grid: Sequence[float]) -> tuple[float, ...]:
    grid = tuple(float(a) for a in grid)
    if not grid:
        raise ValueError("grid must not be empty")
    for a in grid:
        check_alpha(a)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"grid must be strictly increasing, got {grid}")
    return grid
