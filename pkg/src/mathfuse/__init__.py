"""Dense/structure rank fusion and prime-metric evaluation for math retrieval."""

from .dense import ToyEncoder, TrainingBatch, dpr_score, maxsim_score, token_sim
from .fusion import FusionSpec, RunFusion, fuse, linear_fuse, rerank, rrf_fuse
from .metrics import MetricReport, evaluate
from .runs import (JudgmentSet, RankedRun, ScoredDoc, parse_qrels, parse_run,
                   truncate_run, write_run)
from .tokenizer import MathPreTokenizer, SynonymTable, pretokenize
from .tuning import CVConfig, CVLinearFusion, tune_and_fuse

__version__ = "0.1.0"

__all__ = [
    "CVConfig", "CVLinearFusion", "FusionSpec", "JudgmentSet", "MathPreTokenizer",
    "MetricReport", "RankedRun", "RunFusion", "ScoredDoc", "SynonymTable", "ToyEncoder",
    "TrainingBatch", "dpr_score", "evaluate", "fuse", "linear_fuse", "maxsim_score",
    "parse_qrels", "parse_run", "pretokenize", "rerank", "rrf_fuse", "token_sim",
    "truncate_run", "tune_and_fuse", "write_run",
]
