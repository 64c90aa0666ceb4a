"""Bi-encoder scoring and a small trainable encoder.

Scoring covers single-vector dot products (DPR style) and late-interaction
MaxSim (ColBERT style). The encoder is a lookup table of token vectors with
mean pooling or per-token passthrough; it is trained with the in-batch
negative softmax loss, whose gradient is computed analytically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from os import PathLike
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .runs import ScoredDoc, ranked_entry

UNK = "[UNK]"
QUERY_MARKER = "[Q]"
DOC_MARKER = "[D]"

METRICS = ("dot", "neg_l2_normalized")
MODES = ("dpr", "colbert")


def _as_vector(x) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"expected a non-empty 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite components")
    return v


def _as_rows(x) -> np.ndarray:
    m = np.asarray(x, dtype=float)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise ValueError(f"expected a non-empty 2-d token matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("token embeddings have non-finite components")
    return m


def dpr_score(q, p) -> float:
    q, p = _as_vector(q), _as_vector(p)
    if q.shape != p.shape:
        raise ValueError(f"dimension mismatch: {q.size} vs {p.size}")
    return float(q @ p)


def token_sim(qi, dj, metric: str = "dot") -> float:
    qi, dj = _as_vector(qi), _as_vector(dj)
    if qi.shape != dj.shape:
        raise ValueError(f"dimension mismatch: {qi.size} vs {dj.size}")
    if metric == "dot":
        return float(qi @ dj)
    if metric == "neg_l2_normalized":
        nq, nd = np.linalg.norm(qi), np.linalg.norm(dj)
        if nq == 0 or nd == 0:
            raise ValueError("zero vector cannot be normalized")
        return -float(np.linalg.norm(qi / nq - dj / nd))
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


def similarity_matrix(q, p, metric: str = "dot") -> np.ndarray:
    q, p = _as_rows(q), _as_rows(p)
    if q.shape[1] != p.shape[1]:
        raise ValueError(f"dimension mismatch: {q.shape[1]} vs {p.shape[1]}")
    if metric == "dot":
        # Accumulate left to right over the embedding dimension so every
        # entry is bitwise equal to a sequential per-pair sum (BLAS is not).
        sims = np.zeros((q.shape[0], p.shape[0]))
        for k in range(q.shape[1]):
            sims += q[:, k, None] * p[None, :, k]
        return sims
    if metric == "neg_l2_normalized":
        nq = np.linalg.norm(q, axis=1, keepdims=True)
        nd = np.linalg.norm(p, axis=1, keepdims=True)
        if np.any(nq == 0) or np.any(nd == 0):
            raise ValueError("zero vector cannot be normalized")
        diff = (q / nq)[:, None, :] - (p / nd)[None, :, :]
        return -np.sqrt(np.sum(diff * diff, axis=2))
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


def maxsim_score(q, p, metric: str = "dot") -> float:
    """Sum over query tokens of the best-matching passage token similarity."""
    sims = similarity_matrix(q, p, metric)
    total = 0.0
    for best in np.max(sims, axis=1):
        total += float(best)
    return total


@dataclass(frozen=True)
class TrainingBatch:
    """(query, positive, hard negative) token triples."""

    triples: tuple[tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...]], ...]

    def __post_init__(self):
        triples = tuple((tuple(q), tuple(pos), tuple(neg))
                        for q, pos, neg in self.triples)
        if not triples:
            raise ValueError("a training batch needs at least one triple")
        object.__setattr__(self, "triples", triples)

    @property
    def size(self) -> int:
        return len(self.triples)

    def passages(self) -> list[tuple[str, ...]]:
        """All 2B passages: positives first (index i), then negatives (B + i)."""
        return [t[1] for t in self.triples] + [t[2] for t in self.triples]


def _tokens(tokens) -> list[str]:
    out = [t.surface if hasattr(t, "surface") else str(t) for t in tokens]
    if not out:
        raise ValueError("cannot encode an empty token sequence")
    return out


class ToyEncoder(BaseEstimator):
    """Lookup-table bi-encoder.

    ``mode="dpr"`` mean-pools token vectors into one vector scored by dot
    product; ``mode="colbert"`` keeps one vector per token, prepends a
    ``[Q]``/``[D]`` marker, and scores by MaxSim under ``metric``.
    Tokens missing from the table share the ``[UNK]`` vector.
    """

    def __init__(self, dim=128, mode="dpr", metric="dot", learning_rate=0.1,
                 n_steps=200, init_scale=0.1, random_state=0):
        self.dim = dim
        self.mode = mode
        self.metric = metric
        self.learning_rate = learning_rate
        self.n_steps = n_steps
        self.init_scale = init_scale
        self.random_state = random_state

    # -- table ---------------------------------------------------------
    def init_table(self, vocabulary: Iterable[str]) -> ToyEncoder:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        rng = np.random.default_rng(self.random_state)
        tokens = [UNK, QUERY_MARKER, DOC_MARKER]
        tokens += sorted(set(vocabulary) - set(tokens))
        self.table_ = {t: self.init_scale * rng.standard_normal(self.dim)
                       for t in tokens}
        return self

    def set_table(self, table: Mapping[str, Sequence[float]]) -> ToyEncoder:
        vectors = {t: _as_vector(v) for t, v in table.items()}
        dims = {v.size for v in vectors.values()}
        if len(dims) > 1:
            raise ValueError(f"table vectors have mixed dimensions {sorted(dims)}")
        if dims:
            self.dim = dims.pop()
        vectors.setdefault(UNK, np.zeros(self.dim))
        self.table_ = vectors
        return self

    def _lookup(self, token: str) -> str:
        return token if token in self.table_ else UNK

    def _keys(self, tokens, side: str) -> list[str]:
        keys = [self._lookup(t) for t in _tokens(tokens)]
        if self.mode == "colbert":
            marker = QUERY_MARKER if side == "query" else DOC_MARKER
            keys.insert(0, self._lookup(marker))
        return keys

    # -- encoding and scoring ------------------------------------------
    def encode(self, tokens, side: str = "passage") -> np.ndarray:
        """1-d pooled vector (dpr) or 2-d token matrix (colbert)."""
        check_is_fitted(self, "table_")
        rows = np.array([self.table_[k] for k in self._keys(tokens, side)])
        if self.mode == "dpr":
            return rows.mean(axis=0)
        return rows

    def score(self, query_tokens, passage_tokens) -> float:
        q = self.encode(query_tokens, "query")
        p = self.encode(passage_tokens, "passage")
        if self.mode == "dpr":
            return dpr_score(q, p)
        return maxsim_score(q, p, self.metric)

    def score_collection(self, query_tokens, passages, depth=None):
        return score_collection(query_tokens, passages, self, depth=depth)

    # -- training --------------------------------------------------------
    def loss(self, batch: TrainingBatch) -> float:
        return in_batch_loss(batch, self)

    def gradient(self, batch: TrainingBatch) -> dict[str, np.ndarray]:
        return loss_gradient(batch, self)

    def sgd_step(self, batch: TrainingBatch, learning_rate=None) -> float:
        """One gradient step; returns the loss before the update."""
        lr = self.learning_rate if learning_rate is None else learning_rate
        loss, grads = _loss_and_grad(batch, self)
        for token, g in grads.items():
            self.table_[token] = self.table_[token] - lr * g
        return loss

    def fit(self, batches, y=None):
        """Train for ``n_steps`` SGD steps, cycling through ``batches``.

        ``batches`` is a TrainingBatch or a sequence of them. The table is
        initialized from the batch vocabulary unless one is already set.
        """
        if isinstance(batches, TrainingBatch):
            batches = [batches]
        batches = list(batches)
        if not hasattr(self, "table_"):
            vocab = {t for b in batches for trip in b.triples for side in trip for t in side}
            self.init_table(vocab)
        self.loss_curve_ = []
        for step in range(self.n_steps):
            self.loss_curve_.append(self.sgd_step(batches[step % len(batches)]))
        return self

    # -- persistence -----------------------------------------------------
    def save_table(self, path: str | PathLike) -> None:
        check_is_fitted(self, "table_")
        with open(path, "w", encoding="utf-8") as f:
            f.write(dump_table(self.table_))

    @classmethod
    def from_table_file(cls, path: str | PathLike, **params) -> ToyEncoder:
        with open(path, encoding="utf-8") as f:
            table = load_table(f.read())
        return cls(**params).set_table(table)


def encode(tokens, encoder: ToyEncoder, side: str = "passage") -> np.ndarray:
    return encoder.encode(tokens, side)


# -- loss ------------------------------------------------------------------

def _pair_score_and_grad(encoder: ToyEncoder, q: np.ndarray, p: np.ndarray):
    """Score S(q, p) and its gradients with respect to q's and p's rows.

    ``q`` and ``p`` are token matrices (already looked up). For dpr the
    gradient is returned per row of the pooled mean.
    """
    if encoder.mode == "dpr":
        qv, pv = q.mean(axis=0), p.mean(axis=0)
        s = float(qv @ pv)
        gq = np.tile(pv / len(q), (len(q), 1))
        gp = np.tile(qv / len(p), (len(p), 1))
        return s, gq, gp

    sims = similarity_matrix(q, p, encoder.metric)
    best = np.argmax(sims, axis=1)
    s = float(np.sum(sims[np.arange(len(q)), best]))
    gq = np.zeros_like(q)
    gp = np.zeros_like(p)
    for i, j in enumerate(best):
        if encoder.metric == "dot":
            gq[i] += p[j]
            gp[j] += q[i]
        else:
            nu, nv = np.linalg.norm(q[i]), np.linalg.norm(p[j])
            a, b = q[i] / nu, p[j] / nv
            d = a - b
            dist = np.linalg.norm(d)
            if dist == 0:
                continue  # nondifferentiable point; take the zero subgradient
            ds_da = -d / dist
            ds_db = d / dist
            gq[i] += (ds_da - a * (a @ ds_da)) / nu
            gp[j] += (ds_db - b * (b @ ds_db)) / nv
    return s, gq, gp


def _logsumexp(x: np.ndarray) -> float:
    m = float(np.max(x))
    return m + math.log(float(np.sum(np.exp(x - m))))


def _loss_and_grad(batch: TrainingBatch, encoder: ToyEncoder):
    check_is_fitted(encoder, "table_")
    B = batch.size
    passages = batch.passages()
    p_keys = [encoder._keys(p, "passage") for p in passages]
    p_rows = [np.array([encoder.table_[k] for k in keys]) for keys in p_keys]

    total = 0.0
    grads: dict[str, np.ndarray] = {}

    def accumulate(keys, g_rows, weight):
        for key, g in zip(keys, g_rows):
            if key in grads:
                grads[key] += weight * g
            else:
                grads[key] = weight * g

    for i, (query, _pos, _neg) in enumerate(batch.triples):
        q_keys = encoder._keys(query, "query")
        q_rows = np.array([encoder.table_[k] for k in q_keys])
        results = [_pair_score_and_grad(encoder, q_rows, pr) for pr in p_rows]
        scores = np.array([r[0] for r in results])
        # Candidate i is the positive; the other 2B - 1 passages are negatives.
        lse = _logsumexp(scores)
        total += lse - scores[i]
        probs = np.exp(scores - lse)
        coef = probs.copy()
        coef[i] -= 1.0
        for c, (_s, gq, gp), keys in zip(coef, results, p_keys):
            accumulate(q_keys, gq, c / B)
            accumulate(keys, gp, c / B)
    return total / B, grads


def in_batch_loss(batch: TrainingBatch, encoder: ToyEncoder) -> float:
    """Mean over queries of the softmax cross-entropy against 2B - 1 negatives.

    Query i's negatives are its own hard negative plus the positive and
    negative passages of every other triple in the batch.
    """
    return _loss_and_grad(batch, encoder)[0]


def loss_gradient(batch: TrainingBatch, encoder: ToyEncoder) -> dict[str, np.ndarray]:
    """Analytic gradient of :func:`in_batch_loss` for each touched table row."""
    return _loss_and_grad(batch, encoder)[1]


def score_collection(query_tokens, passages, encoder: ToyEncoder | Callable,
                     depth: int | None = None) -> tuple[ScoredDoc, ...]:
    """Exhaustively score ``passages`` ((doc_id, tokens) pairs) for one query.

    ``encoder`` is a ToyEncoder or any ``f(query_tokens, passage_tokens)``
    callable. Output is sorted by descending score, ties by doc_id.
    """
    scorer = encoder.score if isinstance(encoder, ToyEncoder) else encoder
    scores = {}
    for doc_id, tokens in passages:
        if doc_id in scores:
            raise ValueError(f"duplicate passage id {doc_id}")
        scores[doc_id] = scorer(query_tokens, tokens)
    return ranked_entry(scores, depth)


# -- table file format -------------------------------------------------------

def dump_table(table: Mapping[str, np.ndarray]) -> str:
    lines = []
    for token, vec in table.items():
        values = " ".join(repr(float(x)) for x in vec)
        lines.append(f"{token} {len(vec)} {values}\n")
    return "".join(lines)


def load_table(text: str) -> dict[str, np.ndarray]:
    """Parse ``token dim v1 ... vd`` lines."""
    table = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        cols = line.split()
        if not cols:
            continue
        if len(cols) < 3:
            raise ValueError(f"embedding table line {line_no}: too few columns")
        token = cols[0]
        try:
            dim = int(cols[1])
            values = [float(x) for x in cols[2:]]
        except ValueError as exc:
            raise ValueError(f"embedding table line {line_no}: {exc}") from None
        if len(values) != dim:
            raise ValueError(f"embedding table line {line_no}: declared dim {dim}, "
                             f"got {len(values)} values")
        if token in table:
            raise ValueError(f"embedding table line {line_no}: duplicate token {token}")
        table[token] = _as_vector(values)
    return table
