"""Ranking metrics for scored node pairs."""

from __future__ import annotations

import decimal
from decimal import Decimal
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.stats import rankdata


class ScoredPair(NamedTuple):
    src: int
    dst: int
    score: float
    label: int


def _unpack(pairs) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(pairs, tuple) and len(pairs) == 2:
        scores, labels = pairs
    else:
        scores = [p.score for p in pairs]
        labels = [p.label for p in pairs]
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    return scores, labels


def auc(pairs) -> float:
    """Mann-Whitney AUC with ties counted as one half.

    Accepts a sequence of :class:`ScoredPair` or a ``(scores, labels)`` tuple.
    """
    scores, labels = _unpack(pairs)
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def average_precision(pairs) -> float:
    """Mean precision at the rank of each positive.

    Sorted by descending score; equal scores keep their input order. The
    precisions are summed in 40-digit decimal arithmetic and rounded once,
    so rational results such as 5/6 come out as the nearest double.
    """
    scores, labels = _unpack(pairs)
    if not np.any(labels == 1):
        raise ValueError("AP needs at least one positive")
    order = np.argsort(-scores, kind="stable")
    hits = labels[order] == 1
    ranks = np.nonzero(hits)[0] + 1
    with decimal.localcontext() as ctx:
        ctx.prec = 40
        total = sum(Decimal(k) / Decimal(int(r)) for k, r in enumerate(ranks, start=1))
        return float(total / len(ranks))


def evaluate_model(scorer: Callable[[int, int], float], test: Sequence) -> dict:
    """Score every ``(src, dst, label)`` pair and return ``{"auc", "ap"}``."""
    if not test:
        raise ValueError("empty test set")
    scores = np.array([scorer(p[0], p[1]) for p in test], dtype=np.float64)
    labels = np.array([p[2] for p in test], dtype=np.int64)
    return {"auc": auc((scores, labels)), "ap": average_precision((scores, labels))}
