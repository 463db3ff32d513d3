"""Classical neighbourhood and path-count similarity indices.

All indices are evaluated on the undirected version of the observed graph.
A degree term of zero in a denominator yields a score of 0.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .graph import DirectedGraph

INDICES = ("CN", "Salton", "Jaccard", "Sorensen", "HPI", "HDI", "LHN1", "PA", "AA", "RA", "LP", "Katz")
KATZ_BETA = 0.05
KATZ_MAX_LENGTH = 5
LP_BETA = 0.01


def _div(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    return np.divide(num, den, out=np.zeros(np.broadcast(num, den).shape), where=den != 0)


def score_pairs(g: DirectedGraph, index: str, src, dst, beta: float | None = None) -> np.ndarray:
    """Vectorised :func:`heuristic_score` over pair arrays."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    a = g.symmetric
    deg = np.diff(a.indptr).astype(float)
    kx, ky = deg[src], deg[dst]
    if index == "PA":
        return kx * ky
    if index in ("LP", "Katz"):
        return _path_scores(a, index, src, dst, beta)

    rows_x = a[src]
    rows_y = a[dst]
    common = rows_x.multiply(rows_y)
    cn = np.asarray(common.sum(axis=1)).ravel()
    if index == "CN":
        return cn
    if index == "Salton":
        return _div(cn, np.sqrt(kx * ky))
    if index == "Jaccard":
        return _div(cn, kx + ky - cn)
    if index == "Sorensen":
        return _div(2 * cn, kx + ky)
    if index == "HPI":
        return _div(cn, np.minimum(kx, ky))
    if index == "HDI":
        return _div(cn, np.maximum(kx, ky))
    if index == "LHN1":
        return _div(cn, kx * ky)
    if index == "AA":
        with np.errstate(divide="ignore"):
            w = np.where(deg > 1, 1.0 / np.log(np.maximum(deg, 2)), 0.0)
        return common @ w
    if index == "RA":
        w = _div(1.0, deg)
        return common @ w
    raise ValueError(f"unknown index {index!r}; choose from {INDICES}")


def _path_scores(a: sp.csr_matrix, index: str, src, dst, beta):
    if index == "LP":
        beta = LP_BETA if beta is None else beta
        weights = {2: 1.0, 3: beta}
    else:
        beta = KATZ_BETA if beta is None else beta
        weights = {l: beta ** l for l in range(1, KATZ_MAX_LENGTH + 1)}
    longest = max(weights)
    uniq, inv = np.unique(src, return_inverse=True)
    n = a.shape[0]
    at = a.T.tocsr()
    scores = np.zeros(len(src))
    # walk counts from each distinct source, one power at a time, in row blocks
    block = max(1, 4_000_000 // max(n, 1))
    for start in range(0, len(uniq), block):
        rows = uniq[start:start + block]
        walk = np.zeros((n, len(rows)))
        walk[rows, np.arange(len(rows))] = 1.0
        total = np.zeros_like(walk)
        for length in range(1, longest + 1):
            walk = at @ walk
            if length in weights:
                total += weights[length] * walk
        sel = (inv >= start) & (inv < start + len(rows))
        scores[sel] = total[dst[sel], inv[sel] - start]
    return scores


def heuristic_score(g: DirectedGraph, index: str, x: int, y: int, beta: float | None = None) -> float:
    return float(score_pairs(g, index, [x], [y], beta)[0])
