"""Default node-embedding provider: truncated SVD of the degree-normalised adjacency.

Any callable ``(graph, dim, seed) -> (N, dim) array`` can stand in for
:func:`embed_nodes` in the pipeline.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp

from ._rng import substream
from .features import FeatureMatrix
from .graph import DirectedGraph

log = logging.getLogger(__name__)

START_SEED = 0


def normalized_adjacency(g: DirectedGraph) -> sp.csr_matrix:
    """``D_out^{-1/2} A D_in^{-1/2}``, with zero-degree scalings set to 0."""
    a = g.adjacency()
    dout = g.out_degrees().astype(float)
    din = g.in_degrees().astype(float)
    with np.errstate(divide="ignore"):
        so = np.where(dout > 0, 1.0 / np.sqrt(dout), 0.0)
        si = np.where(din > 0, 1.0 / np.sqrt(din), 0.0)
    return (sp.diags(so) @ a @ sp.diags(si)).tocsr()


def top_singular_triplets(m: sp.spmatrix, k: int, seed: int, tol: float = 1e-6,
                          max_iter: int = 3000, oversample: int = 8, known=None):
    """Top-``k`` singular triplets by block power iteration on ``m m^T``.

    Iterates an orthonormal block of ``k + oversample`` columns until every
    leading Ritz pair has residual ``|m v - s u| < tol * s_max``. Returns
    ``(U, s, V)`` with ``U`` of shape ``(rows, k)``, ``V`` of shape
    ``(cols, k)``, and sign fixed so that the largest-magnitude entry of each
    left vector is positive.

    ``known = (U0, s0, V0)`` deflates already-known triplets: the iteration
    runs on ``m - U0 diag(s0) V0^T`` and the known triplets are prepended.
    """
    rows, cols = m.shape
    mt = m.T.tocsr()
    if known is not None:
        u0, s0, v0 = known
        k -= len(s0)
        fwd = lambda x: m @ x - u0 @ (s0[:, None] * (v0.T @ x))
        bwd = lambda x: mt @ x - v0 @ (s0[:, None] * (u0.T @ x))
    else:
        fwd = lambda x: m @ x
        bwd = lambda x: mt @ x
    if known is not None and k <= 0:
        u, s, v = u0[:, :k + len(s0)], s0[:k + len(s0)], v0[:, :k + len(s0)]
        return _fix_signs(u, s, v)

    b = min(k + oversample, rows, cols)
    rng = substream(seed, "embedding")
    q, _ = np.linalg.qr(rng.standard_normal((rows, b)))
    for it in range(max_iter):
        q, _ = np.linalg.qr(fwd(bwd(q)))
        # Rayleigh-Ritz on the current subspace
        ub, s, vt = np.linalg.svd(bwd(q).T, full_matrices=False)
        u, s, v = q @ ub[:, :k], s[:k], vt[:k].T
        scale = max(s[0], 1e-300)
        resid = np.linalg.norm(fwd(v) - u * s, axis=0) / scale
        if np.all(resid < tol):
            break
    else:
        log.warning("power iteration stopped at %d iterations without reaching tol %g", max_iter, tol)
    if known is not None:
        u, s, v = np.hstack([u0, u]), np.concatenate([s0, s]), np.hstack([v0, v])
    return _fix_signs(u, s, v)


def _fix_signs(u, s, v):
    cols = np.arange(u.shape[1])
    signs = np.sign(u[np.argmax(np.abs(u), axis=0), cols])
    signs[signs == 0] = 1.0
    return u * signs, s, v * signs


def leading_triplet(g: DirectedGraph):
    """Closed-form top singular triplet of :func:`normalized_adjacency`.

    ``M sqrt(d_in) = sqrt(d_out)`` and ``M^T sqrt(d_out) = sqrt(d_in)``, and
    no singular value of ``M`` exceeds 1, so the normalised square-root
    degree vectors form a leading triplet with singular value 1.
    """
    u = np.sqrt(g.out_degrees().astype(float))
    v = np.sqrt(g.in_degrees().astype(float))
    return (u / np.linalg.norm(u))[:, None], np.ones(1), (v / np.linalg.norm(v))[:, None]


def embed_nodes(g: DirectedGraph, dim: int = 32, seed: int = 0) -> FeatureMatrix:
    """Unit-norm spectral node embedding of width ``dim``.

    With ``k = ceil(dim / 2)`` leading singular triplets, the first ``k``
    columns are the source-role coordinates ``U sqrt(s)`` and the remaining
    ``dim - k`` the target-role coordinates ``V sqrt(s)``. The leading triplet
    is taken in closed form, which also pins it down when the top singular
    value is repeated (disconnected graphs, cycles). Rows are scaled to
    unit norm; rows that are entirely zero (isolated nodes) stay zero.

    The power iteration always starts from the same block, so the result is
    a function of the graph alone and ``seed`` has no effect. It is accepted
    so that seeded providers can be swapped in.
    """
    n = g.num_nodes
    if not 1 <= dim <= n:
        raise ValueError(f"dim must lie in [1, {n}], got {dim}")
    k = (dim + 1) // 2
    m = normalized_adjacency(g)
    if m.nnz == 0:
        return FeatureMatrix(np.zeros((n, dim)), "embedding")
    u, s, v = top_singular_triplets(m, k, START_SEED, known=leading_triplet(g))
    root = np.sqrt(s)
    out = np.hstack([u * root, (v * root)[:, : dim - k]])
    norms = np.linalg.norm(out, axis=1, keepdims=True)
    # tiny rows are numerical noise on nodes outside the leading subspace
    out = np.divide(out, norms, out=np.zeros_like(out), where=norms > 1e-12)
    return FeatureMatrix(out, "embedding")
