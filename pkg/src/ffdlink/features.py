"""Per-node feature blocks and their fusion.

Three blocks are combined per node: one-hot double-radius (DRNL) labels
relative to a target pair, one-hot community membership, and a real-valued
embedding. Fusion is plain column concatenation in that order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .graph import DirectedGraph

KINDS = ("path_onehot", "community_onehot", "embedding", "hybrid")


@dataclass
class FeatureMatrix:
    data: np.ndarray
    kind: str

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError("feature data must be 2-D")
        if self.kind not in KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{self.rows} {self.cols} {self.kind}\n")
            onehot = self.kind in ("path_onehot", "community_onehot")
            for row in self.data:
                if onehot:
                    fh.write(" ".join("1" if v else "0" for v in row) + "\n")
                else:
                    fh.write(" ".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def load(cls, path) -> "FeatureMatrix":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 3:
                raise ValueError(f"{path}: bad header")
            n, d, kind = int(header[0]), int(header[1]), header[2]
            data = np.zeros((n, d))
            for i in range(n):
                vals = fh.readline().split()
                if len(vals) != d:
                    raise ValueError(f"{path}: row {i} has {len(vals)} values, expected {d}")
                data[i] = [float(v) for v in vals]
        return cls(data, kind)


def drnl_hash(dx, dy):
    """Double-radius label for finite distances ``dx, dy >= 1``."""
    dx = np.asarray(dx, dtype=np.int64)
    dy = np.asarray(dy, dtype=np.int64)
    d = dx + dy
    half = d // 2
    return 1 + np.minimum(dx, dy) + half * (half + d % 2 - 1)


def drnl_label(subgraph: DirectedGraph, x: int, y: int) -> np.ndarray:
    """Double-radius node labels of every node relative to ``(x, y)``.

    Distances are hop counts on the undirected version of ``subgraph`` with
    the link between ``x`` and ``y`` removed in both directions. The targets
    get label 1, nodes unreachable from either target get 0.
    """
    if x == y:
        raise ValueError("target nodes must differ")
    n = subgraph.num_nodes
    if not (0 <= x < n and 0 <= y < n):
        raise ValueError("target node outside subgraph")
    dist = _target_distances(subgraph.symmetric, x, y)
    dx, dy = dist
    labels = np.zeros(n, dtype=np.int64)
    finite = np.isfinite(dx) & np.isfinite(dy)
    labels[finite] = drnl_hash(dx[finite].astype(np.int64), dy[finite].astype(np.int64))
    labels[[x, y]] = 1
    return labels


def _target_distances(sym: sp.csr_matrix, x: int, y: int) -> np.ndarray:
    coo = sym.tocoo()
    r, c = coo.row, coo.col
    keep = ~(((r == x) & (c == y)) | ((r == y) & (c == x)))
    masked = sp.csr_matrix((coo.data[keep], (r[keep], c[keep])), shape=sym.shape)
    return csgraph.shortest_path(masked, unweighted=True, directed=False, indices=[x, y])


def onehot_labels(labels, cap: int = 50) -> FeatureMatrix:
    """One-hot encode integer labels into ``cap + 1`` columns.

    Column 0 is the unreachable label; labels above ``cap`` share column ``cap``.
    """
    if cap < 1:
        raise ValueError("cap must be at least 1")
    labels = np.minimum(np.asarray(labels, dtype=np.int64), cap)
    out = np.zeros((len(labels), cap + 1))
    out[np.arange(len(labels)), labels] = 1.0
    return FeatureMatrix(out, "path_onehot")


def fuse(o_p: FeatureMatrix | None, o_c: FeatureMatrix | None, o_e: FeatureMatrix | None) -> FeatureMatrix:
    """Concatenate the available blocks as ``[path | community | embedding]``.

    ``None`` drops a block entirely (its width becomes zero).
    """
    blocks = [b for b in (o_p, o_c, o_e) if b is not None]
    if not blocks:
        raise ValueError("at least one feature block is required")
    rows = {b.rows for b in blocks}
    if len(rows) != 1:
        raise ValueError(f"row counts differ across blocks: {sorted(rows)}")
    return FeatureMatrix(np.hstack([b.data for b in blocks]), "hybrid")
