"""Directed graph storage, edge-list ingestion, train/test splitting."""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from ._rng import substream

log = logging.getLogger(__name__)


class EdgeListError(ValueError):
    """Raised for a malformed edge-list file."""


class DirectedGraph:
    """Immutable simple directed graph on nodes ``0 .. num_nodes-1``.

    Edges keep their construction order. Out- and in-adjacency are stored in
    CSR form with sorted neighbour lists. Self-loops and repeated edges are
    rejected; use :func:`load_edge_list` to drop them from raw data.
    """

    def __init__(self, num_nodes: int, edges, node_ids=None):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        num_nodes = int(num_nodes)
        if num_nodes < 0:
            raise ValueError("num_nodes must be non-negative")
        if len(edges) and (edges.min() < 0 or edges.max() >= num_nodes):
            raise ValueError("edge endpoint outside [0, num_nodes)")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("self-loops are not allowed")
        keys = edges[:, 0] * num_nodes + edges[:, 1]
        sorted_keys = np.sort(keys)
        if len(keys) > 1 and np.any(sorted_keys[1:] == sorted_keys[:-1]):
            raise ValueError("duplicate edges are not allowed")

        self.num_nodes = num_nodes
        self.edges = edges
        self._keys = sorted_keys
        self.out_ptr, self.out_idx = _csr(edges[:, 0], edges[:, 1], num_nodes)
        self.in_ptr, self.in_idx = _csr(edges[:, 1], edges[:, 0], num_nodes)
        # original ids when the graph was relabelled on ingestion
        self.node_ids = None if node_ids is None else np.asarray(node_ids, dtype=np.int64)
        for arr in (self.edges, self._keys, self.out_ptr, self.out_idx, self.in_ptr, self.in_idx):
            arr.flags.writeable = False

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def average_degree(self) -> float:
        return self.num_edges / self.num_nodes if self.num_nodes else 0.0

    def out_adjacency(self, v: int) -> np.ndarray:
        return self.out_idx[self.out_ptr[v]:self.out_ptr[v + 1]]

    def in_adjacency(self, v: int) -> np.ndarray:
        return self.in_idx[self.in_ptr[v]:self.in_ptr[v + 1]]

    def out_degrees(self) -> np.ndarray:
        return np.diff(self.out_ptr)

    def in_degrees(self) -> np.ndarray:
        return np.diff(self.in_ptr)

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.has_edges([u], [v])[0])

    def has_edges(self, src, dst) -> np.ndarray:
        """Vectorised membership test for the pairs ``(src[k], dst[k])``."""
        keys = np.asarray(src, dtype=np.int64) * self.num_nodes + np.asarray(dst, dtype=np.int64)
        if not len(self._keys):
            return np.zeros(keys.shape, dtype=bool)
        pos = np.searchsorted(self._keys, keys)
        pos = np.minimum(pos, len(self._keys) - 1)
        return self._keys[pos] == keys

    def adjacency(self) -> sp.csr_matrix:
        """Binary adjacency matrix, ``A[i, j] = 1`` iff ``i -> j``."""
        n = self.num_nodes
        data = np.ones(self.num_edges)
        return sp.csr_matrix((data, self.out_idx, self.out_ptr), shape=(n, n))

    @cached_property
    def symmetric(self) -> sp.csr_matrix:
        """Binary adjacency of the underlying undirected simple graph."""
        a = self.adjacency()
        s = (a + a.T).tocsr()
        s.data[:] = 1.0
        s.sort_indices()
        return s

    def undirected_neighbors(self, v: int) -> np.ndarray:
        s = self.symmetric
        return s.indices[s.indptr[v]:s.indptr[v + 1]]

    def __eq__(self, other) -> bool:
        if not isinstance(other, DirectedGraph):
            return NotImplemented
        return self.num_nodes == other.num_nodes and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash((self.num_nodes, self.edges.tobytes()))

    def __repr__(self) -> str:
        return f"DirectedGraph(num_nodes={self.num_nodes}, num_edges={self.num_edges})"


def _csr(rows: np.ndarray, cols: np.ndarray, n: int):
    order = np.lexsort((cols, rows))
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=ptr[1:])
    return ptr, cols[order].astype(np.int64)


def reverse_view(g: DirectedGraph) -> DirectedGraph:
    """Graph with every edge flipped."""
    return DirectedGraph(g.num_nodes, g.edges[:, ::-1], node_ids=g.node_ids)


def load_edge_list(path) -> DirectedGraph:
    """Read a ``src<TAB>dst`` (or whitespace separated) edge list.

    Lines starting with ``#`` and blank lines are ignored. Ids must be
    non-negative integers. When the ids used are not exactly ``0..n-1`` they
    are relabelled densely in increasing order and the originals are kept in
    ``graph.node_ids`` (see :func:`write_id_map`). Self-loops and repeated
    edges are dropped with a warning.
    """
    pairs = []
    declared = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = _HEADER.match(line)
                if m and declared is None and not pairs:
                    declared = int(m.group(1))
                continue
            parts = line.split()
            if len(parts) != 2:
                raise EdgeListError(f"{path}:{lineno}: expected two ids, got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise EdgeListError(f"{path}:{lineno}: non-integer id in {line!r}") from None
            if u < 0 or v < 0:
                raise EdgeListError(f"{path}:{lineno}: negative id in {line!r}")
            pairs.append((u, v))
    return graph_from_pairs(pairs, num_nodes=declared)


_HEADER = re.compile(r"#\s*nodes\s+(\d+)\b")


def graph_from_pairs(pairs: Sequence[tuple[int, int]], num_nodes: int | None = None) -> DirectedGraph:
    """Build a graph from raw id pairs, dropping self-loops and repeats.

    With ``num_nodes`` given, ids are taken as already dense in
    ``[0, num_nodes)``; otherwise the node set is the set of ids seen.
    """
    raw = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    node_ids = None
    if num_nodes is not None:
        if len(raw) and raw.max() >= num_nodes:
            raise EdgeListError(f"id {int(raw.max())} exceeds declared node count {num_nodes}")
        n = num_nodes
    elif not len(raw):
        return DirectedGraph(0, raw)
    else:
        ids = np.unique(raw)
        if ids[0] != 0 or ids[-1] != len(ids) - 1:
            node_ids = ids
            raw = np.searchsorted(ids, raw)
        n = len(ids)

    loops = raw[:, 0] == raw[:, 1]
    keys = raw[:, 0] * n + raw[:, 1]
    _, first = np.unique(keys, return_index=True)
    keep = np.zeros(len(raw), dtype=bool)
    keep[first] = True
    dupes = int(len(raw) - keep.sum())
    keep &= ~loops
    if loops.any() or dupes:
        log.warning("dropped %d self-loop(s) and %d duplicate edge(s)", int(loops.sum()), dupes)
    return DirectedGraph(n, raw[keep], node_ids=node_ids)


def write_id_map(g: DirectedGraph, path) -> None:
    """Write ``{"dense_to_original": [...]}`` for a relabelled graph."""
    ids = g.node_ids if g.node_ids is not None else np.arange(g.num_nodes)
    Path(path).write_text(json.dumps({"dense_to_original": ids.tolist()}))


def save_edge_list(g: DirectedGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# nodes {g.num_nodes} edges {g.num_edges}\n")
        for u, v in g.edges.tolist():
            fh.write(f"{u}\t{v}\n")


# --------------------------------------------------------------------------
# splitting


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.5
    seed: int = 0
    negative_ratio: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if self.negative_ratio < 0:
            raise ValueError("negative_ratio must be non-negative")


class LabeledPair(NamedTuple):
    src: int
    dst: int
    label: int


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split(g: DirectedGraph, spec: SplitSpec):
    """Partition edges into train/test positives and sample negatives.

    Returns ``(train, test, observed)`` where ``train`` and ``test`` are lists
    of :class:`LabeledPair` (positives first) and ``observed`` holds only the
    train positives. Negatives are uniform non-edges of ``g`` (the reverse of a
    true edge is allowed) and are disjoint between train and test.
    """
    m = g.num_edges
    if m < 10:
        raise ValueError(f"need at least 10 edges to split, got {m}")
    n_train = _round_half_up(spec.train_fraction * m)
    n_test = m - n_train
    if n_train == 0 or n_test == 0:
        raise ValueError(f"train_fraction {spec.train_fraction} leaves an empty side")

    perm = substream(spec.seed, "split").permutation(m)
    train_pos = g.edges[np.sort(perm[:n_train])]
    test_pos = g.edges[np.sort(perm[n_train:])]

    n_train_neg = _round_half_up(spec.negative_ratio * n_train)
    n_test_neg = _round_half_up(spec.negative_ratio * n_test)
    neg = sample_negatives(g, n_train_neg + n_test_neg, substream(spec.seed, "negatives"))
    train_neg, test_neg = neg[:n_train_neg], neg[n_train_neg:]

    train = _labeled(train_pos, 1) + _labeled(train_neg, 0)
    test = _labeled(test_pos, 1) + _labeled(test_neg, 0)
    observed = DirectedGraph(g.num_nodes, train_pos, node_ids=g.node_ids)
    return train, test, observed


def _labeled(pairs: np.ndarray, label: int) -> list[LabeledPair]:
    return [LabeledPair(u, v, label) for u, v in pairs.tolist()]


def sample_negatives(g: DirectedGraph, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` distinct ordered non-edges ``(u, v)``, ``u != v``."""
    n = g.num_nodes
    available = n * (n - 1) - g.num_edges
    if count > available:
        raise ValueError(f"requested {count} negatives but only {available} non-edges exist")
    chosen: dict[int, None] = {}
    while len(chosen) < count:
        want = max(16, 2 * (count - len(chosen)))
        u = rng.integers(0, n, size=want)
        v = rng.integers(0, n, size=want)
        ok = (u != v) & ~g.has_edges(u, v)
        for key in (u[ok] * n + v[ok]).tolist():
            if key not in chosen:
                chosen[key] = None
                if len(chosen) == count:
                    break
    keys = np.fromiter(chosen, dtype=np.int64, count=len(chosen))
    return np.stack([keys // max(n, 1), keys % max(n, 1)], axis=1) if n else np.zeros((0, 2), np.int64)


def pairs_array(pairs: Sequence[LabeledPair]) -> tuple[np.ndarray, np.ndarray]:
    """``(N, 2)`` endpoint array and ``(N,)`` label array."""
    if not pairs:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64)
    arr = np.asarray(pairs, dtype=np.int64)
    return arr[:, :2], arr[:, 2]


def save_split(path, train, test, seed: int) -> None:
    def part(pairs, label):
        return [[p.src, p.dst] for p in pairs if p.label == label]

    doc = {
        "train_pos": part(train, 1),
        "train_neg": part(train, 0),
        "test_pos": part(test, 1),
        "test_neg": part(test, 0),
        "seed": seed,
    }
    Path(path).write_text(json.dumps(doc))


def load_split(path):
    """Inverse of :func:`save_split`; returns ``(train, test, seed)``."""
    doc = json.loads(Path(path).read_text())
    train = [LabeledPair(u, v, 1) for u, v in doc["train_pos"]]
    train += [LabeledPair(u, v, 0) for u, v in doc["train_neg"]]
    test = [LabeledPair(u, v, 1) for u, v in doc["test_pos"]]
    test += [LabeledPair(u, v, 0) for u, v in doc["test_neg"]]
    return train, test, doc["seed"]
