"""Enclosing subgraphs and the directed node-link (line graph) transform."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._rng import substream
from .features import FeatureMatrix
from .graph import DirectedGraph


@dataclass
class EnclosingSubgraph:
    """Induced neighbourhood of a target pair, relabelled locally.

    ``nodes[0]`` and ``nodes[1]`` are the target endpoints, so the target is
    always ``(0, 1)`` in local ids. ``graph`` holds the induced edges plus the
    target edge if it had to be inserted.
    """

    nodes: np.ndarray
    graph: DirectedGraph
    hops: int
    inserted: bool
    target: tuple = (0, 1)


def extract_subgraph(observed: DirectedGraph, x: int, y: int, h: int = 1,
                     max_nodes: int = 100, seed: int = 0) -> EnclosingSubgraph:
    """Collect every node within ``h`` undirected hops of ``x`` or ``y``.

    When a hop would overflow ``max_nodes``, the new frontier is subsampled
    uniformly with a generator keyed on ``(seed, x, y)``, so a pair always
    maps to the same subgraph.
    """
    n = observed.num_nodes
    if not (0 <= x < n and 0 <= y < n):
        raise ValueError(f"target ({x}, {y}) outside graph with {n} nodes")
    if x == y:
        raise ValueError("target nodes must differ")
    if h < 1:
        raise ValueError("h must be at least 1")
    if max_nodes < 2:
        raise ValueError("max_nodes must be at least 2")

    sym = observed.symmetric
    indptr, indices = sym.indptr, sym.indices
    visited = np.zeros(n, dtype=bool)
    visited[[x, y]] = True
    order = [np.array([x, y], dtype=np.int64)]
    frontier = order[0]
    count = 2
    rng = None
    for _ in range(h):
        if count >= max_nodes or not len(frontier):
            break
        nbrs = np.concatenate([indices[indptr[u]:indptr[u + 1]] for u in frontier])
        fresh = np.unique(nbrs[~visited[nbrs]])
        room = max_nodes - count
        if len(fresh) > room:
            if rng is None:
                rng = substream(seed, "subgraph", x, y)
            fresh = np.sort(rng.choice(fresh, size=room, replace=False))
        visited[fresh] = True
        order.append(fresh)
        count += len(fresh)
        frontier = fresh

    nodes = np.concatenate(order)
    local = np.full(n, -1, dtype=np.int64)
    local[nodes] = np.arange(len(nodes))
    optr, oidx = observed.out_ptr, observed.out_idx
    src_parts, dst_parts = [], []
    for i, u in enumerate(nodes.tolist()):
        out = local[oidx[optr[u]:optr[u + 1]]]
        out = out[out >= 0]
        if len(out):
            src_parts.append(np.full(len(out), i, dtype=np.int64))
            dst_parts.append(out)
    if src_parts:
        edges = np.stack([np.concatenate(src_parts), np.concatenate(dst_parts)], axis=1)
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
    inserted = not observed.has_edge(x, y)
    if inserted:
        edges = np.vstack([edges, [[0, 1]]])
    return EnclosingSubgraph(nodes, DirectedGraph(len(nodes), edges), h, inserted)


@dataclass
class LineGraph:
    """Directed line graph of a subgraph.

    Line node ``a`` is subgraph edge ``edges[a] = (i, j)`` (local ids); a line
    edge ``a -> b`` exists when ``edges[a][1] == edges[b][0]``. Node features
    are ``[o_h[i] | o_h[j]]``; they are materialised on demand from
    ``node_features`` to avoid copying.
    """

    edges: np.ndarray
    line_edges: np.ndarray
    node_features: np.ndarray
    target_index: int
    nodes: np.ndarray | None = None

    @property
    def num_line_nodes(self) -> int:
        return len(self.edges)

    @property
    def line_nodes(self) -> np.ndarray:
        """Line nodes as original-id pairs (local ids when ``nodes`` is unset)."""
        return self.edges if self.nodes is None else self.nodes[self.edges]

    @property
    def features(self) -> np.ndarray:
        return np.hstack([self.node_features[self.edges[:, 0]], self.node_features[self.edges[:, 1]]])

    def dump(self, path) -> None:
        """Debug dump: JSON structure plus a sibling feature text file."""
        feat_path = str(path) + ".features.txt"
        doc = {
            "line_nodes": self.line_nodes.tolist(),
            "line_edges": self.line_edges.tolist(),
            "target_index": self.target_index,
            "features": feat_path,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
        FeatureMatrix(self.features, "hybrid").save(feat_path)


def line_graph_edges(edges: np.ndarray, num_nodes: int) -> np.ndarray:
    """All pairs ``(a, b)`` with ``edges[a] = (i, j)`` and ``edges[b] = (j, k)``."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if not len(edges):
        return np.zeros((0, 2), dtype=np.int64)
    by_src = np.argsort(edges[:, 0], kind="stable")
    ptr = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(edges[:, 0], minlength=num_nodes), out=ptr[1:])
    mid = edges[:, 1]
    counts = ptr[mid + 1] - ptr[mid]
    a = np.repeat(np.arange(len(edges)), counts)
    starts = np.repeat(ptr[mid], counts)
    offsets = np.arange(len(a)) - np.repeat(np.cumsum(counts) - counts, counts)
    b = by_src[starts + offsets]
    return np.stack([a, b], axis=1)


def to_line_graph(sub: EnclosingSubgraph, o_h: FeatureMatrix | np.ndarray) -> LineGraph:
    data = o_h.data if isinstance(o_h, FeatureMatrix) else np.asarray(o_h, dtype=float)
    g = sub.graph
    if data.shape[0] < g.num_nodes:
        raise ValueError(f"feature matrix has {data.shape[0]} rows, subgraph needs {g.num_nodes}")
    edges = g.edges
    tx, ty = sub.target
    hit = np.nonzero((edges[:, 0] == tx) & (edges[:, 1] == ty))[0]
    if len(hit) != 1:
        raise ValueError("target edge missing from subgraph")
    return LineGraph(
        edges=edges,
        line_edges=line_graph_edges(edges, g.num_nodes),
        node_features=data,
        target_index=int(hit[0]),
        nodes=sub.nodes,
    )
