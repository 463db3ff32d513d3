"""Graph convolution over line graphs with a logistic read-out, in plain numpy.

Propagation per layer is ``H_{l+1} = tanh(N H_l W_l)`` where ``N`` is the
row-normalised adjacency (with self-loops) of the undirected version of the
line graph. The target line node's states from every layer are
concatenated and passed to a one-hidden-layer tanh head ending in a logistic
unit. Gradients are computed by hand.

A batch of line graphs is processed as one block-diagonal graph. The first
layer is evaluated in factored form: since a line node's input row is
``[f_i | f_j]``, ``[f_i | f_j] W_0 = f_i W_top + f_j W_bottom``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from ._rng import substream
from .linegraph import LineGraph

CLAMP = 1e-7
CHECKPOINT_VERSION = 1


class NonFiniteError(FloatingPointError):
    """Raised when an activation or the loss stops being finite."""


@dataclass
class ModelParams:
    gcn: list
    head_w: np.ndarray
    head_b: np.ndarray
    out_w: np.ndarray
    out_b: np.ndarray
    hyper: dict = field(default_factory=dict)

    def tensors(self) -> list[tuple[str, np.ndarray]]:
        """Parameters in checkpoint order."""
        named = [(f"gcn{i}", w) for i, w in enumerate(self.gcn)]
        named += [("head_w", self.head_w), ("head_b", self.head_b),
                  ("out_w", self.out_w), ("out_b", self.out_b)]
        return named

    def copy(self) -> "ModelParams":
        return ModelParams([w.copy() for w in self.gcn], self.head_w.copy(), self.head_b.copy(),
                           self.out_w.copy(), self.out_b.copy(), dict(self.hyper))

    def zeros_like(self) -> "ModelParams":
        return ModelParams([np.zeros_like(w) for w in self.gcn], np.zeros_like(self.head_w),
                           np.zeros_like(self.head_b), np.zeros_like(self.out_w),
                           np.zeros_like(self.out_b), dict(self.hyper))

    def sgd_step(self, grads: "ModelParams", lr: float) -> None:
        for (_, p), (_, g) in zip(self.tensors(), grads.tensors()):
            p -= lr * g

    @property
    def input_width(self) -> int:
        return self.gcn[0].shape[0]

    def save(self, path) -> None:
        doc = {
            "version": CHECKPOINT_VERSION,
            "hyper": self.hyper,
            "tensors": [{"name": n, "shape": list(a.shape), "data": a.ravel().tolist()}
                        for n, a in self.tensors()],
        }
        Path(path).write_text(json.dumps(doc))

    @classmethod
    def load(cls, path) -> "ModelParams":
        doc = json.loads(Path(path).read_text())
        if doc.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
        arrays = {t["name"]: np.asarray(t["data"], dtype=np.float64).reshape(t["shape"])
                  for t in doc["tensors"]}
        layers = sorted((k for k in arrays if k.startswith("gcn")), key=lambda k: int(k[3:]))
        return cls([arrays[k] for k in layers], arrays["head_w"], arrays["head_b"],
                   arrays["out_w"], arrays["out_b"], doc["hyper"])


def init_params(feature_width: int, num_layers: int = 3, hidden: int = 32,
                head_hidden: int = 64, seed: int = 0, **hyper) -> ModelParams:
    """Glorot-uniform weights, zero biases.

    ``feature_width`` is the per-node width ``D_H``; the first layer takes
    line-node rows of width ``2 * D_H``.
    """
    rng = substream(seed, "init")

    def glorot(fan_in, fan_out):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-s, s, size=(fan_in, fan_out))

    widths = [2 * feature_width] + [hidden] * num_layers
    gcn = [glorot(widths[i], widths[i + 1]) for i in range(num_layers)]
    readout = hidden * num_layers
    head_w = glorot(readout, head_hidden)
    out_w = glorot(head_hidden, 1)[:, 0]
    hyper = {"feature_width": feature_width, "num_gcn_layers": num_layers, "hidden_width": hidden,
             "head_hidden": head_hidden, "seed": seed, **hyper}
    return ModelParams(gcn, head_w, np.zeros(head_hidden), out_w, np.zeros(1), hyper)


@dataclass
class Batch:
    """Several line graphs stacked into one block-diagonal graph."""

    norm: sp.csr_matrix
    norm_t: sp.csr_matrix
    feats: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    inc_src: sp.csr_matrix
    inc_dst: sp.csr_matrix
    targets: np.ndarray


def propagation_matrix(line_edges: np.ndarray, num_line_nodes: int) -> sp.csr_matrix:
    """Row-normalised ``A + I`` of the symmetrised line graph."""
    a, b = line_edges[:, 0], line_edges[:, 1]
    loops = np.arange(num_line_nodes)
    rows = np.concatenate([a, b, loops])
    cols = np.concatenate([b, a, loops])
    m = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(num_line_nodes, num_line_nodes))
    m.sum_duplicates()
    m.data[:] = 1.0
    deg = np.diff(m.indptr)
    m.data /= np.repeat(deg, deg)
    return m


def assemble(graphs: Sequence[LineGraph]) -> Batch:
    line_off = node_off = 0
    les, srcs, dsts, feats, targets = [], [], [], [], []
    for lg in graphs:
        les.append(lg.line_edges + line_off)
        srcs.append(lg.edges[:, 0] + node_off)
        dsts.append(lg.edges[:, 1] + node_off)
        feats.append(lg.node_features)
        targets.append(lg.target_index + line_off)
        line_off += lg.num_line_nodes
        node_off += lg.node_features.shape[0]
    widths = {f.shape[1] for f in feats}
    if len(widths) != 1:
        raise ValueError(f"mixed node-feature widths in batch: {sorted(widths)}")
    norm = propagation_matrix(np.concatenate(les).reshape(-1, 2), line_off)
    src, dst = np.concatenate(srcs), np.concatenate(dsts)
    ones = np.ones(line_off)
    lines = np.arange(line_off)
    inc_src = sp.csr_matrix((ones, (src, lines)), shape=(node_off, line_off))
    inc_dst = sp.csr_matrix((ones, (dst, lines)), shape=(node_off, line_off))
    return Batch(norm, norm.T.tocsr(), np.vstack(feats), src, dst, inc_src, inc_dst,
                 np.asarray(targets, dtype=np.int64))


def _forward(params: ModelParams, batch: Batch):
    d = batch.feats.shape[1]
    w0 = params.gcn[0]
    if w0.shape[0] != 2 * d:
        raise ValueError(f"line-node input width {2 * d} does not match first layer {w0.shape[0]}")
    top = batch.feats @ w0[:d]
    bottom = batch.feats @ w0[d:]
    p = top[batch.src] + bottom[batch.dst]
    hs = []
    for layer, w in enumerate(params.gcn):
        if layer:
            p = hs[-1] @ w
        h = np.tanh(batch.norm @ p)
        if not np.all(np.isfinite(h)):
            raise NonFiniteError(f"non-finite activation in graph-convolution layer {layer}")
        hs.append(h)
    readout = np.hstack([h[batch.targets] for h in hs])
    a = np.tanh(readout @ params.head_w + params.head_b)
    logit = a @ params.out_w + params.out_b[0]
    if not np.all(np.isfinite(logit)):
        raise NonFiniteError("non-finite activation in classifier head")
    return hs, readout, a, expit(logit)


def forward(params: ModelParams, lg: LineGraph):
    """Hidden states of every layer and the target probability for one line graph."""
    hs, _, _, prob = _forward(params, assemble([lg]))
    return hs, float(prob[0])


def predict_proba(params: ModelParams, graphs: Sequence[LineGraph]) -> np.ndarray:
    if not graphs:
        return np.zeros(0)
    return _forward(params, assemble(graphs))[3]


def cross_entropy(prob: np.ndarray, labels: np.ndarray) -> float:
    b = np.clip(prob, CLAMP, 1 - CLAMP)
    return float(-np.mean(labels * np.log(b) + (1 - labels) * np.log(1 - b)))


def loss_and_grads(params: ModelParams, samples: Sequence[tuple[LineGraph, int]]):
    """Mean clamped cross-entropy over ``samples`` and its exact gradient."""
    if not samples:
        raise ValueError("empty batch")
    graphs = [lg for lg, _ in samples]
    labels = np.asarray([lab for _, lab in samples], dtype=np.float64)
    batch = assemble(graphs)
    return _loss_and_grads(params, batch, labels)


def _loss_and_grads(params: ModelParams, batch: Batch, labels: np.ndarray):
    hs, readout, a, prob = _forward(params, batch)
    n = len(labels)
    loss = cross_entropy(prob, labels)
    inside = (prob > CLAMP) & (prob < 1 - CLAMP)
    dlogit = np.where(inside, prob - labels, 0.0) / n

    grads = params.zeros_like()
    grads.out_w = a.T @ dlogit
    grads.out_b = np.array([dlogit.sum()])
    dpre = np.outer(dlogit, params.out_w) * (1 - a * a)
    grads.head_w = readout.T @ dpre
    grads.head_b = dpre.sum(axis=0)
    dread = dpre @ params.head_w.T

    widths = [h.shape[1] for h in hs]
    bounds = np.cumsum([0] + widths)
    dh = np.zeros_like(hs[-1])
    for layer in range(len(hs) - 1, -1, -1):
        np.add.at(dh, batch.targets, dread[:, bounds[layer]:bounds[layer + 1]])
        dz = dh * (1 - hs[layer] ** 2)
        dp = batch.norm_t @ dz
        w = params.gcn[layer]
        if layer:
            grads.gcn[layer] = hs[layer - 1].T @ dp
            dh = dp @ w.T
        else:
            d = batch.feats.shape[1]
            g = np.empty_like(w)
            g[:d] = batch.feats.T @ (batch.inc_src @ dp)
            g[d:] = batch.feats.T @ (batch.inc_dst @ dp)
            grads.gcn[0] = g
    return loss, grads
