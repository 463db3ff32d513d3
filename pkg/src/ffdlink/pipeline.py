"""End-to-end link scoring: features -> subgraph -> line graph -> GCN, and training."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._rng import substream
from .community import CommunityAssignment, community_onehot, detect_communities
from .embedding import embed_nodes
from .features import FeatureMatrix, drnl_label, fuse, onehot_labels
from .graph import DirectedGraph
from .linegraph import LineGraph, extract_subgraph, to_line_graph
from .metrics import auc, average_precision
from .model import ModelParams, _loss_and_grads, assemble, predict_proba

log = logging.getLogger(__name__)

BLOCKS = ("path", "community", "embedding")


@dataclass(frozen=True)
class FeatureConfig:
    hops: int = 1
    max_nodes: int = 100
    label_cap: int = 50
    embed_dim: int = 32
    blocks: tuple = BLOCKS

    def __post_init__(self):
        unknown = set(self.blocks) - set(BLOCKS)
        if unknown:
            raise ValueError(f"unknown feature blocks {sorted(unknown)}")
        if not self.blocks:
            raise ValueError("at least one feature block must be enabled")


class Pipeline:
    """Feature context built once from the observed graph.

    Community labels and the embedding are global; path labels are computed
    per target pair inside its enclosing subgraph.
    """

    def __init__(self, observed: DirectedGraph, config: FeatureConfig = FeatureConfig(), seed: int = 0,
                 communities: CommunityAssignment | None = None, embedding: FeatureMatrix | None = None,
                 embedder: Callable[[DirectedGraph, int, int], FeatureMatrix] = embed_nodes):
        self.observed = observed
        self.config = config
        self.seed = seed
        self.communities = None
        self.o_c = None
        self.o_e = None
        if "community" in config.blocks:
            self.communities = communities or detect_communities(observed)
            self.o_c = community_onehot(self.communities)
        if "embedding" in config.blocks:
            if embedding is None:
                dim = min(config.embed_dim, observed.num_nodes)
                embedding = embedder(observed, dim, seed)
            data = np.asarray(embedding.data if isinstance(embedding, FeatureMatrix) else embedding)
            if data.shape[0] != observed.num_nodes or not np.all(np.isfinite(data)):
                raise ValueError("embedding must be a finite matrix with one row per node")
            self.o_e = FeatureMatrix(data, "embedding")

    @property
    def feature_width(self) -> int:
        w = 0
        if "path" in self.config.blocks:
            w += self.config.label_cap + 1
        if self.o_c is not None:
            w += self.o_c.cols
        if self.o_e is not None:
            w += self.o_e.cols
        return w

    def prepare(self, x: int, y: int) -> "Prepared":
        """Structure of the sample ``(x, y)`` without materialised features."""
        cfg = self.config
        sub = extract_subgraph(self.observed, x, y, cfg.hops, cfg.max_nodes, self.seed)
        labels = drnl_label(sub.graph, 0, 1) if "path" in cfg.blocks else None
        lg = to_line_graph(sub, np.zeros((sub.graph.num_nodes, 0)))
        return Prepared(sub.nodes, labels, lg.edges.astype(np.int32),
                        lg.line_edges.astype(np.int32), lg.target_index)

    def node_features(self, nodes: np.ndarray, labels: np.ndarray | None) -> np.ndarray:
        o_p = o_c = o_e = None
        if "path" in self.config.blocks:
            o_p = onehot_labels(labels, self.config.label_cap)
        if self.o_c is not None:
            o_c = FeatureMatrix(self.o_c.data[nodes], "community_onehot")
        if self.o_e is not None:
            o_e = FeatureMatrix(self.o_e.data[nodes], "embedding")
        return fuse(o_p, o_c, o_e).data

    def materialize(self, prepared: Sequence["Prepared"]) -> list[LineGraph]:
        if not prepared:
            return []
        nodes = np.concatenate([p.nodes for p in prepared])
        labels = np.concatenate([p.labels for p in prepared]) if "path" in self.config.blocks else None
        feats = self.node_features(nodes, labels)
        out, off = [], 0
        for p in prepared:
            k = len(p.nodes)
            out.append(LineGraph(p.edges.astype(np.int64), p.line_edges.astype(np.int64),
                                 feats[off:off + k], p.target_index, p.nodes))
            off += k
        return out

    def line_graph(self, x: int, y: int) -> LineGraph:
        return self.materialize([self.prepare(x, y)])[0]

    def line_graphs(self, pairs) -> list[LineGraph]:
        return self.materialize([self.prepare(int(p[0]), int(p[1])) for p in pairs])


@dataclass
class Prepared:
    nodes: np.ndarray
    labels: np.ndarray | None
    edges: np.ndarray
    line_edges: np.ndarray
    target_index: int


def predict(params: ModelParams, x: int, y: int, pipeline: Pipeline) -> float:
    """Probability that the link ``x -> y`` exists."""
    return float(predict_proba(params, [pipeline.line_graph(x, y)])[0])


def score(params: ModelParams, pairs, pipeline: Pipeline, batch_size: int = 200) -> np.ndarray:
    out = []
    for start in range(0, len(pairs), batch_size):
        out.append(predict_proba(params, pipeline.line_graphs(pairs[start:start + batch_size])))
    return np.concatenate(out) if out else np.zeros(0)


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    test_auc: float
    test_ap: float


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)
    best_epoch: int = -1
    best_params: ModelParams | None = None
    final_params: ModelParams | None = None

    @property
    def best(self) -> EpochRecord | None:
        return next((e for e in self.epochs if e.epoch == self.best_epoch), None)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "loss", "auc", "ap"])
            for e in self.epochs:
                w.writerow([e.epoch, repr(e.mean_loss), repr(e.test_auc), repr(e.test_ap)])


class TrainingDiverged(FloatingPointError):
    pass


def train(params: ModelParams, train_samples: Sequence, test_samples: Sequence, pipeline: Pipeline,
          epochs: int = 50, lr: float = 0.005, batch_size: int = 50, seed: int = 0,
          cache: bool = True, callback=None) -> TrainReport:
    """Mini-batch SGD on ``(src, dst, label)`` samples.

    The training order is reshuffled every epoch from the ``"shuffle"``
    substream of ``seed``. Test AUC/AP are measured after each epoch and the
    parameters of the best-AUC epoch are kept. ``params`` is updated in place.
    With ``cache`` the subgraph structure of every sample is computed once;
    features are gathered per batch.
    """
    train_pairs = np.asarray([(p[0], p[1]) for p in train_samples], dtype=np.int64).reshape(-1, 2)
    train_labels = np.asarray([p[2] for p in train_samples], dtype=np.float64)
    test_pairs = np.asarray([(p[0], p[1]) for p in test_samples], dtype=np.int64).reshape(-1, 2)
    test_labels = np.asarray([p[2] for p in test_samples], dtype=np.int64)
    if not len(train_pairs):
        raise ValueError("no training samples")

    prepare = lambda pairs: [pipeline.prepare(int(u), int(v)) for u, v in pairs]
    train_prep = prepare(train_pairs) if cache else None
    test_prep = prepare(test_pairs) if cache else None
    rng = substream(seed, "shuffle")
    report = TrainReport()
    best_auc = -np.inf
    for epoch in range(1, epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(len(train_pairs))
        losses = []
        for b, start in enumerate(range(0, len(order), batch_size)):
            idx = order[start:start + batch_size]
            prep = [train_prep[i] for i in idx] if cache else prepare(train_pairs[idx])
            batch = assemble(pipeline.materialize(prep))
            loss, grads = _loss_and_grads(params, batch, train_labels[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(f"loss became {loss} at epoch {epoch}, batch {b}")
            params.sgd_step(grads, lr)
            losses.append(loss * len(idx))
        mean_loss = float(np.sum(losses) / len(order))

        test_auc = test_ap = float("nan")
        if len(test_pairs):
            if cache:
                probs = np.concatenate([predict_proba(params, pipeline.materialize(test_prep[s:s + 200]))
                                        for s in range(0, len(test_prep), 200)])
            else:
                probs = score(params, test_pairs, pipeline)
            test_auc = auc((probs, test_labels))
            test_ap = average_precision((probs, test_labels))
        rec = EpochRecord(epoch, mean_loss, test_auc, test_ap)
        report.epochs.append(rec)
        log.info("epoch %d loss %.5f auc %.4f ap %.4f (%.1fs)", epoch, mean_loss, test_auc, test_ap,
                 time.perf_counter() - t0)
        if callback is not None:
            callback(rec)
        if not len(test_pairs) or test_auc > best_auc:
            best_auc = test_auc
            report.best_epoch = epoch
            report.best_params = params.copy()
    report.final_params = params.copy()
    return report
