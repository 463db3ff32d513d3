"""Directed link prediction from hybrid node features on line graphs."""

from .graph import DirectedGraph, LabeledPair, SplitSpec, graph_from_pairs, load_edge_list, split
from .metrics import ScoredPair, auc, average_precision, evaluate_model
from .model import ModelParams, forward, init_params, loss_and_grads
from .pipeline import FeatureConfig, Pipeline, TrainReport, predict, train
from .sbm import PredictorModel, SbmSpec, TheoremReport, g_condition, generate_sbm, monte_carlo_theorem

__all__ = [
    "DirectedGraph", "LabeledPair", "SplitSpec", "graph_from_pairs", "load_edge_list", "split",
    "ScoredPair", "auc", "average_precision", "evaluate_model",
    "ModelParams", "forward", "init_params", "loss_and_grads",
    "FeatureConfig", "Pipeline", "TrainReport", "predict", "train",
    "PredictorModel", "SbmSpec", "TheoremReport", "g_condition", "generate_sbm", "monte_carlo_theorem",
]
