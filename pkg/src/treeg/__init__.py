"""Gradient-boosted decision trees over graphs with walk-based dynamic split features."""
from .data import GraphDataset, add_constant_feature, line_graph, load_tudataset, save_tudataset
from .ensemble import Ensemble, Task, fit_ensemble, load_model, predict, save_model
from .explain import ExplanationReport, explain
from .features import Aggregator, FeatureSpec, phi_graph, phi_vertex
from .graph import Graph, VertexSubset, WalkType, graph_from_edges, walk_powers
from .tree import TrainConfig, TreeNode, fit_tree, predict_tree

__version__ = "0.1.0"

__all__ = [
    "Aggregator", "Ensemble", "ExplanationReport", "FeatureSpec", "Graph", "GraphDataset",
    "Task", "TrainConfig", "TreeNode", "VertexSubset", "WalkType", "add_constant_feature",
    "explain", "fit_ensemble", "fit_tree", "graph_from_edges", "line_graph", "load_model",
    "load_tudataset", "phi_graph", "phi_vertex", "predict", "predict_tree", "save_model",
    "save_tudataset", "walk_powers",
]
