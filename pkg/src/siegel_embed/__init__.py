"""Graph embeddings in Siegel spaces, with Euclidean and hyperbolic baselines."""
from . import geometry, graphs, linalg, metrics, training
from .geometry import SpaceDescriptor, make_space
from .graphs import Graph, TripletSet, all_pairs_shortest_paths, build_dataset
from .metrics import EvalResult, average_distortion, evaluate, mean_average_precision
from .training import EmbeddingTable, NumericalFailure, RunReport, TrainConfig, rsgd_step, train

__version__ = "0.1.0"

__all__ = [
    "EmbeddingTable", "EvalResult", "Graph", "NumericalFailure", "RunReport", "SpaceDescriptor",
    "TrainConfig", "TripletSet", "all_pairs_shortest_paths", "average_distortion", "build_dataset",
    "evaluate", "geometry", "graphs", "linalg", "make_space", "mean_average_precision", "metrics",
    "rsgd_step", "train", "training",
]
