"""Reconstruction fidelity: average distortion and mean average precision."""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry.spaces import Space
from .graphs import Graph, TripletSet

log = logging.getLogger(__name__)

EVAL_CHUNK = 8192


class DataError(ValueError):
    pass


@dataclass
class EvalResult:
    d_avg: float
    map: Optional[float]
    per_node_ap: Optional[list] = None

    def to_json(self, **extra) -> str:
        body = {"d_avg": self.d_avg, "map": self.map, **extra}
        if self.per_node_ap is not None:
            body["per_node_ap"] = self.per_node_ap
        return json.dumps(body, indent=2)

    CSV_FIELDS = ("dataset", "space", "dim", "d_avg", "map", "seed")

    def csv_row(self, dataset: str, space: str, dim: int, seed: int) -> dict:
        return {"dataset": dataset, "space": space, "dim": dim,
                "d_avg": self.d_avg, "map": self.map, "seed": seed}

    def to_csv(self, dataset: str, space: str, dim: int, seed: int) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.CSV_FIELDS)
        w.writeheader()
        w.writerow(self.csv_row(dataset, space, dim, seed))
        return buf.getvalue()


def pair_distances(space: Space, points: np.ndarray, u: np.ndarray, v: np.ndarray,
                   chunk: int = EVAL_CHUNK) -> np.ndarray:
    out = np.empty(len(u))
    for start in range(0, len(u), chunk):
        sl = slice(start, start + chunk)
        out[sl] = space.dist(points[u[sl]], points[v[sl]])
    return out


def distance_matrix(space: Space, points: np.ndarray) -> np.ndarray:
    """Symmetric matrix of embedding distances with a zero diagonal."""
    n = len(points)
    iu, iv = np.triu_indices(n, k=1)
    d = pair_distances(space, points, iu, iv)
    out = np.zeros((n, n))
    out[iu, iv] = d
    out[iv, iu] = d
    return out


def _check_nodes(points: np.ndarray, triplets: TripletSet) -> None:
    if len(triplets) and max(int(triplets.u.max()), int(triplets.v.max())) >= len(points):
        raise DataError(f"triplets reference node {max(triplets.u.max(), triplets.v.max())} "
                        f"but only {len(points)} embeddings exist")


def distortion_terms(embedding_dist: np.ndarray, graph_dist: np.ndarray) -> np.ndarray:
    return np.abs(embedding_dist - graph_dist) / graph_dist


def average_distortion(space: Space, points: np.ndarray, triplets: TripletSet) -> float:
    """Mean of ``|d_emb - d_graph| / d_graph`` over every triplet."""
    _check_nodes(points, triplets)
    d = pair_distances(space, points, triplets.u, triplets.v)
    return float(np.mean(distortion_terms(d, triplets.d)))


def neighbor_ranks(dist_row: np.ndarray, node: int, neighbors) -> np.ndarray:
    """Ascending 1-based ranks of ``neighbors`` when the other nodes are sorted by (distance, id).

    The k-th entry is the size of the smallest ball around ``node`` that holds
    k true neighbors.
    """
    n = len(dist_row)
    others = np.delete(np.arange(n), node)
    order = others[np.lexsort((others, dist_row[others]))]
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(1, n)
    return np.sort(rank[list(neighbors)])


def average_precision(dist_row: np.ndarray, node: int, neighbors) -> float:
    """AP of one node: rank the others by (distance, id) and score each true neighbor."""
    ranks = neighbor_ranks(dist_row, node, neighbors)
    return float(np.mean(np.arange(1, len(ranks) + 1) / ranks))


def mean_average_precision(space: Space, points: np.ndarray, graph: Graph,
                           dist: Optional[np.ndarray] = None, return_per_node: bool = False):
    """Mean over non-isolated nodes of the average precision of neighbor retrieval."""
    if graph.num_nodes != len(points):
        raise DataError(f"graph has {graph.num_nodes} nodes but {len(points)} embeddings were given")
    if dist is None:
        dist = distance_matrix(space, points)
    aps = []
    isolated = 0
    for a in range(graph.num_nodes):
        nb = graph.neighbors(a)
        if not nb:
            isolated += 1
            aps.append(float("nan"))
            continue
        aps.append(average_precision(dist[a], a, nb))
    if isolated:
        log.warning("skipped %d isolated node(s) in mAP", isolated)
    valid = [x for x in aps if not np.isnan(x)]
    value = float(np.mean(valid)) if valid else float("nan")
    if return_per_node:
        return value, aps
    return value


def evaluate(space: Space, points: np.ndarray, triplets: TripletSet,
             graph: Optional[Graph] = None, per_node: bool = False) -> EvalResult:
    d_avg = average_distortion(space, points, triplets)
    if graph is None:
        return EvalResult(d_avg, None)
    value, aps = mean_average_precision(space, points, graph, return_per_node=True)
    return EvalResult(d_avg, value, aps if per_node else None)


__all__ = ["DataError", "EvalResult", "average_distortion", "average_precision", "distance_matrix",
           "distortion_terms", "evaluate", "mean_average_precision", "neighbor_ranks", "pair_distances"]
