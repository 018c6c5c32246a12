import json
import logging

import numpy as np
import pytest

from helpers import ball_counts, ball_map
from siegel_embed.geometry import make_space
from siegel_embed.graphs import Graph, TripletSet, all_pairs_shortest_paths, make_tree
from siegel_embed.metrics import (
    DataError,
    EvalResult,
    average_distortion,
    average_precision,
    distance_matrix,
    evaluate,
    mean_average_precision,
    neighbor_ranks,
)

LINE = make_space("euclidean:1")


def path_graph(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def test_distortion_exact_embedding_is_zero():
    g = path_graph(5)
    pts = np.arange(5.0)[:, None]
    assert average_distortion(LINE, pts, all_pairs_shortest_paths(g)) == 0.0


def test_distortion_single_pair():
    t = TripletSet([0], [1], [1.0], 2)
    assert average_distortion(LINE, np.array([[0.0], [1.5]]), t) == pytest.approx(0.5)


def test_distortion_mean_of_pairs():
    t = TripletSet([0, 0], [1, 2], [1.0, 1.0], 3)
    pts = np.array([[0.0], [1.2], [-1.4]])
    assert average_distortion(LINE, pts, t) == pytest.approx(0.3)


def test_distortion_is_not_scale_invariant():
    g = path_graph(4)
    t = all_pairs_shortest_paths(g)
    pts = np.array([[0.0], [1.1], [1.9], [3.2]])
    assert average_distortion(LINE, pts, t) != pytest.approx(average_distortion(LINE, 2 * pts, t))


def test_distortion_missing_node():
    t = TripletSet([0], [5], [1.0], 6)
    with pytest.raises(DataError):
        average_distortion(LINE, np.zeros((3, 1)), t)


def test_map_path_on_line():
    g = path_graph(4)
    assert mean_average_precision(LINE, np.arange(4.0)[:, None], g) == 1.0


def test_map_perfect_retrieval_star():
    g = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    assert mean_average_precision(make_space("euclidean:2"), pts, g) == 1.0


def test_average_precision_hand_example():
    # neighbors of node 0 are ranked first and third
    row = np.array([0.0, 1.0, 2.0, 3.0])
    assert average_precision(row, 0, [1, 3]) == pytest.approx(5 / 6)


def test_ties_broken_by_node_id():
    row = np.array([0.0, 1.0, 1.0, 1.0])
    assert average_precision(row, 0, [2]) == pytest.approx(1 / 2)
    assert average_precision(row, 0, [1]) == 1.0


def test_map_matches_ball_oracle(rng):
    sp = make_space("euclidean:2")
    for _ in range(20):
        n = int(rng.integers(3, 33))
        edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.uniform() < 0.2]
        g = Graph.from_edges(n, edges)
        if not edges:
            continue
        # rounding creates ties, exercising the tie rule
        pts = np.round(rng.normal(size=(n, 2)), 1)
        dist = distance_matrix(sp, pts)
        for a in range(n):
            ranks = neighbor_ranks(dist[a], a, g.neighbors(a)) if g.neighbors(a) else []
            assert [(k + 1, int(r)) for k, r in enumerate(ranks)] == ball_counts(dist, g, a)
        got = mean_average_precision(sp, pts, g, dist=dist)
        assert got == pytest.approx(ball_map(dist, g), abs=1e-15)


def test_map_monotone_invariance(rng):
    sp = make_space("poincare:3")
    g = make_tree(2, 3)
    pts = sp.random(g.num_nodes, rng) * 300
    dist = distance_matrix(sp, pts)
    base = mean_average_precision(sp, pts, g, dist=dist)
    for f in (np.sqrt, np.expm1, lambda d: 3 * d + 1):
        assert mean_average_precision(sp, pts, g, dist=f(dist)) == base


def test_map_bounds(rng):
    g = make_tree(3, 2)
    pts = rng.normal(size=(g.num_nodes, 2))
    value = mean_average_precision(make_space("euclidean:2"), pts, g)
    assert 0 <= value <= 1


def test_map_isolated_node_skipped(caplog):
    g = Graph.from_edges(3, [(0, 1)])
    with caplog.at_level(logging.WARNING):
        value, aps = mean_average_precision(LINE, np.array([[0.0], [1.0], [5.0]]), g,
                                            return_per_node=True)
    assert value == 1.0 and np.isnan(aps[2])
    assert "isolated" in caplog.text


def test_map_node_count_mismatch():
    with pytest.raises(DataError):
        mean_average_precision(LINE, np.zeros((2, 1)), path_graph(3))


def test_distance_matrix_symmetric(rng):
    sp = make_space("siegel:2")
    pts = sp.random(6, rng)
    d = distance_matrix(sp, pts)
    np.testing.assert_allclose(d, d.T)
    assert np.all(np.diag(d) == 0)


def test_eval_result_serialization():
    g = path_graph(3)
    res = evaluate(LINE, np.array([[0.0], [1.0], [2.5]]), all_pairs_shortest_paths(g), g, per_node=True)
    body = json.loads(res.to_json(dataset="p3"))
    assert body["dataset"] == "p3" and len(body["per_node_ap"]) == 3
    rows = res.to_csv("p3", "euclidean:1", 1, 0).splitlines()
    assert rows[0] == "dataset,space,dim,d_avg,map,seed"
    assert rows[1].startswith("p3,euclidean:1,1,")


def test_evaluate_without_graph():
    res = evaluate(LINE, np.array([[0.0], [1.0]]), TripletSet([0], [1], [1.0], 2))
    assert res == EvalResult(0.0, None)
