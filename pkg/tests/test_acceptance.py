"""Acceptance criteria: one PASS/FAIL line per criterion, listed at the end of the run.

The numerical suites are hard gates and assert.  The training reproductions
are soft gates: a miss prints FAIL and is reported as an expected failure.
Each training run has an epoch budget in RUNS; ACCEPTANCE_EPOCHS lowers
every budget to at most that value, and ACCEPTANCE_SKIP_TRAINING=1 skips
the runs altogether.
"""
import functools
import logging
import os
import time
from pathlib import Path

import numpy as np
import pytest

from helpers import (
    ACCEPTANCE,
    ball_counts,
    ball_map,
    disc_dist,
    floyd_warshall,
    random_bounded,
    random_siegel,
    random_spd,
    random_symmetric,
    record,
    upper_half_plane_dist,
)
from siegel_embed.geometry import finsler_distances, make_space, random_symplectic
from siegel_embed.geometry import matrix_models as mm
from siegel_embed.graphs import (
    Graph,
    all_pairs_shortest_paths,
    build_dataset,
    largest_component,
    load_edge_list,
)
from siegel_embed.linalg import complex_inverse, pd_sqrt_inv, takagi
from siegel_embed.metrics import distance_matrix, mean_average_precision, neighbor_ranks
from siegel_embed.training import EmbeddingTable, TrainConfig, rsgd_step, train

SEED = 2024


@pytest.fixture
def arng():
    return np.random.default_rng(SEED)


def _gate(criterion, ok, detail):
    record(criterion, ok, detail)
    assert ok, f"{criterion}: {detail}"


# --- numerical kernels ------------------------------------------------------------------

def test_kernel_suite(arng):
    t0 = time.perf_counter()
    recon, unit = 0.0, 0.0
    for i in range(500):
        n = 1 + i % 6
        a = random_symmetric(arng, n) * arng.uniform(0.01, 100)
        fac = takagi(a)
        recon = max(recon, np.linalg.norm(fac.reconstruct() - a) / np.linalg.norm(a))
        k = fac.unitary
        unit = max(unit, np.linalg.norm(k.conj().T @ k - np.eye(n)))
    sqrt_res = 0.0
    for i in range(500):
        n = 1 + i % 6
        y = random_spd(arng, n)
        root, root_inv = pd_sqrt_inv(y)
        sqrt_res = max(sqrt_res, np.linalg.norm(root @ root - y) / np.linalg.norm(y),
                       np.linalg.norm(root @ root_inv - np.eye(n)))
    inv_res = 0.0
    for i in range(500):
        n = 1 + i % 6
        a = arng.normal(size=(n, n)) + 1j * arng.normal(size=(n, n))
        inv_res = max(inv_res, np.linalg.norm(a @ complex_inverse(a) - np.eye(n)))
    ok = recon <= 1e-9 and unit <= 1e-9 and sqrt_res <= 1e-9 and inv_res <= 1e-10
    _gate("numerical kernel suite", ok,
          f"Takagi recon {recon:.1e}, unitarity {unit:.1e}, PD-sqrt {sqrt_res:.1e}, "
          f"inverse {inv_res:.1e} ({time.perf_counter() - t0:.1f}s)")


# --- geometry oracles -------------------------------------------------------------------

def test_geometry_oracle_suite(arng):
    t0 = time.perf_counter()
    notes, ok = [], True

    z1 = arng.normal(size=1000) + 1j * arng.uniform(0.05, 5, 1000)
    z2 = arng.normal(size=1000) + 1j * arng.uniform(0.05, 5, 1000)
    err = np.max(np.abs(mm.dist_siegel(z1[:, None, None], z2[:, None, None]) - upper_half_plane_dist(z1, z2)))
    ok &= err <= 1e-9
    notes.append(f"n=1 upper {err:.1e}")

    r = arng.uniform(0, 0.95, (2, 1000))
    w = r * np.exp(2j * np.pi * arng.uniform(size=(2, 1000)))
    err = np.max(np.abs(mm.dist_bounded(w[0][:, None, None], w[1][:, None, None]) - disc_dist(w[0], w[1])))
    ok &= err <= 1e-9
    notes.append(f"n=1 disc {err:.1e}")

    a = arng.normal(size=(200, 4)) + 1j * arng.uniform(0.1, 3, (200, 4))
    b = arng.normal(size=(200, 4)) + 1j * arng.uniform(0.1, 3, (200, 4))
    diag = np.eye(4)
    err = np.max(np.abs(mm.dist_siegel(a[:, :, None] * diag, b[:, :, None] * diag)
                        - np.sqrt(np.sum(upper_half_plane_dist(a, b) ** 2, axis=1))))
    ok &= err <= 1e-8
    notes.append(f"diagonal {err:.1e}")

    wb = random_bounded(arng, 4, (200,), radius=0.99)
    zs = random_siegel(arng, 4, (200,))
    err = max(np.max(np.abs(mm.cayley_to_bounded(mm.cayley_to_upper(wb)) - wb)),
              np.max(np.abs(mm.cayley_to_upper(mm.cayley_to_bounded(zs)) - zs)))
    ok &= err <= 1e-9
    notes.append(f"Cayley {err:.1e}")

    err = 0.0
    for i in range(200):
        n = 2 + i % 3
        g = random_symplectic(n, SEED + i)
        p, q = random_siegel(arng, n), random_siegel(arng, n)
        moved = mm.dist_siegel(mm.symplectic_apply(g, p), mm.symplectic_apply(g, q))
        err = max(err, abs(moved - mm.dist_siegel(p, q)))
    ok &= err <= 1e-7
    notes.append(f"symplectic {err:.1e}")

    violations = 0
    for n in (2, 3, 4, 6):
        d = 2 * np.arctanh(mm.takagi_spectrum(random_siegel(arng, n, (250,)), random_siegel(arng, n, (250,))))
        f1, _ = finsler_distances(d)
        rd = np.sqrt(np.sum(d * d, axis=1))
        violations += int(np.sum(f1 / np.sqrt(n) > rd * (1 + 1e-12)) + np.sum(rd > f1 * (1 + 1e-12)))
    ok &= violations == 0
    notes.append(f"Finsler violations {violations}")

    err = 0.0
    for n in (2, 3, 4):
        p, q = random_siegel(arng, n, (200,)), random_siegel(arng, n, (200,))
        err = max(err, np.max(np.abs(mm.crossratio_eigen(p, q) - 2 * np.arctanh(mm.takagi_spectrum(p, q)))))
    ok &= err <= 1e-6
    notes.append(f"crossratio {err:.1e}")

    _gate("geometry oracle suite", bool(ok), ", ".join(notes) + f" ({time.perf_counter() - t0:.1f}s)")


# --- gradients --------------------------------------------------------------------------

GRADIENT_SPACES = ["siegel:2", "siegel:3", "siegel:4", "bounded:3", "poincare:5", "euclidean:5",
                   "poincare:3+siegel:2"]


def _sample(sp, rng, num):
    kind = sp.descriptor.kind
    if kind == "siegel_upper":
        return sp.to_flat(random_siegel(rng, sp.n, (num,)))
    if kind == "bounded_domain":
        return sp.to_flat(random_bounded(rng, sp.n, (num,)))
    if kind == "poincare":
        v = rng.normal(size=(num, sp.flat_dim))
        return v / np.linalg.norm(v, axis=1, keepdims=True) * rng.uniform(0, 0.9, (num, 1))
    if kind == "euclidean":
        return rng.normal(size=(num, sp.flat_dim))
    return np.concatenate([_sample(f, rng, num) for f in sp.factors], axis=1)


def _direction(sp, rng, num):
    kind = sp.descriptor.kind
    if kind in ("siegel_upper", "bounded_domain"):
        return sp.to_flat(random_symmetric(rng, sp.n, (num,)))
    if kind == "product":
        return np.concatenate([_direction(f, rng, num) for f in sp.factors], axis=1)
    return rng.normal(size=(num, sp.flat_dim))


def test_gradient_suite(arng):
    t0 = time.perf_counter()
    worst = {}
    h = 1e-6
    for text in GRADIENT_SPACES:
        sp = make_space(text)
        x, y, v = _sample(sp, arng, 100), _sample(sp, arng, 100), _direction(sp, arng, 100)
        _, gx, _ = sp.dist2_grad(x, y)
        fd = (sp.dist2(x + h * v, y) - sp.dist2(x - h * v, y)) / (2 * h)
        an = sp.inner(x, sp.rgrad(x, gx), v)
        worst[text] = float(np.max(np.abs(an - fd) / np.maximum(np.abs(fd), 1e-6)))
    ok = max(worst.values()) <= 1e-4
    detail = ", ".join(f"{k} {e:.1e}" for k, e in worst.items())
    _gate("gradient suite", ok, f"max relative error {detail} ({time.perf_counter() - t0:.1f}s)")


# --- graphs -----------------------------------------------------------------------------

TABLE = {
    "grid3d": (125, 300, 7750),
    "grid4d": (256, 768, 32640),
    "tree": (364, 363, 66066),
    "tree_x_grid": (135, 306, 9045),
    "tree_x_tree": (225, 420, 25200),
    "tree_o_grids": (496, 774, 122760),
    "grid_o_trees": (567, 570, 160461),
}


def test_graph_suite(arng):
    t0 = time.perf_counter()
    wrong = []
    for name, expected in TABLE.items():
        g = build_dataset(name)
        got = (g.num_nodes, g.num_edges, len(all_pairs_shortest_paths(g)))
        if got != expected:
            wrong.append(f"{name} {got} != {expected}")
    mismatched = 0
    for _ in range(50):
        n = int(arng.integers(2, 65))
        p = arng.uniform(0.02, 0.3)
        edges = [(u, v) for u in range(n) for v in range(u + 1, n) if arng.uniform() < p]
        g = Graph.from_edges(n, edges)
        fw = floyd_warshall(n, edges)
        for s in range(n):
            bfs = g.bfs(s).astype(float)
            bfs[bfs < 0] = np.inf
            mismatched += int(not np.array_equal(bfs, fw[s]))
    ok = not wrong and mismatched == 0
    detail = "; ".join(wrong) if wrong else "7/7 dataset rows exact"
    _gate("graph suite", ok, f"{detail}, BFS vs Floyd-Warshall mismatches {mismatched}/50 graphs "
                             f"({time.perf_counter() - t0:.1f}s)")


# --- metrics ----------------------------------------------------------------------------

def test_metric_suite(arng):
    t0 = time.perf_counter()
    sp = make_space("euclidean:2")
    rank_mismatch, map_err, graphs = 0, 0.0, 0
    while graphs < 50:
        n = int(arng.integers(3, 33))
        edges = [(u, v) for u in range(n) for v in range(u + 1, n) if arng.uniform() < 0.2]
        if not edges:
            continue
        graphs += 1
        g = Graph.from_edges(n, edges)
        pts = np.round(arng.normal(size=(n, 2)), 1)
        dist = distance_matrix(sp, pts)
        for a in range(n):
            if not g.neighbors(a):
                continue
            ranks = neighbor_ranks(dist[a], a, g.neighbors(a))
            rank_mismatch += int([(k + 1, int(r)) for k, r in enumerate(ranks)] != ball_counts(dist, g, a))
        map_err = max(map_err, abs(mean_average_precision(sp, pts, g, dist=dist) - ball_map(dist, g)))

    hyp = make_space("poincare:3")
    tree = build_dataset("tree")
    pts = hyp.random(tree.num_nodes, arng) * 200
    dist = distance_matrix(hyp, pts)
    base = mean_average_precision(hyp, pts, tree, dist=dist)
    variants = [mean_average_precision(hyp, pts, tree, dist=f(dist))
                for f in (np.sqrt, np.expm1, np.log1p, lambda d: 7 * d + 2)]
    invariant = all(v == base for v in variants)
    ok = rank_mismatch == 0 and map_err <= 1e-15 and invariant
    _gate("metric suite", ok, f"ball-oracle rank mismatches {rank_mismatch} on 50 graphs, "
                              f"mAP difference {map_err:.1e}, monotone invariance {invariant} "
                              f"({time.perf_counter() - t0:.1f}s)")


# --- training reproduction ----------------------------------------------------------------

# one grid point per run, chosen from the standard grid, with an epoch budget:
# the full schedule where a run is cheap, 400 epochs on the large rooted products
RUNS = {
    ("grid4d", "euclidean:20"): (0.01, 512, 100.0, 3000),
    ("tree", "poincare:20"): (0.02, 128, 100.0, 3000),
    ("tree_x_grid", "siegel:4"): (0.02, 128, 100.0, 3000),
    ("tree_o_grids", "siegel:4"): (0.02, 512, 100.0, 400),
    ("grid_o_trees", "siegel:4"): (0.02, 512, 100.0, 400),
    ("tree_o_grids", "euclidean:20"): (0.01, 512, 100.0, 400),
    ("grid_o_trees", "euclidean:20"): (0.01, 512, 100.0, 400),
    ("tree_o_grids", "poincare:20"): (0.01, 512, 100.0, 400),
    ("grid_o_trees", "poincare:20"): (0.01, 512, 100.0, 400),
}

def _skip_training(criterion):
    if os.environ.get("ACCEPTANCE_SKIP_TRAINING") == "1":
        ACCEPTANCE.append(f"SKIP  {criterion}: ACCEPTANCE_SKIP_TRAINING=1")
        pytest.skip("ACCEPTANCE_SKIP_TRAINING=1")


@functools.lru_cache(maxsize=None)
def _fit(dataset, space):
    lr, batch, clip, epochs = RUNS[(dataset, space)]
    epochs = min(epochs, int(os.environ.get("ACCEPTANCE_EPOCHS", epochs)))
    g = build_dataset(dataset)
    triplets = all_pairs_shortest_paths(g)
    cfg = TrainConfig(learning_rate=lr, batch_size=batch, max_grad_norm=clip, epochs=epochs, seed=SEED)
    t0 = time.perf_counter()
    _, report = train(triplets, space, cfg, graph=g)
    return report, time.perf_counter() - t0


def _describe(report, seconds):
    return (f"D_avg {report.final_d_avg:.4f}, mAP {report.final_map:.3f}, "
            f"{report.epochs_run} epochs, {seconds:.0f}s")


def _soft(criterion, ok, detail):
    record(criterion, ok, detail)
    if not ok:
        pytest.xfail(f"{criterion}: {detail}")


TARGETS = [
    ("grid4d", "euclidean:20", lambda r: abs(r.final_d_avg - 0.125) <= 0.02, "D_avg 0.125 +- 0.02"),
    ("tree", "poincare:20", lambda r: r.final_d_avg <= 0.03 and r.final_map == 1.0, "D_avg <= 0.03, mAP 1"),
    ("tree_x_grid", "siegel:4", lambda r: r.final_d_avg <= 0.135, "D_avg <= 0.135"),
    ("tree_o_grids", "siegel:4", lambda r: r.final_d_avg <= 0.04, "D_avg <= 0.04"),
    ("grid_o_trees", "siegel:4", lambda r: r.final_d_avg <= 0.04, "D_avg <= 0.04"),
]


@pytest.mark.slow
@pytest.mark.parametrize("dataset, space, check, target", TARGETS,
                         ids=[f"{d}-{s}" for d, s, _, _ in TARGETS])
def test_training_target(dataset, space, check, target):
    criterion = f"training {space} on {dataset} ({target})"
    _skip_training(criterion)
    report, seconds = _fit(dataset, space)
    _soft(criterion, check(report), _describe(report, seconds))


@pytest.mark.slow
@pytest.mark.parametrize("dataset", ["tree_o_grids", "grid_o_trees"])
def test_siegel_beats_baselines_on_rooted_products(dataset):
    criterion = f"ordering on {dataset} (siegel:4 strictly best)"
    _skip_training(criterion)
    results = {space: _fit(dataset, space)[0].final_d_avg
               for space in ("siegel:4", "euclidean:20", "poincare:20")}
    ok = results["siegel:4"] < min(results["euclidean:20"], results["poincare:20"])
    detail = ", ".join(f"{s} {d:.4f}" for s, d in results.items())
    _soft(criterion, ok, detail)


DISEASOME_CANDIDATES = [os.environ.get("DISEASOME_EDGES", ""), "data/bio-diseasome.txt",
                        "data/bio-diseasome.edges", "examples/bio-diseasome.edges"]


@pytest.mark.slow
def test_diseasome_target():
    root = Path(__file__).resolve().parents[1]
    path = next((root / p for p in DISEASOME_CANDIDATES if p and (root / p).is_file()), None)
    criterion = "training siegel:4 on bio-diseasome (D_avg <= 0.05)"
    _skip_training(criterion)
    if path is None:
        _soft(criterion, False, "dataset not available (set DISEASOME_EDGES to an edge list)")
    g = largest_component(load_edge_list(path))
    triplets = all_pairs_shortest_paths(g)
    cfg = TrainConfig(learning_rate=0.02, batch_size=512, max_grad_norm=100.0, seed=SEED,
                      epochs=int(os.environ.get("ACCEPTANCE_EPOCHS", 3000)))
    t0 = time.perf_counter()
    _, report = train(triplets, "siegel:4", cfg, graph=g)
    _soft(criterion, report.final_d_avg <= 0.05, _describe(report, time.perf_counter() - t0))


# --- stability ----------------------------------------------------------------------------

def _steps(space, steps, lr, rng, eps):
    g = build_dataset("tree_x_grid")
    triplets = all_pairs_shortest_paths(g)
    table = EmbeddingTable.random(space, g.num_nodes, SEED)
    cfg = TrainConfig(learning_rate=lr, batch_size=512, max_grad_norm=100.0, epsilon_projection=eps)
    violations, projected = 0, 0
    for _ in range(steps):
        idx = rng.choice(len(triplets), size=512, replace=False)
        step = rsgd_step(table, (triplets.u[idx], triplets.v[idx], triplets.d[idx]), lr, cfg)
        projected += step.projected
        pts = table.points
        if not np.all(np.isfinite(pts)):
            violations += 1
            continue
        z = table.manifold.to_matrix(pts)
        symmetric = np.max(np.abs(z - np.swapaxes(z, -1, -2))) <= 1e-12
        inside = np.min(table.margins()) >= eps * (1 - 1e-6)
        violations += int(not (symmetric and inside))
    return violations, projected


def test_stability(arng, caplog):
    t0 = time.perf_counter()
    eps = 1e-4
    violations, projected = _steps("siegel:4", 500, 0.02, arng, eps)
    b_violations, b_projected = _steps("bounded:4", 500, 0.02, arng, eps)
    if b_projected:
        logging.getLogger("siegel_embed.acceptance").warning(
            "bounded:4: %d projection(s) back into the model over 500 steps", b_projected)
    ok = violations == 0 and b_violations == 0
    _gate("stability (500 RSGD steps, siegel:4, lr 0.02)", ok,
          f"invariant violations {violations}, projections {projected}; "
          f"bounded:4 warnings (projections) {b_projected}, violations {b_violations} "
          f"({time.perf_counter() - t0:.1f}s)")
