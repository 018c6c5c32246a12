"""Benchmark graphs, shortest-path triplets and dataset ingestion."""
from __future__ import annotations

import csv
import itertools
import logging
import warnings
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)


class GraphFormatError(ValueError):
    def __init__(self, message: str, path=None, line: Optional[int] = None):
        where = f"{path}:{line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes ``0 .. num_nodes - 1``."""

    num_nodes: int
    adjacency: tuple[tuple[int, ...], ...]
    labels: Optional[tuple[str, ...]] = None
    root: Optional[int] = None

    @classmethod
    def from_edges(cls, num_nodes: int, edges: Iterable[tuple[int, int]], labels=None,
                   root: Optional[int] = None) -> "Graph":
        nbrs: list[set[int]] = [set() for _ in range(num_nodes)]
        duplicates = 0
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise GraphFormatError(f"self-loop on node {u}")
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                raise GraphFormatError(f"edge ({u}, {v}) outside 0..{num_nodes - 1}")
            if v in nbrs[u]:
                duplicates += 1
            nbrs[u].add(v)
            nbrs[v].add(u)
        if duplicates:
            warnings.warn(f"dropped {duplicates} duplicate edge(s)", stacklevel=2)
        return cls(num_nodes, tuple(tuple(sorted(s)) for s in nbrs),
                   tuple(labels) if labels is not None else None, root)

    @property
    def num_edges(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u, nb in enumerate(self.adjacency) for v in nb if u < v]

    def degree(self, node: int) -> int:
        return len(self.adjacency[node])

    def neighbors(self, node: int) -> tuple[int, ...]:
        return self.adjacency[node]

    def bfs(self, source: int) -> np.ndarray:
        """Hop distances from ``source``; ``-1`` marks unreachable nodes."""
        dist = np.full(self.num_nodes, -1, dtype=np.int64)
        dist[source] = 0
        queue = deque([source])
        adj = self.adjacency
        while queue:
            u = queue.popleft()
            du = dist[u] + 1
            for v in adj[u]:
                if dist[v] < 0:
                    dist[v] = du
                    queue.append(v)
        return dist

    def components(self) -> list[list[int]]:
        seen = np.zeros(self.num_nodes, dtype=bool)
        comps = []
        for s in range(self.num_nodes):
            if not seen[s]:
                comp = np.flatnonzero(self.bfs(s) >= 0)
                seen[comp] = True
                comps.append(comp.tolist())
        return comps

    def is_connected(self) -> bool:
        return self.num_nodes == 0 or bool(np.all(self.bfs(0) >= 0))

    def subgraph(self, nodes: Sequence[int]) -> "Graph":
        index = {old: new for new, old in enumerate(nodes)}
        edges = [(index[u], index[v]) for u, v in self.edges() if u in index and v in index]
        labels = [self.labels[i] for i in nodes] if self.labels else [str(i) for i in nodes]
        root = index.get(self.root) if self.root is not None else None
        return Graph.from_edges(len(nodes), edges, labels, root)

    def stats(self) -> dict:
        return {"nodes": self.num_nodes, "edges": self.num_edges}


def largest_component(graph: Graph) -> Graph:
    comps = graph.components()
    if len(comps) <= 1:
        return graph
    best = max(comps, key=len)
    log.warning("graph has %d connected components; keeping the largest (%d of %d nodes)",
                len(comps), len(best), graph.num_nodes)
    return graph.subgraph(best)


@dataclass(frozen=True)
class TripletSet:
    """``(u, v, d)`` records with ``u < v``: one per connected pair."""

    u: np.ndarray
    v: np.ndarray
    d: np.ndarray
    node_count: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.int64)
        v = np.asarray(self.v, dtype=np.int64)
        d = np.asarray(self.d, dtype=float)
        if not (u.shape == v.shape == d.shape and u.ndim == 1):
            raise ValueError("u, v and d must be 1-D arrays of equal length")
        if np.any(u >= v):
            raise ValueError("triplets must satisfy u < v")
        if np.any(d <= 0):
            raise ValueError("graph distances must be positive")
        for name, arr in (("u", u), ("v", v), ("d", d)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.d)

    @property
    def records(self) -> list[tuple[int, int, float]]:
        return list(zip(self.u.tolist(), self.v.tolist(), self.d.tolist()))

    def distance_matrix(self) -> np.ndarray:
        n = self.node_count
        out = np.full((n, n), np.inf)
        np.fill_diagonal(out, 0.0)
        out[self.u, self.v] = self.d
        out[self.v, self.u] = self.d
        return out


# ----------------------------------------------------------------------------
# generators

def make_grid(dims: Sequence[int]) -> Graph:
    """Lattice graph, nodes numbered row-major; node 0 is the corner."""
    dims = tuple(int(x) for x in dims)
    if not dims:
        raise ValueError("grid needs at least one dimension")
    if len(dims) > 6:
        raise ValueError("grids are limited to 6 dimensions")
    if any(x < 2 for x in dims):
        raise ValueError(f"grid side lengths must be >= 2, got {dims}")
    shape = np.array(dims)
    strides = np.concatenate([np.cumprod(shape[::-1])[::-1][1:], [1]])
    edges = []
    for coord in itertools.product(*(range(x) for x in dims)):
        idx = int(np.dot(coord, strides))
        for axis, size in enumerate(dims):
            if coord[axis] + 1 < size:
                edges.append((idx, idx + int(strides[axis])))
    labels = ["x".join(map(str, c)) for c in itertools.product(*(range(x) for x in dims))]
    return Graph.from_edges(int(np.prod(shape)), edges, labels, root=0)


def make_tree(valency: int, height: int) -> Graph:
    """Complete rooted tree, nodes in BFS order with the root at 0."""
    if valency < 1:
        raise ValueError("valency must be >= 1")
    if height < 0:
        raise ValueError("height must be >= 0")
    edges, level, next_id = [], [0], 1
    for _ in range(height):
        new_level = []
        for parent in level:
            for _ in range(valency):
                edges.append((parent, next_id))
                new_level.append(next_id)
                next_id += 1
        level = new_level
    return Graph.from_edges(next_id, edges, root=0)


def cartesian_product(g: Graph, h: Graph) -> Graph:
    """Nodes ``(a, b) -> a * |V(h)| + b``."""
    if g.num_nodes == 0 or h.num_nodes == 0:
        raise ValueError("factors must be non-empty")
    nh = h.num_nodes
    edges = [(a * nh + b1, a * nh + b2) for a in range(g.num_nodes) for b1, b2 in h.edges()]
    edges += [(a1 * nh + b, a2 * nh + b) for a1, a2 in g.edges() for b in range(nh)]
    return Graph.from_edges(g.num_nodes * nh, edges)


def rooted_product(g: Graph, h: Graph, h_root: Optional[int] = None) -> Graph:
    """One copy of ``h`` per node of ``g``, glued at ``h_root``.

    Node ``(a, b) -> a * |V(h)| + b``; the copy attached to ``a`` has its root at
    ``a * |V(h)| + h_root``.  ``h_root`` defaults to ``h.root``.
    """
    if h_root is None:
        h_root = h.root if h.root is not None else 0
    if not 0 <= h_root < h.num_nodes:
        raise ValueError(f"root {h_root} is not a node of the inner graph")
    nh = h.num_nodes
    edges = [(a * nh + b1, a * nh + b2) for a in range(g.num_nodes) for b1, b2 in h.edges()]
    edges += [(a1 * nh + h_root, a2 * nh + h_root) for a1, a2 in g.edges()]
    root = g.root * nh + h_root if g.root is not None else None
    return Graph.from_edges(g.num_nodes * nh, edges, root=root)


def all_pairs_shortest_paths(g: Graph) -> TripletSet:
    """BFS from every node; one record per connected unordered pair, unscaled."""
    us, vs, ds = [], [], []
    missing = 0
    for s in range(g.num_nodes):
        dist = g.bfs(s)
        tail = dist[s + 1:]
        ok = tail > 0
        missing += int(np.sum(~ok))
        idx = np.flatnonzero(ok) + s + 1
        us.append(np.full(len(idx), s))
        vs.append(idx)
        ds.append(dist[idx])
    if missing:
        warnings.warn(f"{missing} node pair(s) are disconnected and were omitted", stacklevel=2)
    cat = (lambda xs: np.concatenate(xs) if xs else np.zeros(0, dtype=np.int64))
    return TripletSet(cat(us), cat(vs), cat(ds).astype(float), g.num_nodes)


# ----------------------------------------------------------------------------
# Table 6 style datasets

def build_dataset(name: str) -> Graph:
    """Named synthetic datasets used in the benchmarks."""
    key = name.lower().replace("-", "_")
    builders = {
        "grid3d": lambda: make_grid((5, 5, 5)),
        "grid4d": lambda: make_grid((4, 4, 4, 4)),
        "tree": lambda: make_tree(3, 5),
        "tree_x_grid": lambda: cartesian_product(make_tree(2, 3), make_grid((3, 3))),
        "tree_x_tree": lambda: cartesian_product(make_tree(2, 3), make_tree(2, 3)),
        "tree_o_grids": lambda: rooted_product(make_tree(2, 4), make_grid((4, 4))),
        "grid_o_trees": lambda: rooted_product(make_grid((3, 3)), make_tree(2, 5)),
    }
    if key not in builders:
        raise KeyError(f"unknown dataset {name!r}; choose from {sorted(builders)}")
    return builders[key]()


DATASETS = ("grid3d", "grid4d", "tree", "tree_x_grid", "tree_x_tree", "tree_o_grids", "grid_o_trees")


def parse_generator(text: str) -> Graph:
    """``tree:3,5`` / ``grid:5x5x5`` / a dataset name."""
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    if kind == "tree":
        valency, height = (int(x) for x in arg.split(","))
        return make_tree(valency, height)
    if kind == "grid":
        return make_grid([int(x) for x in arg.lower().split("x")])
    return build_dataset(text)


# ----------------------------------------------------------------------------
# files

def _lines(path):
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield lineno, line


def load_edge_list(path, relabel: bool = True) -> Graph:
    """Whitespace-separated ``u v`` pairs, ``#`` comments.

    Node ids are relabelled to ``0 .. n-1`` in sorted order of the original ids;
    the original ids are kept as labels.  A leading ``# nodes N ...`` comment,
    as written by :func:`save_edge_list`, keeps ids as they are and preserves
    isolated nodes.
    """
    declared = None
    with open(path) as fh:
        first = fh.readline().split()
    if len(first) >= 3 and first[:2] == ["#", "nodes"] and first[2].isdigit():
        declared = int(first[2])
    raw_edges = []
    for lineno, line in _lines(path):
        parts = line.replace(",", " ").split()
        if len(parts) < 2:
            raise GraphFormatError(f"expected 'u v', got {line!r}", path, lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"non-integer node id in {line!r}", path, lineno) from None
        if u == v:
            raise GraphFormatError(f"self-loop {line!r}", path, lineno)
        raw_edges.append((u, v))
    ids = sorted({x for e in raw_edges for x in e})
    if declared is not None and all(0 <= x < declared for x in ids):
        return Graph.from_edges(declared, raw_edges)
    if relabel:
        index = {old: new for new, old in enumerate(ids)}
        edges = [(index[u], index[v]) for u, v in raw_edges]
        return Graph.from_edges(len(ids), edges, [str(i) for i in ids])
    return Graph.from_edges(max(ids) + 1 if ids else 0, raw_edges)


def save_edge_list(graph: Graph, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# nodes {graph.num_nodes} edges {graph.num_edges}\n")
        for u, v in graph.edges():
            fh.write(f"{u} {v}\n")


def load_triplets(path) -> TripletSet:
    """CSV rows ``u,v,d``; ``d`` may be fractional.  A header row is skipped."""
    rows: dict[tuple[int, int], float] = {}
    duplicates = 0
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if len(row) < 3:
                raise GraphFormatError(f"expected 'u,v,d', got {row!r}", path, lineno)
            try:
                u, v, d = int(row[0]), int(row[1]), float(row[2])
            except ValueError:
                if lineno == 1:
                    continue
                raise GraphFormatError(f"cannot parse {row!r}", path, lineno) from None
            if u == v:
                raise GraphFormatError(f"pair of identical nodes {row!r}", path, lineno)
            if not d > 0:
                raise GraphFormatError(f"distance must be positive in {row!r}", path, lineno)
            key = (min(u, v), max(u, v))
            if key in rows:
                if rows[key] != d:
                    raise GraphFormatError(f"conflicting distance for pair {key}: {rows[key]} vs {d}",
                                           path, lineno)
                duplicates += 1
            rows[key] = d
    if duplicates:
        warnings.warn(f"dropped {duplicates} duplicate triplet row(s)", stacklevel=2)
    keys = sorted(rows)
    u = np.array([k[0] for k in keys], dtype=np.int64)
    v = np.array([k[1] for k in keys], dtype=np.int64)
    d = np.array([rows[k] for k in keys], dtype=float)
    n = int(max(u.max(initial=-1), v.max(initial=-1)) + 1)
    return TripletSet(u, v, d, n)


def save_triplets(triplets: TripletSet, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "v", "d"])
        integral = np.all(triplets.d == np.round(triplets.d))
        for u, v, d in zip(triplets.u.tolist(), triplets.v.tolist(), triplets.d.tolist()):
            w.writerow([u, v, int(d) if integral else repr(d)])
