"""Random inputs shared by the test modules."""
import numpy as np


def random_complex(rng, n, batch=()):
    return rng.normal(size=batch + (n, n)) + 1j * rng.normal(size=batch + (n, n))


def random_symmetric(rng, n, batch=()):
    a = random_complex(rng, n, batch)
    return (a + np.swapaxes(a, -1, -2)) / 2


def random_spd(rng, n, batch=(), floor=0.3):
    a = rng.normal(size=batch + (n, n))
    return a @ np.swapaxes(a, -1, -2) / n + floor * np.eye(n)


def random_siegel(rng, n, batch=(), scale=1.0):
    x = rng.normal(size=batch + (n, n)) * scale
    x = (x + np.swapaxes(x, -1, -2)) / 2
    return x + 1j * random_spd(rng, n, batch)


def random_bounded(rng, n, batch=(), radius=0.9):
    """Symmetric matrices with largest singular value below ``radius``."""
    z = random_symmetric(rng, n, batch)
    s = np.linalg.norm(z, ord=2, axis=(-2, -1))
    r = rng.uniform(0.05, radius, size=s.shape)
    return z * (r / s)[..., None, None]


def naive_matmul(a, b):
    """Triple-loop product; the reference for the real-arithmetic kernel."""
    n, m, p = len(a), len(b), len(b[0])
    out = [[0j] * p for _ in range(n)]
    for i in range(n):
        for j in range(p):
            acc = 0j
            for k in range(m):
                acc += complex(a[i][k]) * complex(b[k][j])
            out[i][j] = acc
    return np.array(out)


def floyd_warshall(n, edges):
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0)
    for u, v in edges:
        d[u, v] = d[v, u] = 1
    for k in range(n):
        d = np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :])
    return d


def upper_half_plane_dist(z1, z2):
    """Scalar closed form ``arccosh(1 + |z1 - z2|^2 / (2 y1 y2))``."""
    return np.arccosh(1 + abs(z1 - z2) ** 2 / (2 * z1.imag * z2.imag))


def disc_dist(w1, w2):
    return 2 * np.arctanh(abs(w1 - w2) / abs(1 - np.conj(w1) * w2))


def ball_counts(dist, graph, a):
    """Brute force: for each true neighbor b, grow the ball around a until it holds b.

    Ties are resolved by node id, so the ball for b contains every node strictly
    closer than b plus tied nodes with an id up to b's.  Returns the sorted
    ``(|N(a) & ball|, |ball|)`` pairs.
    """
    n = len(dist)
    nbrs = set(graph.neighbors(a))
    out = []
    for b in nbrs:
        ball = [c for c in range(n) if c != a and
                (dist[a, c] < dist[a, b] or (dist[a, c] == dist[a, b] and c <= b))]
        out.append((sum(1 for c in ball if c in nbrs), len(ball)))
    return sorted(out)


def ball_map(dist, graph):
    aps = []
    for a in range(len(dist)):
        counts = ball_counts(dist, graph, a)
        if counts:
            aps.append(np.mean([k / size for k, size in counts]))
    return float(np.mean(aps))


# one "PASS/FAIL <criterion>: <detail>" line per acceptance check, printed at session end
ACCEPTANCE = []


def record(criterion, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'}  {criterion}" + (f": {detail}" if detail else "")
    ACCEPTANCE.append(line)
    print(line)
    return ok
