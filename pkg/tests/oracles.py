"""Brute-force reference computations shared by the unit and acceptance tests.

Nothing here imports the package under test.
"""
import itertools
import math

import numpy as np


def simple_path_distances(n, edges, alpha, source):
    """min over simple paths of (sum len**alpha)**(1/alpha), by exhaustive DFS.

    ``edges`` maps (i, j) with i < j to a Euclidean length.
    """
    adj = {v: [] for v in range(n)}
    for (i, j), w in edges.items():
        adj[i].append((j, w))
        adj[j].append((i, w))
    best = [math.inf] * n
    best[source] = 0.0
    visited = [False] * n
    visited[source] = True

    def walk(v, acc):
        for u, w in adj[v]:
            if not visited[u]:
                cost = acc + w ** alpha
                best[u] = min(best[u], cost)
                visited[u] = True
                walk(u, cost)
                visited[u] = False

    walk(source, 0.0)
    return np.array([b ** (1.0 / alpha) if math.isfinite(b) else math.inf for b in best])


def random_small_graph(rng, n=None, p=None):
    """Random points in the plane with a random subset of the complete edge set."""
    n = n or int(rng.integers(2, 9))
    pts = rng.uniform(0, 10, size=(n, 2))
    p = rng.uniform(0.3, 1.0) if p is None else p
    edges = {}
    for i, j in itertools.combinations(range(n), 2):
        if rng.uniform() < p:
            edges[(i, j)] = float(np.sqrt(np.sum((pts[i] - pts[j]) ** 2)))
    return pts, edges


def euclidean_matrix(points):
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = math.sqrt(sum((a - b) ** 2 for a, b in zip(pts[i], pts[j])))
    return out


def triangle_violation(dist, rng, triples=1000):
    """Largest dist[i,k] - dist[i,j] - dist[j,k] over randomly sampled triples."""
    n = dist.shape[0]
    idx = rng.integers(0, n, size=(triples, 3))
    i, j, k = idx.T
    return float(np.max(dist[i, k] - dist[i, j] - dist[j, k]))
