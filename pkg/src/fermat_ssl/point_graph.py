"""Point clouds and the Euclidean adjacency graphs built over them.

Four graph kinds are supported: the complete graph, the symmetrized k-NN
graph, the Euclidean minimum spanning tree, and the union of the last two.
All neighbor searches are brute force over the full pairwise distance
matrix, with ties between equidistant candidates broken by smaller index.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

COMPLETE = "complete"
KNN = "knn"
MST = "mst"
KNN_MST = "knn_mst"

GRAPH_KINDS = (COMPLETE, KNN, MST, KNN_MST)


@dataclass(frozen=True)
class PointCloud:
    """n points in R^D, stored row-wise."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise ValueError(f"points must be a 2-d array, got shape {pts.shape}")
        if pts.shape[0] < 2:
            raise ValueError(f"need at least 2 points, got {pts.shape[0]}")
        if pts.shape[1] < 1:
            raise ValueError("ambient dimension must be >= 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def pairwise(self) -> np.ndarray:
        """Full n x n Euclidean distance matrix."""
        return cdist(self.points, self.points)


def as_cloud(x) -> PointCloud:
    return x if isinstance(x, PointCloud) else PointCloud(x)


@dataclass(frozen=True)
class AdjacencyGraph:
    """Undirected weighted graph on vertices 0..n-1.

    Edges are stored once as ``(src[e], dst[e])`` with ``src < dst``, sorted
    lexicographically; ``length[e]`` is the Euclidean length of the edge.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    length: np.ndarray
    kind: str
    _csr: list = field(default_factory=list, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in GRAPH_KINDS:
            raise ValueError(f"unknown graph kind {self.kind!r}")
        for name in ("src", "dst", "length"):
            arr = np.ascontiguousarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    def edge_set(self) -> set[tuple[int, int]]:
        return set(zip(self.src.tolist(), self.dst.tolist()))

    def to_csr(self, weights: np.ndarray | None = None) -> csr_matrix:
        """Symmetric sparse matrix; zero-length edges are kept as explicit entries."""
        w = self.length if weights is None else weights
        rows = np.concatenate([self.src, self.dst])
        cols = np.concatenate([self.dst, self.src])
        vals = np.concatenate([w, w])
        m = csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))
        m.sort_indices()
        return m

    def _adjacency(self) -> csr_matrix:
        if not self._csr:
            self._csr.append(self.to_csr())
        return self._csr[0]

    def neighbors(self, i: int) -> np.ndarray:
        adj = self._adjacency()
        return adj.indices[adj.indptr[i]:adj.indptr[i + 1]].copy()

    def degrees(self) -> np.ndarray:
        return np.diff(self._adjacency().indptr)

    def average_degree(self) -> float:
        return 2.0 * self.n_edges / self.n

    def n_components(self) -> int:
        return int(connected_components(self._adjacency(), directed=False)[0])

    def is_connected(self) -> bool:
        return self.n_components() == 1


def _from_pairs(n, i, j, dist, kind) -> AdjacencyGraph:
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    keys = np.unique(lo * n + hi)
    src, dst = keys // n, keys % n
    return AdjacencyGraph(n=n, src=src, dst=dst, length=dist[src, dst], kind=kind)


def build_complete_graph(cloud) -> AdjacencyGraph:
    cloud = as_cloud(cloud)
    n = cloud.n
    src, dst = np.triu_indices(n, k=1)
    return AdjacencyGraph(n=n, src=src.astype(np.int64), dst=dst.astype(np.int64),
                          length=cloud.pairwise()[src, dst], kind=COMPLETE)


def knn_indices(dist: np.ndarray, k: int) -> np.ndarray:
    """Row-wise indices of the k nearest other points (ties -> smaller index)."""
    d = np.array(dist, dtype=np.float64, copy=True)
    np.fill_diagonal(d, np.inf)
    kth = np.partition(d, k - 1, axis=1)[:, k - 1]
    out = np.empty((d.shape[0], k), dtype=np.int64)
    for i in range(d.shape[0]):
        # every point tied with the k-th distance is a candidate; flatnonzero
        # yields them in index order and the stable sort preserves it
        cand = np.flatnonzero(d[i] <= kth[i])
        out[i] = cand[np.argsort(d[i, cand], kind="stable")[:k]]
    return out


def build_knn_graph(cloud, k: int, dist: np.ndarray | None = None) -> AdjacencyGraph:
    """Symmetrized ("or" rule) k-NN graph. May be disconnected."""
    cloud = as_cloud(cloud)
    n = cloud.n
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must lie in [1, {n - 1}], got {k}")
    if dist is None:
        dist = cloud.pairwise()
    nbrs = knn_indices(dist, k)
    rows = np.repeat(np.arange(n), k)
    return _from_pairs(n, rows, nbrs.ravel(), dist, KNN)


def build_mst(cloud, dist: np.ndarray | None = None) -> AdjacencyGraph:
    """Euclidean minimum spanning tree by dense Prim, O(n^2).

    Unlike scipy's csgraph routine this keeps zero-length edges between
    duplicate points, so the tree always spans.
    """
    cloud = as_cloud(cloud)
    n = cloud.n
    if dist is None:
        dist = cloud.pairwise()
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = dist[0].copy()
    parent = np.zeros(n, dtype=np.int64)
    best[0] = np.inf
    src = np.empty(n - 1, dtype=np.int64)
    dst = np.empty(n - 1, dtype=np.int64)
    for e in range(n - 1):
        v = int(np.argmin(best))
        src[e], dst[e] = parent[v], v
        in_tree[v] = True
        best[v] = np.inf
        closer = (~in_tree) & (dist[v] < best)
        best[closer] = dist[v][closer]
        parent[closer] = v
    return _from_pairs(n, src, dst, dist, MST)


def union_graphs(a: AdjacencyGraph, b: AdjacencyGraph) -> AdjacencyGraph:
    if a.n != b.n:
        raise ValueError(f"vertex counts differ: {a.n} vs {b.n}")
    n = a.n
    keys = np.concatenate([a.src * n + a.dst, b.src * n + b.dst])
    lengths = np.concatenate([a.length, b.length])
    keys, first = np.unique(keys, return_index=True)
    if a.kind == b.kind:
        kind = a.kind
    elif COMPLETE in (a.kind, b.kind):
        kind = COMPLETE
    else:
        kind = KNN_MST
    return AdjacencyGraph(n=n, src=keys // n, dst=keys % n, length=lengths[first], kind=kind)


def default_graph_k(n: int) -> int:
    """Neighbor count [sqrt(n)/2], rounded half up, at least 1."""
    return int(min(max(1, np.floor(np.sqrt(n) / 2 + 0.5)), n - 1))


def build_knn_mst_graph(cloud, k: int | None = None) -> AdjacencyGraph:
    cloud = as_cloud(cloud)
    if k is None:
        k = default_graph_k(cloud.n)
    dist = cloud.pairwise()
    return union_graphs(build_knn_graph(cloud, k, dist=dist), build_mst(cloud, dist=dist))


def build_graph(cloud, kind: str, k: int | None = None) -> AdjacencyGraph:
    cloud = as_cloud(cloud)
    if kind == COMPLETE:
        return build_complete_graph(cloud)
    if kind == KNN_MST:
        return build_knn_mst_graph(cloud, k)
    if kind == KNN:
        return build_knn_graph(cloud, default_graph_k(cloud.n) if k is None else k)
    if kind == MST:
        return build_mst(cloud)
    raise ValueError(f"unknown graph kind {kind!r}")
