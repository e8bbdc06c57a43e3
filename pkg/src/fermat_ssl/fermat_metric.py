"""Power-weighted shortest paths and the scaled sample Fermat distance.

For a graph over the pooled sample, the power-alpha path distance between two
vertices is the minimum over graph paths of ``(sum of segment_length**alpha)
** (1/alpha)``. The Fermat distance estimate multiplies it by
``n ** ((alpha - 1) / (alpha * d))``, with ``d`` the intrinsic dimension.
The percolation constant of the continuum limit is taken to be 1, so every
distance reported here is defined only up to that global constant.
"""
from __future__ import annotations

import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial.distance import cdist

from .point_graph import (
    COMPLETE,
    KNN_MST,
    AdjacencyGraph,
    as_cloud,
    build_graph,
    default_graph_k,
)

WORKERS_ENV = "FERMAT_SSL_WORKERS"

# exponent budget before edge lengths get rescaled; exp(600) ~ 1e260
_LOG_GUARD = 600.0


@dataclass(frozen=True)
class FermatParams:
    alpha: float = 4.0
    intrinsic_dim: int | None = None
    graph_kind: str = KNN_MST
    knn_k: int | None = None

    def __post_init__(self):
        if not self.alpha >= 1:
            raise ValueError(f"alpha must be >= 1, got {self.alpha}")
        if self.intrinsic_dim is not None and int(self.intrinsic_dim) < 1:
            raise ValueError(f"intrinsic_dim must be >= 1, got {self.intrinsic_dim}")
        if self.graph_kind not in (COMPLETE, KNN_MST):
            raise ValueError(f"graph_kind must be {COMPLETE!r} or {KNN_MST!r}, got {self.graph_kind!r}")
        if self.knn_k is not None and self.knn_k < 1:
            raise ValueError(f"knn_k must be positive, got {self.knn_k}")


def fermat_scale(n: int, alpha: float, intrinsic_dim: int) -> float:
    return float(n) ** ((alpha - 1.0) / (alpha * intrinsic_dim))


@dataclass
class FermatMatrix:
    dist: np.ndarray
    alpha: float
    intrinsic_dim: int
    scale: float
    graph_kind: str | None = None
    knn_k: int | None = None
    graph: AdjacencyGraph | None = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def params(self) -> FermatParams:
        return FermatParams(self.alpha, self.intrinsic_dim, self.graph_kind or KNN_MST, self.knn_k)

    # -- serialization -----------------------------------------------------

    def to_csv(self, path) -> None:
        np.savetxt(path, self.dist, delimiter=",", fmt="%.17g")

    @classmethod
    def from_csv(cls, path, alpha: float = float("nan"), intrinsic_dim: int = 0,
                 scale: float = float("nan")) -> "FermatMatrix":
        dist = np.loadtxt(path, delimiter=",", ndmin=2)
        if dist.shape[0] != dist.shape[1]:
            raise ValueError(f"{path}: distance matrix is not square {dist.shape}")
        return cls(dist=dist, alpha=alpha, intrinsic_dim=intrinsic_dim, scale=scale)

    def to_binary(self, path) -> None:
        """Little-endian: u64 n, f64 alpha, u64 d, f64 scale, then n*n f64 row-major."""
        header = struct.pack("<QdQd", self.n, self.alpha, int(self.intrinsic_dim), self.scale)
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(self.dist, dtype="<f8").tobytes())

    @classmethod
    def from_binary(cls, path) -> "FermatMatrix":
        raw = Path(path).read_bytes()
        hsize = struct.calcsize("<QdQd")
        if len(raw) < hsize:
            raise ValueError(f"{path}: truncated header")
        n, alpha, d, scale = struct.unpack("<QdQd", raw[:hsize])
        body = raw[hsize:]
        if len(body) != 8 * n * n:
            raise ValueError(f"{path}: expected {8 * n * n} payload bytes, found {len(body)}")
        dist = np.frombuffer(body, dtype="<f8").reshape(n, n).astype(np.float64)
        return cls(dist=dist, alpha=alpha, intrinsic_dim=int(d), scale=scale)


def _n_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _power_weights(length: np.ndarray, alpha: float) -> tuple[np.ndarray, float]:
    """Edge weights length**alpha, plus the length unit they are expressed in."""
    positive = length[length > 0]
    unit = 1.0
    if positive.size:
        lo, hi = np.log(positive.min()), np.log(positive.max())
        if alpha * max(abs(lo), abs(hi)) > _LOG_GUARD:
            unit = float(positive.max())
    return (length / unit) ** alpha, unit


def _power_dijkstra(adj: csr_matrix, alpha: float, unit: float, sources, workers: int = 1) -> np.ndarray:
    sources = np.atleast_1d(np.asarray(sources, dtype=np.int64))
    if workers > 1 and len(sources) > 1:
        chunks = np.array_split(sources, workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: dijkstra(adj, directed=False, indices=c), chunks))
        cost = np.vstack(parts)
    else:
        cost = dijkstra(adj, directed=False, indices=sources)
    cost = np.atleast_2d(cost)
    if alpha == 1.0:
        return cost * unit
    return cost ** (1.0 / alpha) * unit


def _check_alpha(alpha: float) -> None:
    if not alpha >= 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")


def power_path_distances(graph: AdjacencyGraph, alpha: float, source: int) -> np.ndarray:
    """Single-source power-alpha path distances; unreachable vertices are +inf."""
    _check_alpha(alpha)
    if not 0 <= source < graph.n:
        raise IndexError(f"source {source} out of range [0, {graph.n})")
    w, unit = _power_weights(graph.length, alpha)
    return _power_dijkstra(graph.to_csr(w), alpha, unit, source)[0]


def power_distance_matrix(graph: AdjacencyGraph, alpha: float, workers: int | None = None) -> np.ndarray:
    """All-pairs power-alpha path distances (unscaled), exactly symmetric."""
    _check_alpha(alpha)
    w, unit = _power_weights(graph.length, alpha)
    out = _power_dijkstra(graph.to_csr(w), alpha, unit, np.arange(graph.n),
                          workers=_n_workers() if workers is None else workers)
    # i->j and j->i can differ in the last bit; both are valid path costs
    out = np.minimum(out, out.T)
    np.fill_diagonal(out, 0.0)
    return out


def resolve_intrinsic_dim(cloud, intrinsic_dim: int | None) -> int:
    if intrinsic_dim is not None:
        return int(intrinsic_dim)
    from .datagen import estimate_intrinsic_dim

    return max(1, int(np.floor(estimate_intrinsic_dim(cloud) + 0.5)))


def fermat_matrix(cloud, params: FermatParams = FermatParams(), workers: int | None = None) -> FermatMatrix:
    cloud = as_cloud(cloud)
    d = resolve_intrinsic_dim(cloud, params.intrinsic_dim)
    k = params.knn_k
    if params.graph_kind == KNN_MST and k is None:
        k = default_graph_k(cloud.n)
    graph = build_graph(cloud, params.graph_kind, k)
    raw = power_distance_matrix(graph, params.alpha, workers=workers)
    if not np.all(np.isfinite(raw)):
        raise ValueError("graph is disconnected: some Fermat distances are infinite")
    scale = fermat_scale(cloud.n, params.alpha, d)
    return FermatMatrix(dist=raw * scale, alpha=float(params.alpha), intrinsic_dim=d, scale=scale,
                        graph_kind=params.graph_kind, knn_k=k, graph=graph)


def default_k0(graph: AdjacencyGraph) -> int:
    """Average degree of the graph, rounded half up, at least 1."""
    return max(1, int(np.floor(graph.average_degree() + 0.5)))


def extend_out_of_sample(graph: AdjacencyGraph, cloud, x_new, alpha: float, scale: float = 1.0,
                         k0: int | None = None) -> np.ndarray:
    """Scaled distances from a new point to every vertex of ``graph``.

    The new point is attached to its ``k0`` Euclidean-nearest sample points
    (ties by smaller index) and shortest paths are run from it on the
    augmented graph. ``graph`` itself is left untouched.
    """
    _check_alpha(alpha)
    cloud = as_cloud(cloud)
    n = graph.n
    if cloud.n != n:
        raise ValueError(f"cloud has {cloud.n} points but graph has {n} vertices")
    if k0 is None:
        k0 = default_k0(graph)
    if not 1 <= k0 <= n:
        raise ValueError(f"k0 must lie in [1, {n}], got {k0}")
    x_new = np.asarray(x_new, dtype=np.float64).reshape(1, -1)
    if x_new.shape[1] != cloud.dim:
        raise ValueError(f"x_new has dimension {x_new.shape[1]}, expected {cloud.dim}")
    d_new = cdist(x_new, cloud.points)[0]
    nearest = np.argsort(d_new, kind="stable")[:k0]

    src = np.concatenate([graph.src, nearest])
    dst = np.concatenate([graph.dst, np.full(k0, n, dtype=np.int64)])
    length = np.concatenate([graph.length, d_new[nearest]])
    w, unit = _power_weights(length, alpha)
    adj = csr_matrix((np.concatenate([w, w]), (np.concatenate([src, dst]), np.concatenate([dst, src]))),
                     shape=(n + 1, n + 1))
    out = _power_dijkstra(adj, alpha, unit, n)[0]
    return out[:n] * scale


def extend_matrix(fm: FermatMatrix, cloud, x_new, k0: int | None = None) -> np.ndarray:
    """Out-of-sample distances using the graph and scale stored on ``fm``."""
    if fm.graph is None:
        raise ValueError("FermatMatrix carries no graph; rebuild it with fermat_matrix()")
    return extend_out_of_sample(fm.graph, cloud, x_new, fm.alpha, scale=fm.scale, k0=k0)
