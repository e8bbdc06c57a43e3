"""Classical MDS of Fermat matrices and a linear SVM on the embedded points."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial.distance import pdist, squareform

from .classifiers import stratified_folds
from .fermat_metric import FermatMatrix, FermatParams, fermat_matrix

DEFAULT_COST_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)


def _as_dist(dist) -> np.ndarray:
    d = dist.dist if isinstance(dist, FermatMatrix) else dist
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"distance matrix must be square, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise ValueError("distance matrix has non-finite entries")
    if np.any(d < 0):
        raise ValueError("distance matrix has negative entries")
    if not np.allclose(d, d.T, rtol=1e-12, atol=0.0):
        raise ValueError("distance matrix is not symmetric")
    return d


def centered_gram(d: np.ndarray) -> np.ndarray:
    """B = -1/2 J D^2 J with J the centering projector."""
    sq = d ** 2
    row = sq.mean(axis=1, keepdims=True)
    b = -0.5 * (sq - row - row.T + sq.mean())
    return 0.5 * (b + b.T)


def _spectrum(d):
    vals, vecs = np.linalg.eigh(centered_gram(d))
    return vals[::-1], vecs[:, ::-1]


@dataclass
class Embedding:
    coords: np.ndarray
    eigvals: np.ndarray
    distortion: float

    @property
    def p(self) -> int:
        return self.coords.shape[1]


def distortion(d: np.ndarray, coords: np.ndarray) -> float:
    """Max relative error of embedded distances (absolute where the input is 0)."""
    e = squareform(pdist(coords))
    iu = np.triu_indices(d.shape[0], k=1)
    target, got = d[iu], e[iu]
    err = np.abs(got - target)
    rel = np.where(target > 0, err / np.where(target > 0, target, 1.0), err)
    return float(rel.max()) if rel.size else 0.0


def classical_mds(dist, p: int) -> Embedding:
    """Top-p classical MDS with negative eigenvalues clamped to zero.

    Each axis is signed so its largest-magnitude coordinate is positive.
    """
    d = _as_dist(dist)
    n = d.shape[0]
    if not 1 <= p <= n - 1:
        raise ValueError(f"target dimension must lie in [1, {n - 1}], got {p}")
    vals, vecs = _spectrum(d)
    lam = np.clip(vals[:p], 0.0, None)
    coords = vecs[:, :p] * np.sqrt(lam)
    pivot = np.argmax(np.abs(coords), axis=0)
    signs = np.sign(coords[pivot, np.arange(p)])
    signs[signs == 0] = 1.0
    coords = coords * signs
    coords -= coords.mean(axis=0)
    return Embedding(coords=coords, eigvals=lam, distortion=distortion(d, coords))


def choose_target_dim(dist, tol: float = 1e-10) -> int:
    """Count of centered eigenvalues above ``tol`` times the largest, capped at n-2."""
    if not 0 < tol < 1:
        raise ValueError(f"tol must lie in (0, 1), got {tol}")
    d = _as_dist(dist)
    n = d.shape[0]
    vals, _ = _spectrum(d)
    if vals[0] <= 0:
        return 1
    count = int(np.sum(vals > tol * vals[0]))
    return max(1, min(count, max(n - 2, 1)))


def place_out_of_sample(emb: Embedding, dist_new) -> np.ndarray:
    """Least-squares position of a new point given its distances to the embedded ones.

    Starts from the closed-form Gower placement and refines
    sum_i (||z - y_i|| - delta_i)^2.
    """
    y = emb.coords
    delta = np.asarray(dist_new, dtype=np.float64)
    lam = np.sum(y ** 2, axis=0)
    lam = np.where(lam > 0, lam, 1.0)
    z0 = 0.5 * (y.T @ (np.sum(y ** 2, axis=1) - delta ** 2)) / lam

    def resid(z):
        return np.linalg.norm(y - z, axis=1) - delta

    return least_squares(resid, z0, xtol=1e-12, ftol=1e-12, gtol=1e-12).x


# -- linear SVM ------------------------------------------------------------------

@dataclass
class BinarySvm:
    w: np.ndarray
    b: float
    objective_history: list = field(default_factory=list, repr=False)
    duality_gap: float = float("nan")
    n_iter: int = 0
    dual_coef: np.ndarray | None = field(default=None, repr=False)

    def decision(self, x) -> np.ndarray:
        return np.atleast_2d(x) @ self.w + self.b


@dataclass
class LinearSvmModel:
    """One-vs-rest linear SVM: row c of ``weights`` scores class c."""

    weights: np.ndarray
    intercepts: np.ndarray
    cost: float

    @property
    def n_classes(self) -> int:
        return len(self.intercepts)

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def scores(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim}-dimensional input, got {x.shape[1]}")
        return x @ self.weights.T + self.intercepts

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.scores(x), axis=1)

    def to_csv(self, path) -> None:
        rows = np.column_stack([np.arange(self.n_classes), self.intercepts, self.weights])
        header = "class,b," + ",".join(f"w{j}" for j in range(self.dim))
        np.savetxt(path, rows, delimiter=",", fmt="%.17g", header=header, comments="")

    @classmethod
    def from_csv(cls, path, cost: float = float("nan")) -> "LinearSvmModel":
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(weights=rows[:, 2:], intercepts=rows[:, 1], cost=cost)


def svm_predict(model: LinearSvmModel, x) -> int:
    return int(model.predict(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def _best_intercept(margins: np.ndarray, y: np.ndarray) -> float:
    """Midpoint of the minimizing interval of b -> sum_i max(0, 1 - y_i (m_i + b))."""
    cand = y - margins
    loss = np.maximum(0.0, 1.0 - y[None, :] * (margins[None, :] + cand[:, None])).sum(axis=1)
    best = loss.min()
    at_min = cand[loss <= best + 1e-12 * max(1.0, best)]
    return 0.5 * (at_min.min() + at_min.max())


def _project(v: np.ndarray, y: np.ndarray, cost: float) -> np.ndarray:
    """Euclidean projection onto {0 <= a <= cost, y.a = 0} for y in {-1, +1}."""
    # a(lam) = clip(v - lam*y) makes y.a nonincreasing in lam; solve y.a = 0 exactly
    knots = np.sort(np.concatenate([v * y, (v - cost) * y]))
    g = np.minimum(np.maximum(v[None, :] - knots[:, None] * y[None, :], 0.0), cost) @ y
    if g[0] <= 0:
        lam = knots[0]
    elif g[-1] >= 0:
        lam = knots[-1]
    else:
        hi = int(np.argmax(g <= 0))
        lo = hi - 1
        # g is linear between consecutive knots
        lam = knots[lo] + (knots[hi] - knots[lo]) * g[lo] / (g[lo] - g[hi])
    return np.minimum(np.maximum(v - lam * y, 0.0), cost)


def primal_objective(w, b, x, y, cost) -> float:
    return 0.5 * float(w @ w) + cost * float(np.maximum(0.0, 1.0 - y * (x @ w + b)).sum())


def fit_binary_svm(x, y, cost: float, tol: float = 1e-6, max_iter: int = 100_000,
                   check_every: int = 10, init: np.ndarray | None = None) -> BinarySvm:
    """L2-regularized hinge loss with an unpenalized intercept, y in {-1, +1}.

    Solves the box- and equality-constrained dual by monotone accelerated
    projected gradient (step 1/L) and stops once the duality gap falls below
    ``tol`` relative to the primal objective. ``objective_history`` records
    the primal objective of the best iterate found so far. ``init`` is an
    optional starting dual vector (projected onto the feasible set).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    gram = x @ x.T
    q = gram * np.outer(y, y)
    lipschitz = float(np.linalg.eigvalsh(q)[-1]) if n else 0.0
    if lipschitz <= 0:
        b = _best_intercept(np.zeros(n), y)
        return BinarySvm(np.zeros(x.shape[1]), b, [primal_objective(np.zeros(x.shape[1]), b, x, y, cost)],
                         0.0, 0, np.zeros(n))
    step = 1.0 / lipschitz

    def dual(a):
        return float(a.sum() - 0.5 * a @ q @ a)

    a = _project(np.zeros(n) if init is None else np.asarray(init, dtype=np.float64), y, cost)
    z, a_prev, t = a.copy(), a.copy(), 1.0
    f_a = dual(a)
    best_primal, best = np.inf, None
    history = []
    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        cand = _project(z + step * (1.0 - q @ z), y, cost)
        f_c = dual(cand)
        a_prev, a_new = a, (cand if f_c >= f_a else a)
        f_a = max(f_a, f_c)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = a_new + (t / t_next) * (cand - a_new) + ((t - 1.0) / t_next) * (a_new - a_prev)
        a, t = a_new, t_next
        if it % check_every == 0 or it == max_iter:
            w = x.T @ (a * y)
            b = _best_intercept(x @ w, y)
            p = primal_objective(w, b, x, y, cost)
            if p < best_primal:
                best_primal, best = p, (w, b)
            history.append(best_primal)
            gap = best_primal - f_a
            if gap <= tol * max(1.0, abs(best_primal)):
                break
    w, b = best
    polished = _polish(a, x, y, q, cost)
    if polished is not None:
        pw, pb, pa = polished
        p = primal_objective(pw, pb, x, y, cost)
        if p <= best_primal:
            w, b, a, best_primal = pw, pb, pa, p
            history.append(p)
            gap = max(p - dual(pa), 0.0)
    return BinarySvm(w=w, b=b, objective_history=history, duality_gap=gap, n_iter=it, dual_coef=a)


def _polish(a, x, y, q, cost, band: float = 1e-6):
    """Solve the KKT equalities on the active set read off an approximate dual.

    Returns (w, b, a) when the exact solution is feasible and consistent with
    the guessed active set, else None.
    """
    at_top = a >= cost * (1 - band)
    free = ~at_top & (a > cost * band)
    nf = int(free.sum())
    if nf == 0:
        return None
    rhs_top = cost * (q[np.ix_(free, at_top)].sum(axis=1) if at_top.any() else np.zeros(nf))
    lhs = np.zeros((nf + 1, nf + 1))
    lhs[:nf, :nf] = q[np.ix_(free, free)]
    lhs[:nf, nf] = y[free]
    lhs[nf, :nf] = y[free]
    rhs = np.concatenate([1.0 - rhs_top, [-cost * y[at_top].sum()]])
    sol = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
    a_new = np.where(at_top, cost, 0.0)
    a_new[free] = sol[:nf]
    if np.any(a_new < 0) or np.any(a_new > cost):
        return None
    w = x.T @ (a_new * y)
    b = float(sol[nf])
    m = y * (x @ w + b)
    slack = 1e-9 * max(1.0, float(np.abs(m).max()))
    zero = ~free & ~at_top
    if np.any(m[zero] < 1 - slack) or np.any(m[at_top] > 1 + slack):
        return None
    return w, b, a_new


def _fit_ovr(x, y, cost, k, warm=None, **solver):
    """One-vs-rest fit; returns the model and the dual vectors usable as a warm start."""
    present = np.unique(y)
    weights = np.zeros((k, x.shape[1]))
    intercepts = np.zeros(k)
    duals = {}
    warm = warm or {}
    if len(present) < 2:
        warnings.warn("single-class training data; model predicts that class", stacklevel=3)
        intercepts[:] = -1.0
        intercepts[present[0]] = 1.0
        return LinearSvmModel(weights, intercepts, cost), duals
    if k == 2:
        fit = fit_binary_svm(x, np.where(y == 1, 1.0, -1.0), cost, init=warm.get(1), **solver)
        weights[1], intercepts[1] = fit.w, fit.b
        weights[0], intercepts[0] = -fit.w, -fit.b
        duals[1] = fit.dual_coef
        return LinearSvmModel(weights, intercepts, cost), duals
    for c in range(k):
        if c not in present:
            intercepts[c] = -np.inf
            continue
        fit = fit_binary_svm(x, np.where(y == c, 1.0, -1.0), cost, init=warm.get(c), **solver)
        weights[c], intercepts[c] = fit.w, fit.b
        duals[c] = fit.dual_coef
    return LinearSvmModel(weights, intercepts, cost), duals


def _check_xy(x, y, cost):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64)
    if not cost > 0:
        raise ValueError(f"cost must be > 0, got {cost}")
    if len(y) != x.shape[0]:
        raise ValueError("x and y are not aligned")
    return x, y


def train_linear_svm(x, y, cost: float, n_classes: int | None = None, **solver) -> LinearSvmModel:
    """One-vs-rest linear SVM. With two classes a single binary problem is solved
    and class 0 gets the negated scorer."""
    x, y = _check_xy(x, y, cost)
    k = max(int(y.max()) + 1 if n_classes is None else n_classes, 2)
    return _fit_ovr(x, y, cost, k, **solver)[0]


def select_cost_cv(x, y, grid=DEFAULT_COST_GRID, folds: int = 5, seed=0, n_classes: int | None = None) -> float:
    """Cost with the best mean stratified-CV accuracy; ties go to the smaller cost.

    Within a fold the grid is walked in ascending order, each fit warm-started
    from the previous dual solution (still feasible under the larger box).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    grid = sorted(float(c) for c in grid)
    if not grid:
        raise ValueError("cost grid is empty")
    if len(grid) == 1:
        return grid[0]
    if folds < 2 or len(y) < folds:
        raise ValueError(f"need folds >= 2 and at least {folds} labeled points")
    k = max(int(y.max()) + 1 if n_classes is None else n_classes, 2)
    accs = {c: [] for c in grid}
    for test in stratified_folds(y, folds, seed):
        if len(test) == 0:
            warnings.warn("skipping empty CV fold", stacklevel=2)
            continue
        train = np.setdiff1d(np.arange(len(y)), test)
        warm = None
        for cost in grid:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                model, warm = _fit_ovr(x[train], y[train], cost, k, warm)
            accs[cost].append(np.mean(model.predict(x[test]) == y[test]))
    means = {c: float(np.mean(v)) for c, v in accs.items()}
    best = max(means.values())
    return next(c for c in grid if means[c] == best)


def resolve_target_dim(fm, p, intrinsic_dim: int | None = None) -> int:
    """``p`` may be an int, "auto" (spectrum rule) or "intrinsic" (the matrix's d)."""
    n = fm.dist.shape[0] if isinstance(fm, FermatMatrix) else np.asarray(fm).shape[0]
    if p == "auto" or p is None:
        return choose_target_dim(fm)
    if p == "intrinsic":
        d = intrinsic_dim if intrinsic_dim is not None else getattr(fm, "intrinsic_dim", None)
        if not d:
            raise ValueError("intrinsic dimension unknown")
        return int(min(max(d, 1), n - 1))
    return int(p)


def svm_transductive(fm, labeled_idx, labels, n_classes: int, p="auto", cost_grid=DEFAULT_COST_GRID,
                     folds: int = 5, seed=0) -> np.ndarray:
    """Embed the pooled sample, fit on labeled coordinates, predict unlabeled ones."""
    dist = fm.dist if isinstance(fm, FermatMatrix) else np.asarray(fm)
    labeled_idx = np.asarray(labeled_idx, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    emb = classical_mds(fm, resolve_target_dim(fm, p))
    xl = emb.coords[labeled_idx]
    if len(labeled_idx) >= folds and len(np.unique(labels)) > 1:
        cost = select_cost_cv(xl, labels, cost_grid, folds=folds, seed=seed, n_classes=n_classes)
    else:
        cost = float(sorted(cost_grid)[len(cost_grid) // 2])
    model = train_linear_svm(xl, labels, cost, n_classes=n_classes)
    mask = np.ones(dist.shape[0], dtype=bool)
    mask[labeled_idx] = False
    return model.predict(emb.coords[mask]) if mask.any() else np.empty(0, dtype=np.int64)


def fd_svm_pipeline(data, params: FermatParams = FermatParams(), p="auto",
                    cost_grid=DEFAULT_COST_GRID, folds: int = 5, seed=0) -> np.ndarray:
    """Fermat matrix on the pooled cloud -> MDS -> linear SVM; predictions for unlabeled points."""
    fm = fermat_matrix(data.cloud, params)
    return svm_transductive(fm, data.labeled_idx, data.labels, data.n_classes, p=p,
                            cost_grid=cost_grid, folds=folds, seed=seed)
