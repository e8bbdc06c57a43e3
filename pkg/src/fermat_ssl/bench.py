"""Seeded experiment harness: repeated transductive trials and result tables.

Within one repetition every method sees the same pooled sample and the same
labeled indices, and the Fermat matrix is computed once per alpha and shared.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .classifiers import default_k, naive_knn_batch, wknn_transductive
from .datagen import (
    TWO_MOON_VARIANTS,
    LabeledDataset,
    TwoMoonModel,
    VmfClusterModel,
    generate_two_moon,
    generate_vmf_clusters,
    load_csv_dataset,
    sample_labeled_indices,
)
from .embedding import DEFAULT_COST_GRID, svm_transductive
from .fermat_metric import FermatParams, fermat_matrix
from .point_graph import KNN_MST

FD_WKNN = "FDwkNN"
FD_SVM = "FDSVM"
FD_DSVM = "FDdSVM"
NAIVE_KNN = "NaiveKNN"
METHODS = (FD_WKNN, FD_SVM, FD_DSVM, NAIVE_KNN)
FERMAT_METHODS = (FD_WKNN, FD_SVM, FD_DSVM)

VMF = "vmf"
CSV_MODEL = "csv"
MODELS = TWO_MOON_VARIANTS + (VMF, CSV_MODEL)

NO_EVAL = "no-eval"


class TrialError(RuntimeError):
    """A repetition failed; the message names the repetition and labeled-set size."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment grid: every (method, n_labeled, alpha) over ``repetitions`` seeds.

    ``n_labeled`` counts labeled points in total, split evenly across classes.
    Synthetic models draw ``n_unlabeled`` further points, also balanced.
    ``intrinsic_dim=None`` estimates d by TWO-NN on each pooled sample.
    """

    model: str = "sphere_i"
    points_path: str | None = None
    labels_path: str | None = None
    methods: tuple = (FD_WKNN, FD_SVM, NAIVE_KNN)
    alphas: tuple = (4.0,)
    graph_kind: str = KNN_MST
    knn_k: int | None = None
    intrinsic_dim: int | None = None
    n_labeled: tuple = (50,)
    n_unlabeled: int = 300
    repetitions: int = 20
    seed: int = 0
    folds: int = 5
    cost_grid: tuple = DEFAULT_COST_GRID
    vmf_concentration: float = 5.0
    record_time: bool = True
    output: str | None = None
    dataset: LabeledDataset | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; choose from {MODELS}")
        if self.model == CSV_MODEL and self.dataset is None and not (self.points_path and self.labels_path):
            raise ValueError("csv model needs points_path and labels_path")
        unknown = set(self.methods) - set(METHODS)
        if unknown or not self.methods:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if any(a < 1 for a in self.alphas) or not self.alphas:
            raise ValueError("every alpha must be >= 1")
        if any(m < 1 for m in self.n_labeled) or not self.n_labeled:
            raise ValueError("n_labeled entries must be >= 1")
        if self.n_unlabeled < 0:
            raise ValueError("n_unlabeled must be >= 0")
        FermatParams(self.alphas[0], self.intrinsic_dim, self.graph_kind, self.knn_k)


@dataclass
class TrialResult:
    method: str
    n_labeled: int
    alpha: float
    accuracy: float | None
    wall_time: float
    distance_time: float
    predictions: np.ndarray = field(repr=False, default=None)


def rep_seeds(seed: int, rep_index: int, n_labeled: int) -> tuple[int, int, int]:
    """Independent (data, labeled-draw, CV) seeds for one repetition."""
    ss = np.random.SeedSequence([seed, rep_index, n_labeled])
    return tuple(int(c.generate_state(1, dtype=np.uint64)[0]) for c in ss.spawn(3))


def trial_data(config: ExperimentConfig, rep_index: int, n_labeled: int) -> tuple[LabeledDataset, np.ndarray]:
    """(partially labeled dataset, true labels of all points) for one repetition."""
    data_seed, label_seed, _ = rep_seeds(config.seed, rep_index, n_labeled)
    if config.dataset is not None:
        full = config.dataset
    elif config.model == CSV_MODEL:
        full = load_csv_dataset(config.points_path, config.labels_path)
    else:
        per_class = n_labeled // 2
        half = config.n_unlabeled // 2
        if config.model == VMF:
            full = generate_vmf_clusters(VmfClusterModel(concentration=config.vmf_concentration,
                                                         n_per_class=per_class + half, seed=data_seed))
        else:
            full = generate_two_moon(TwoMoonModel(config.model, per_class + half,
                                                  per_class + config.n_unlabeled - half, data_seed))
    k_classes = full.n_classes
    if n_labeled % k_classes:
        raise ValueError(f"n_labeled={n_labeled} is not divisible by the {k_classes} classes")
    truth = full.full_labels()
    idx = sample_labeled_indices(truth, n_labeled // k_classes, label_seed)
    return full.with_labeled(idx), truth


def _params(config: ExperimentConfig, alpha: float) -> FermatParams:
    return FermatParams(alpha, config.intrinsic_dim, config.graph_kind, config.knn_k)


def _run_method(method, data: LabeledDataset, fm, cv_seed, config) -> np.ndarray:
    k = default_k(len(data.labeled_idx), data.n_classes)
    if method == NAIVE_KNN:
        unl = data.unlabeled_idx
        if len(unl) == 0:
            return np.empty(0, dtype=np.int64)
        return naive_knn_batch(data.points[unl], data.points[data.labeled_idx], data.labels, k)
    if method == FD_WKNN:
        return wknn_transductive(fm.dist, data.labeled_idx, data.labels, data.n_classes, k=k,
                                 folds=config.folds, seed=cv_seed)
    p = "auto" if method == FD_SVM else "intrinsic"
    return svm_transductive(fm, data.labeled_idx, data.labels, data.n_classes, p=p,
                            cost_grid=config.cost_grid, folds=config.folds, seed=cv_seed)


def _score(pred, truth) -> float | None:
    if len(truth) == 0:
        return None
    return float(np.mean(pred == truth))


def run_repetition(config: ExperimentConfig, rep_index: int, n_labeled: int) -> list[TrialResult]:
    """Every (alpha, method) for one repetition on a shared sample."""
    data, truth = trial_data(config, rep_index, n_labeled)
    _, _, cv_seed = rep_seeds(config.seed, rep_index, n_labeled)
    target = truth[data.unlabeled_idx]
    out = []
    fermat_methods = [m for m in config.methods if m in FERMAT_METHODS]
    for alpha in config.alphas:
        fm, t_dist = None, 0.0
        if fermat_methods:
            t0 = time.perf_counter()
            fm = fermat_matrix(data.cloud, _params(config, alpha))
            t_dist = time.perf_counter() - t0
        for method in config.methods:
            if method == NAIVE_KNN and alpha != config.alphas[0]:
                continue  # alpha plays no role; report once
            t0 = time.perf_counter()
            pred = _run_method(method, data, fm, cv_seed, config)
            t_method = time.perf_counter() - t0
            uses_fm = method in FERMAT_METHODS
            out.append(TrialResult(method, n_labeled, float(alpha), _score(pred, target),
                                   t_method + (t_dist if uses_fm else 0.0),
                                   t_dist if uses_fm else 0.0, pred))
    return out


def run_trial(config: ExperimentConfig, rep_index: int, method: str | None = None,
              n_labeled: int | None = None, alpha: float | None = None) -> TrialResult:
    """A single seeded trial; defaults to the first method, n_labeled and alpha of the config."""
    method = method or config.methods[0]
    n_labeled = n_labeled or config.n_labeled[0]
    alpha = config.alphas[0] if alpha is None else alpha
    sub = replace(config, methods=(method,), alphas=(alpha,), n_labeled=(n_labeled,))
    return run_repetition(sub, rep_index, n_labeled)[0]


@dataclass(frozen=True)
class ResultRow:
    method: str
    n_labeled: int
    alpha: float
    graph: str
    mean_accuracy: float | None
    std_accuracy: float | None
    mean_time: float | None
    mean_distance_time: float | None
    repetitions: int
    n_eval: int


COLUMNS = ("method", "n_labeled", "alpha", "graph", "mean_accuracy", "std_accuracy",
           "mean_time_s", "mean_distance_time_s", "repetitions", "n_eval")


@dataclass
class ResultTable:
    rows: list

    def row(self, method: str, n_labeled: int | None = None, alpha: float | None = None) -> ResultRow:
        for r in self.rows:
            if r.method == method and (n_labeled is None or r.n_labeled == n_labeled) \
                    and (alpha is None or r.alpha == alpha):
                return r
        raise KeyError((method, n_labeled, alpha))

    def to_csv(self, path) -> None:
        def fmt(name, v):
            if v is None:
                return NO_EVAL if name.endswith("accuracy") else ""
            return repr(v) if isinstance(v, float) else str(v)

        path = Path(path)
        try:
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(COLUMNS)
                for r in self.rows:
                    w.writerow([fmt(f, getattr(r, f)) for f in ResultRow.__dataclass_fields__])
        except OSError as exc:
            raise OSError(f"cannot write results to {path}: {exc.strerror}") from exc


def _mean_std(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None, 0
    mean = math.fsum(vals) / len(vals)
    std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
    return mean, std, len(vals)


def aggregate(trials: list[TrialResult], graph: str, record_time: bool = True) -> ResultTable:
    groups: dict = {}
    for t in trials:
        groups.setdefault((t.method, t.n_labeled, t.alpha), []).append(t)
    rows = []
    for (method, n_l, alpha), ts in sorted(groups.items()):
        mean, std, n_eval = _mean_std([t.accuracy for t in ts])
        mt = math.fsum(t.wall_time for t in ts) / len(ts) if record_time else None
        md = math.fsum(t.distance_time for t in ts) / len(ts) if record_time else None
        rows.append(ResultRow(method, n_l, alpha, graph, mean, std, mt, md, len(ts), n_eval))
    return ResultTable(rows)


def run_experiment(config: ExperimentConfig, progress=None) -> ResultTable:
    trials = []
    for n_l in config.n_labeled:
        for rep in range(config.repetitions):
            try:
                trials.extend(run_repetition(config, rep, n_l))
            except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                raise TrialError(f"trial failed (model={config.model}, n_labeled={n_l}, rep={rep}): {exc}") from exc
            if progress is not None:
                progress(n_l, rep)
    table = aggregate(trials, config.graph_kind, config.record_time)
    if config.output:
        table.to_csv(config.output)
    return table


def paired_accuracies(config: ExperimentConfig, n_labeled: int | None = None) -> dict[tuple, np.ndarray]:
    """Per-repetition accuracies keyed by (method, alpha); repetitions share samples."""
    n_l = n_labeled or config.n_labeled[0]
    acc: dict = {}
    for rep in range(config.repetitions):
        for t in run_repetition(config, rep, n_l):
            acc.setdefault((t.method, t.alpha), []).append(t.accuracy)
    return {k: np.array(v, dtype=float) for k, v in acc.items()}
