"""Synthetic datasets, intrinsic-dimension estimation and CSV ingestion.

All randomness goes through ``numpy.random.Generator`` on a PCG64 bit
generator seeded explicitly, so every generator is reproducible bit-for-bit
for a given (model, seed).
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .point_graph import PointCloud, as_cloud

SPHERE_I = "sphere_i"
LIFT_II = "lift_ii"
NOISY_III = "noisy_iii"
TWO_MOON_VARIANTS = (SPHERE_I, LIFT_II, NOISY_III)

LIFT_DIM = 500
NOISE_SD = 0.01


def rng_for(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class LabeledDataset:
    """A point cloud with labels known on ``labeled_idx``.

    ``labels[i]`` is the class of point ``labeled_idx[i]``. Fully labeled
    datasets have ``labeled_idx == arange(n)``.
    """

    cloud: PointCloud
    labels: np.ndarray
    labeled_idx: np.ndarray
    n_classes: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        idx = np.asarray(self.labeled_idx, dtype=np.int64)
        if labels.shape != idx.shape:
            raise ValueError("labels and labeled_idx must have the same length")
        if idx.size and (idx.min() < 0 or idx.max() >= self.cloud.n):
            raise ValueError("labeled_idx out of range")
        if len(np.unique(idx)) != len(idx):
            raise ValueError("labeled_idx entries must be unique")
        if self.n_classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.n_classes}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")
        if len(np.unique(labels)) < self.n_classes:
            warnings.warn("some classes have no labeled point", stacklevel=2)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "labeled_idx", idx)

    @property
    def n(self) -> int:
        return self.cloud.n

    @property
    def points(self) -> np.ndarray:
        return self.cloud.points

    @property
    def unlabeled_idx(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[self.labeled_idx] = False
        return np.flatnonzero(mask)

    @classmethod
    def fully_labeled(cls, points, labels, n_classes: int | None = None) -> "LabeledDataset":
        labels = np.asarray(labels, dtype=np.int64)
        k = int(labels.max()) + 1 if n_classes is None else n_classes
        return cls(as_cloud(points), labels, np.arange(len(labels)), max(k, 2))

    def full_labels(self) -> np.ndarray:
        """Label vector over all points; only valid for fully labeled data."""
        if len(self.labeled_idx) != self.n:
            raise ValueError("dataset is not fully labeled")
        out = np.empty(self.n, dtype=np.int64)
        out[self.labeled_idx] = self.labels
        return out

    def with_labeled(self, idx) -> "LabeledDataset":
        """Hide all labels except those at ``idx`` (requires full labels)."""
        full = self.full_labels()
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.cloud, full[idx], idx, self.n_classes)


# -- two moons -------------------------------------------------------------

@dataclass(frozen=True)
class TwoMoonModel:
    variant: str = SPHERE_I
    n0: int = 100
    n1: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.variant not in TWO_MOON_VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {TWO_MOON_VARIANTS}")
        if self.n0 < 1 or self.n1 < 1:
            raise ValueError("per-class counts must be >= 1")


def moon_angles(label: int, u, v) -> tuple[np.ndarray, np.ndarray]:
    """(phi, theta) of the two-moon construction for latent draws u, v."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if label == 0:
        phi = np.pi * u
        theta = (np.pi - 1) * np.sin(phi) + v
    else:
        phi = np.pi * u + np.pi / 2
        theta = -(np.pi - 1) * np.sin(phi - np.pi / 2) + 0.8 * np.pi - v
    return phi, theta


def lift(variant: str, phi: np.ndarray, theta: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
    if variant == SPHERE_I:
        return np.column_stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    if variant == LIFT_II:
        t = np.linspace(0.0, 1.0, LIFT_DIM)
        return np.outer(phi, t ** 2) + np.outer(theta, np.sin(t))
    if variant == NOISY_III:
        z = rng.normal(0.0, NOISE_SD, size=(len(phi), LIFT_DIM))
        z[:, 0] += phi
        z[:, 1] += theta
        return z
    raise ValueError(f"unknown variant {variant!r}")


def generate_two_moon(model: TwoMoonModel) -> LabeledDataset:
    """Fully labeled two-moon sample lifted by the chosen variant.

    Class 0 occupies the first ``n0`` rows, class 1 the next ``n1``. Latent
    draws U, V ~ N(0.5, 0.2^2) are fresh per point and not truncated.
    """
    rng = rng_for(model.seed)
    phis, thetas = [], []
    for label, m in ((0, model.n0), (1, model.n1)):
        u = rng.normal(0.5, 0.2, size=m)
        v = rng.normal(0.5, 0.2, size=m)
        phi, theta = moon_angles(label, u, v)
        phis.append(phi)
        thetas.append(theta)
    pts = lift(model.variant, np.concatenate(phis), np.concatenate(thetas), rng)
    labels = np.repeat([0, 1], [model.n0, model.n1])
    return LabeledDataset.fully_labeled(pts, labels, n_classes=2)


# -- von Mises-Fisher clusters on S^2 ---------------------------------------

@dataclass(frozen=True)
class VmfClusterModel:
    mu0: tuple = (0.0, 0.0, 1.0)
    mu1: tuple = (0.0, 0.0, -1.0)
    concentration: float = 5.0
    n_per_class: int = 100
    seed: int = 0

    def __post_init__(self):
        for mu in (self.mu0, self.mu1):
            if len(mu) != 3 or abs(np.linalg.norm(mu) - 1.0) > 1e-12:
                raise ValueError(f"mean direction {mu} must be a unit vector in R^3")
        if self.concentration < 0:
            raise ValueError("concentration must be >= 0")
        if self.n_per_class < 1:
            raise ValueError("n_per_class must be >= 1")


def _rotate_from_north(x: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Map samples centred on e3 to samples centred on ``mu``.

    A Householder reflection suffices: the law is symmetric about its axis.
    """
    e3 = np.array([0.0, 0.0, 1.0])
    if np.array_equal(mu, e3):
        return x
    h = e3 - mu
    h /= np.linalg.norm(h)
    return x - 2.0 * np.outer(x @ h, h)


def sample_vmf(mu, concentration: float, m: int, rng: np.random.Generator) -> np.ndarray:
    """m draws from vMF(mu, kappa) on the unit sphere in R^3 by polar-angle inversion."""
    mu = np.asarray(mu, dtype=np.float64)
    u = rng.random(m)
    if concentration == 0:
        w = 2.0 * u - 1.0
    else:
        # inverse CDF of the cosine of the polar angle
        w = 1.0 + np.log(u + (1.0 - u) * np.exp(-2.0 * concentration)) / concentration
    w = np.clip(w, -1.0, 1.0)
    t = rng.uniform(0.0, 2.0 * np.pi, size=m)
    r = np.sqrt(1.0 - w * w)
    x = np.column_stack([r * np.cos(t), r * np.sin(t), w])
    x = _rotate_from_north(x, mu)
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def generate_vmf_clusters(model: VmfClusterModel) -> LabeledDataset:
    rng = rng_for(model.seed)
    m = model.n_per_class
    x0 = sample_vmf(model.mu0, model.concentration, m, rng)
    x1 = sample_vmf(model.mu1, model.concentration, m, rng)
    return LabeledDataset.fully_labeled(np.vstack([x0, x1]), np.repeat([0, 1], m), n_classes=2)


# -- intrinsic dimension ---------------------------------------------------

def two_nn_ratios(cloud) -> np.ndarray:
    """r2/r1 for every point whose nearest neighbor is at positive distance."""
    cloud = as_cloud(cloud)
    tree = cKDTree(cloud.points)
    dist, _ = tree.query(cloud.points, k=3)
    r1, r2 = dist[:, 1], dist[:, 2]
    keep = r1 > 0
    if (~keep).sum() > cloud.n / 2:
        raise ValueError("more than half of the points have a duplicate; TWO-NN is undefined")
    return r2[keep] / r1[keep]


def estimate_intrinsic_dim(cloud, discard_fraction: float = 0.1) -> float:
    """TWO-NN intrinsic dimension.

    The ratios mu = r2/r1 are Pareto(d) distributed, so
    -log(1 - F(mu)) = d log(mu). The slope is fitted through the origin on
    the empirical CDF after dropping the largest ``discard_fraction`` of ratios.
    """
    cloud = as_cloud(cloud)
    if cloud.n < 10:
        raise ValueError(f"TWO-NN needs at least 10 points, got {cloud.n}")
    mu = np.sort(two_nn_ratios(cloud))
    n = len(mu)
    n_keep = int(np.floor(n * (1.0 - discard_fraction)))
    x = np.log(mu[:n_keep])
    y = -np.log(1.0 - np.arange(1, n_keep + 1) / n)
    return float(np.dot(x, y) / np.dot(x, x))


# -- labeled subsets -------------------------------------------------------

def sample_labeled_indices(labels, per_class: int, seed) -> np.ndarray:
    """``per_class`` indices drawn without replacement from every class, sorted."""
    labels = np.asarray(labels, dtype=np.int64)
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    rng = rng_for(seed)
    chosen = []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        if len(members) < per_class:
            raise ValueError(f"class {c} has {len(members)} members, fewer than per_class={per_class}")
        chosen.append(rng.choice(members, size=per_class, replace=False))
    return np.sort(np.concatenate(chosen))


# -- CSV ---------------------------------------------------------------------

class DatasetFormatError(ValueError):
    pass


class MalformedRowError(DatasetFormatError):
    pass


class RaggedRowError(DatasetFormatError):
    pass


class LabelFormatError(DatasetFormatError):
    pass


class CountMismatchError(DatasetFormatError):
    pass


def _is_numeric_row(row) -> bool:
    try:
        [float(x) for x in row]
    except ValueError:
        return False
    return True


def read_points_csv(path) -> np.ndarray:
    path = Path(path)
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and not _is_numeric_row(row):
                continue  # header
            try:
                values = [float(c) for c in row]
            except ValueError as exc:
                raise MalformedRowError(f"{path}:{lineno}: non-numeric value ({exc})") from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise RaggedRowError(f"{path}:{lineno}: expected {width} columns, found {len(values)}")
            rows.append(values)
    if not rows:
        raise MalformedRowError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)


def read_labels_csv(path) -> np.ndarray:
    path = Path(path)
    out = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 1:
                raise LabelFormatError(f"{path}:{lineno}: expected one label per row, found {len(row)} fields")
            cell = row[0].strip()
            try:
                out.append(int(cell))
            except ValueError:
                if lineno == 1 and not _is_numeric_row(row):
                    continue  # header
                raise LabelFormatError(f"{path}:{lineno}: label {cell!r} is not an integer") from None
    return np.array(out, dtype=np.int64)


def write_points_csv(path, points) -> None:
    np.savetxt(path, np.asarray(points), delimiter=",", fmt="%.17g")


def write_labels_csv(path, labels) -> None:
    np.savetxt(path, np.asarray(labels, dtype=np.int64), fmt="%d")


def load_csv_dataset(points_path, labels_path=None):
    """PointCloud from ``points_path``, or a fully labeled dataset if labels are given.

    Label values are mapped to 0..K-1 in sorted order when they are not already.
    """
    points = read_points_csv(points_path)
    if labels_path is None:
        return PointCloud(points)
    labels = read_labels_csv(labels_path)
    if len(labels) != len(points):
        raise CountMismatchError(f"{points_path} has {len(points)} rows but {labels_path} has {len(labels)} labels")
    classes, codes = np.unique(labels, return_inverse=True)
    if len(classes) < 2:
        raise LabelFormatError(f"{labels_path}: need at least 2 distinct labels, found {len(classes)}")
    if not np.array_equal(classes, np.arange(len(classes))):
        warnings.warn(f"{labels_path}: labels {classes.tolist()} remapped to 0..{len(classes) - 1}", stacklevel=2)
    return LabeledDataset.fully_labeled(points, codes, n_classes=len(classes))
