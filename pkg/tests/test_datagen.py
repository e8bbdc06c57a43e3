import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from fermat_ssl.datagen import (
    LIFT_II,
    NOISY_III,
    SPHERE_I,
    CountMismatchError,
    DatasetFormatError,
    LabeledDataset,
    LabelFormatError,
    MalformedRowError,
    RaggedRowError,
    TwoMoonModel,
    VmfClusterModel,
    estimate_intrinsic_dim,
    generate_two_moon,
    generate_vmf_clusters,
    lift,
    load_csv_dataset,
    moon_angles,
    read_points_csv,
    sample_labeled_indices,
    sample_vmf,
    rng_for,
    two_nn_ratios,
    write_labels_csv,
    write_points_csv,
)
from fermat_ssl.point_graph import PointCloud


# -- two moons ------------------------------------------------------------------

def test_sphere_variant_unit_norm():
    data = generate_two_moon(TwoMoonModel(SPHERE_I, 150, 120, seed=1))
    assert data.points.shape == (270, 3)
    assert np.max(np.abs(np.linalg.norm(data.points, axis=1) - 1.0)) <= 1e-12


def test_class_counts_and_order():
    data = generate_two_moon(TwoMoonModel(SPHERE_I, 7, 4, seed=0))
    assert data.full_labels().tolist() == [0] * 7 + [1] * 4
    assert data.n_classes == 2


def test_pinned_latent_values():
    phi, theta = moon_angles(0, 0.5, 0.5)
    assert phi == pytest.approx(math.pi / 2, abs=1e-15)
    assert theta == pytest.approx(2.641592653589793, abs=1e-15)  # pi - 0.5
    phi, theta = moon_angles(1, 0.5, 0.5)
    assert phi == pytest.approx(math.pi, abs=1e-15)
    assert theta == pytest.approx(0.5 - 0.2 * math.pi, abs=1e-14)


@pytest.mark.parametrize("variant", [LIFT_II, NOISY_III])
def test_lifted_dimension_is_500(variant):
    data = generate_two_moon(TwoMoonModel(variant, 5, 6, seed=2))
    assert data.points.shape == (11, 500)


def test_lift_ii_formula():
    t = np.linspace(0, 1, 500)
    x = lift(LIFT_II, np.array([1.3]), np.array([0.4]))[0]
    np.testing.assert_allclose(x, 1.3 * t**2 + 0.4 * np.sin(t), rtol=1e-15)
    assert x[0] == 0.0


def test_noisy_iii_structure():
    phi, theta = np.array([1.0, 2.0]), np.array([0.5, 0.25])
    x = lift(NOISY_III, phi, theta, rng_for(0))
    noise = x.copy()
    noise[:, 0] -= phi
    noise[:, 1] -= theta
    # a 1000-sample std of N(0, 0.01^2) lands well inside [0.008, 0.012]
    assert 0.008 < noise.std() < 0.012


def test_two_moon_deterministic():
    a = generate_two_moon(TwoMoonModel(NOISY_III, 20, 20, seed=5))
    b = generate_two_moon(TwoMoonModel(NOISY_III, 20, 20, seed=5))
    c = generate_two_moon(TwoMoonModel(NOISY_III, 20, 20, seed=6))
    assert a.points.tobytes() == b.points.tobytes()
    assert a.points.tobytes() != c.points.tobytes()


def test_two_moon_rejects_bad_model():
    with pytest.raises(ValueError):
        TwoMoonModel("moon_iv")
    with pytest.raises(ValueError):
        TwoMoonModel(SPHERE_I, 0, 3)


# -- vMF -------------------------------------------------------------------------

def test_vmf_uniform_limit():
    x = sample_vmf([0.0, 0.0, 1.0], 0.0, 10_000, rng_for(1))
    assert np.linalg.norm(x.mean(axis=0)) <= 0.1


def test_vmf_mean_resultant_length():
    # closed form E[x.mu] = coth(kappa) - 1/kappa = 0.8000908 for kappa = 5
    expected = 1.0 / math.tanh(5.0) - 0.2
    assert expected == pytest.approx(0.8000908, abs=1e-7)
    data = generate_vmf_clusters(VmfClusterModel(concentration=5.0, n_per_class=100_000, seed=2))
    z0 = data.points[:100_000, 2]
    z1 = data.points[100_000:, 2]
    assert abs(z0.mean() - expected) <= 0.01
    assert abs(-z1.mean() - expected) <= 0.01


def test_vmf_off_axis_mean():
    mu = np.array([1.0, 2.0, -2.0]) / 3.0
    x = sample_vmf(mu, 5.0, 50_000, rng_for(3))
    assert abs((x @ mu).mean() - (1.0 / math.tanh(5.0) - 0.2)) <= 0.01
    # symmetric about the axis: the orthogonal component averages out
    perp = x.mean(axis=0) - mu * (x.mean(axis=0) @ mu)
    assert np.linalg.norm(perp) <= 0.01


def test_vmf_unit_norm_and_balance():
    data = generate_vmf_clusters(VmfClusterModel(concentration=50.0, n_per_class=500, seed=4))
    assert np.max(np.abs(np.linalg.norm(data.points, axis=1) - 1.0)) <= 1e-12
    assert np.bincount(data.full_labels()).tolist() == [500, 500]


def test_vmf_rejects_non_unit_mean():
    with pytest.raises(ValueError):
        VmfClusterModel(mu0=(0.0, 0.0, 2.0))
    with pytest.raises(ValueError):
        VmfClusterModel(concentration=-1.0)


# -- TWO-NN --------------------------------------------------------------------

def embed(points, ambient, seed):
    """Isometrically place low-dimensional points in R^ambient via a random orthonormal frame."""
    q, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(ambient, points.shape[1])))
    return points @ q.T


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_two_nn_segment(seed):
    pts = embed(np.random.default_rng(seed).uniform(size=(2000, 1)), 10, seed)
    assert 0.8 <= estimate_intrinsic_dim(pts) <= 1.2


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_two_nn_plane(seed):
    pts = embed(np.random.default_rng(seed).uniform(size=(2000, 2)), 10, seed)
    assert 1.7 <= estimate_intrinsic_dim(pts) <= 2.3


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_two_nn_cube(seed):
    pts = np.random.default_rng(seed).uniform(size=(2000, 3))
    assert 2.6 <= estimate_intrinsic_dim(pts) <= 3.4


def test_two_nn_ratio_oracle():
    pts = np.array([[0.0], [1.0], [3.0], [7.0], [15.0]])
    # r1, r2 per point: (1,3), (1,2), (2,3), (4,6), (8,12)
    np.testing.assert_allclose(two_nn_ratios(pts), [3.0, 2.0, 1.5, 1.5, 1.5], rtol=1e-15)


def test_two_nn_pareto_oracle(monkeypatch):
    # feed ratios drawn from Pareto(d) straight into the regression
    from fermat_ssl import datagen

    rng = np.random.default_rng(7)
    cloud = np.arange(20.0)[:, None]
    for d in (1.0, 2.5, 4.0):
        mu = (1.0 - rng.uniform(size=5000)) ** (-1.0 / d)
        monkeypatch.setattr(datagen, "two_nn_ratios", lambda c, mu=mu: mu)
        assert abs(estimate_intrinsic_dim(cloud) - d) <= 0.1 * d


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(-10, 10))
def test_two_nn_scale_and_rotation_invariance(seed, e):
    pts = np.random.default_rng(seed).normal(size=(200, 3))
    base = estimate_intrinsic_dim(pts)
    assert estimate_intrinsic_dim(pts * 2.0**e) == base  # power-of-two scaling is exact
    rot = Rotation.random(random_state=seed % 1000).as_matrix()
    moved = pts @ rot.T + np.array([5.0, -3.0, 1.0])
    assert estimate_intrinsic_dim(moved) == pytest.approx(base, rel=1e-9)


def test_two_nn_rejects():
    with pytest.raises(ValueError):
        estimate_intrinsic_dim(np.random.default_rng(0).normal(size=(9, 2)))
    dup = np.repeat(np.random.default_rng(0).normal(size=(6, 2)), 2, axis=0)
    with pytest.raises(ValueError):
        estimate_intrinsic_dim(dup)


# -- labeled sampling -----------------------------------------------------------

def test_sample_labeled_indices():
    labels = np.repeat([0, 1], [10, 15])
    idx = sample_labeled_indices(labels, 4, seed=3)
    assert len(idx) == 8
    assert np.bincount(labels[idx]).tolist() == [4, 4]
    assert len(np.unique(idx)) == 8
    assert np.array_equal(idx, sample_labeled_indices(labels, 4, seed=3))
    assert sample_labeled_indices(labels, 10, seed=0)[:10].tolist() == list(range(10))


def test_sample_labeled_rejects_small_class():
    with pytest.raises(ValueError):
        sample_labeled_indices(np.repeat([0, 1], [3, 10]), 4, seed=0)


def test_labeled_dataset_validation():
    cloud = PointCloud(np.zeros((4, 2)) + np.arange(4)[:, None])
    with pytest.raises(ValueError):
        LabeledDataset(cloud, [0, 1], [0, 0], 2)
    with pytest.raises(ValueError):
        LabeledDataset(cloud, [0, 5], [0, 1], 2)
    with pytest.raises(ValueError):
        LabeledDataset(cloud, [0, 1], [0, 9], 2)
    with pytest.warns(UserWarning):
        LabeledDataset(cloud, [0, 0], [0, 1], 2)
    ds = LabeledDataset(cloud, [1, 0], [3, 1], 2)
    assert ds.unlabeled_idx.tolist() == [0, 2]


# -- CSV -------------------------------------------------------------------------

def test_csv_round_trip_bitwise(tmp_path):
    data = generate_two_moon(TwoMoonModel(NOISY_III, 10, 10, seed=9))
    write_points_csv(tmp_path / "p.csv", data.points)
    write_labels_csv(tmp_path / "l.csv", data.full_labels())
    back = load_csv_dataset(tmp_path / "p.csv", tmp_path / "l.csv")
    assert back.points.tobytes() == data.points.tobytes()
    assert np.array_equal(back.full_labels(), data.full_labels())
    assert back.n_classes == 2


def test_csv_header_skipped(tmp_path):
    (tmp_path / "p.csv").write_text("x,y\n1,2\n3,4\n")
    assert read_points_csv(tmp_path / "p.csv").tolist() == [[1.0, 2.0], [3.0, 4.0]]


def test_csv_points_only_gives_cloud(tmp_path):
    (tmp_path / "p.csv").write_text("1,2\n3,4\n")
    assert isinstance(load_csv_dataset(tmp_path / "p.csv"), PointCloud)


def test_csv_ragged_names_line(tmp_path):
    (tmp_path / "p.csv").write_text("1,2\n3,4\n5\n")
    with pytest.raises(RaggedRowError, match=r"p\.csv:3"):
        read_points_csv(tmp_path / "p.csv")


def test_csv_malformed(tmp_path):
    (tmp_path / "p.csv").write_text("1,2\n3,abc\n")
    with pytest.raises(MalformedRowError, match=r":2"):
        read_points_csv(tmp_path / "p.csv")
    (tmp_path / "e.csv").write_text("")
    with pytest.raises(MalformedRowError):
        read_points_csv(tmp_path / "e.csv")


def test_csv_bad_labels(tmp_path):
    (tmp_path / "p.csv").write_text("1,2\n3,4\n5,6\n")
    (tmp_path / "l.csv").write_text("0\n1.5\n1\n")
    with pytest.raises(LabelFormatError, match=r":2"):
        load_csv_dataset(tmp_path / "p.csv", tmp_path / "l.csv")
    (tmp_path / "l2.csv").write_text("0\n1\n")
    with pytest.raises(CountMismatchError):
        load_csv_dataset(tmp_path / "p.csv", tmp_path / "l2.csv")


def test_csv_errors_are_distinct():
    kinds = {MalformedRowError, RaggedRowError, LabelFormatError, CountMismatchError}
    assert len(kinds) == 4 and all(issubclass(k, DatasetFormatError) for k in kinds)


def test_csv_k_distinct_labels(tmp_path):
    (tmp_path / "p.csv").write_text("\n".join(f"{i},{i * i}" for i in range(6)) + "\n")
    (tmp_path / "l.csv").write_text("label\n0\n2\n1\n2\n0\n1\n")
    assert load_csv_dataset(tmp_path / "p.csv", tmp_path / "l.csv").n_classes == 3
    (tmp_path / "l2.csv").write_text("5\n7\n5\n9\n9\n7\n")
    with pytest.warns(UserWarning, match="remapped"):
        ds = load_csv_dataset(tmp_path / "p.csv", tmp_path / "l2.csv")
    assert ds.n_classes == 3 and ds.full_labels().tolist() == [0, 1, 0, 2, 2, 1]
