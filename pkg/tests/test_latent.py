import numpy as np
import pytest

from slidescore.errors import DegenerateInput, DimensionMismatch, InsufficientData
from slidescore.imaging import MetricVector
from slidescore.latent import (
    PcaModel,
    fuse,
    pca_fit,
    pca_project,
    project2d,
    scaler_apply,
    scaler_fit,
)


def test_pca_line_first_component(rng):
    t = rng.normal(size=200)
    X = np.column_stack([t, t]) + rng.normal(scale=1e-9, size=(200, 2))
    model = pca_fit(X, k=1)
    expected = 1.0 / np.sqrt(2.0)
    assert model.components[0] == pytest.approx([expected, expected], abs=1e-6)
    assert model.components[0].max() > 0  # sign convention


def test_pca_rank_k_exact_reconstruction(rng):
    basis = np.linalg.qr(rng.normal(size=(10, 3)))[0][:, :3]
    X = rng.normal(size=(40, 3)) @ basis.T + rng.normal(size=10)
    model = pca_fit(X, k=3)
    coords = np.array([pca_project(model, row) for row in X])
    recon = coords @ model.components + model.mean
    assert np.max(np.abs(recon - X)) < 1e-8


def test_pca_explained_variance_matches_total(rng):
    X = rng.normal(size=(100, 10))
    model = pca_fit(X, k=10)
    total = np.trace(np.cov(X, rowvar=False))
    assert model.explained_variance.sum() == pytest.approx(total, abs=1e-8)
    assert np.all(np.diff(model.explained_variance) <= 1e-12)
    assert np.all(model.explained_variance >= 0.0)


def test_pca_orthonormal_components(rng):
    X = rng.normal(size=(60, 12))
    model = pca_fit(X, k=8)
    gram = model.components @ model.components.T
    assert np.max(np.abs(gram - np.eye(8))) < 1e-8


def test_pca_full_rank_relative_frobenius(rng):
    X = rng.normal(size=(100, 10))
    model = pca_fit(X, k=10)
    coords = (X - model.mean) @ model.components.T
    recon = coords @ model.components + model.mean
    rel = np.linalg.norm(recon - X) / np.linalg.norm(X)
    assert rel < 1e-6


def test_pca_deterministic(rng):
    X = rng.normal(size=(50, 6))
    a = pca_fit(X, k=4)
    b = pca_fit(X, k=4)
    assert a.components.tolist() == b.components.tolist()
    assert a.mean.tolist() == b.mean.tolist()
    assert a.explained_variance.tolist() == b.explained_variance.tolist()


def test_pca_errors(rng):
    with pytest.raises(InsufficientData):
        pca_fit(rng.normal(size=(3, 8)), k=4)
    with pytest.raises(InsufficientData):
        pca_fit(rng.normal(size=(1, 2)), k=1)
    with pytest.raises(DegenerateInput):
        pca_fit(np.ones((10, 4)), k=2)
    with pytest.raises(ValueError):
        pca_fit(rng.normal(size=(10, 4)), k=5)


def test_pca_project_basics(rng):
    X = rng.normal(size=(30, 5))
    model = pca_fit(X, k=3)
    assert pca_project(model, model.mean) == pytest.approx([0.0, 0.0, 0.0], abs=1e-12)
    coords = pca_project(model, model.mean + model.components[0])
    assert coords == pytest.approx([1.0, 0.0, 0.0], abs=1e-10)
    with pytest.raises(DimensionMismatch):
        pca_project(model, np.zeros(7))


def test_pca_projection_preserves_subspace_distances(rng):
    basis = np.linalg.qr(rng.normal(size=(8, 4)))[0][:, :4]
    X = rng.normal(size=(50, 4)) @ basis.T
    model = pca_fit(X, k=4)
    pairs = rng.integers(0, 50, size=(20, 2))
    for i, j in pairs:
        original = np.linalg.norm(X[i] - X[j])
        projected = np.linalg.norm(pca_project(model, X[i]) - pca_project(model, X[j]))
        assert projected == pytest.approx(original, abs=1e-8)


def test_project2d(rng):
    X = rng.normal(size=(40, 6))
    model = pca_fit(X, k=4)
    points = project2d(model, X)
    assert points.shape == (40, 2)
    assert project2d(model, model.mean)[0] == pytest.approx([0.0, 0.0], abs=1e-12)
    second = project2d(model, model.mean + model.components[1])[0]
    assert second == pytest.approx([0.0, 1.0], abs=1e-10)
    with pytest.raises(DimensionMismatch):
        project2d(model, np.zeros((3, 9)))


def test_fuse_ordering_and_length():
    coords = np.zeros(64)
    metrics = MetricVector(0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)
    fused = fuse(coords, metrics)
    assert fused.shape == (71,)
    for j, value in enumerate((0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)):
        assert fused[64 + j] == value
    assert fuse(np.zeros(3), np.zeros(7)).tolist() == [0.0] * 10
    with pytest.raises(DimensionMismatch):
        fuse(coords, np.zeros(6))


def test_scaler_constant_column_floor():
    D = np.column_stack([np.full(5, 3.0), np.arange(5.0)])
    scaler = scaler_fit(D)
    assert scaler.std[0] == 1.0
    transformed = np.array([scaler_apply(scaler, row) for row in D])
    assert np.all(transformed[:, 0] == 0.0)


def test_scaler_two_point_column():
    scaler = scaler_fit(np.array([[0.0], [2.0]]))
    assert scaler.mean[0] == 1.0 and scaler.std[0] == 1.0
    assert scaler_apply(scaler, np.array([0.0]))[0] == -1.0
    assert scaler_apply(scaler, np.array([2.0]))[0] == 1.0


def test_scaler_standardizes_training_matrix(rng):
    D = rng.normal(loc=3.0, scale=2.5, size=(200, 6))
    scaler = scaler_fit(D)
    transformed = np.array([scaler_apply(scaler, row) for row in D])
    assert np.max(np.abs(transformed.mean(axis=0))) < 1e-9
    assert np.max(np.arange(1) + np.abs(transformed.std(axis=0) - 1.0)) < 1e-9


def test_scaler_roundtrip(rng):
    D = rng.normal(size=(50, 4))
    scaler = scaler_fit(D)
    raw = rng.normal(size=4)
    recovered = scaler_apply(scaler, raw) * scaler.std + scaler.mean
    assert np.max(np.abs(recovered - raw)) < 1e-12


def test_scaler_errors(rng):
    with pytest.raises(InsufficientData):
        scaler_fit(np.zeros((1, 3)))
    scaler = scaler_fit(rng.normal(size=(10, 3)))
    with pytest.raises(DimensionMismatch):
        scaler_apply(scaler, np.zeros(4))


def test_scaler_never_divides_below_floor(rng):
    D = rng.normal(size=(20, 5))
    D[:, 2] = 7.5  # exactly constant
    scaler = scaler_fit(D)
    assert np.all(scaler.std >= 1e-9)


def test_pca_model_properties(rng):
    X = rng.normal(size=(30, 5))
    model = pca_fit(X, k=2)
    assert isinstance(model, PcaModel)
    assert model.k == 2 and model.d == 5
