"""PCA reduction, z-standardization, and metric fusion.

Reference embeddings are reduced with an SVD-based PCA, concatenated with
the seven design-cue metrics, and the combined vector is z-standardized
with training-set statistics. With the defaults (64 kept components) the
result is the 71-dimensional slide descriptor consumed by the scorers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, DimensionMismatch, InsufficientData
from .imaging import METRIC_NAMES, MetricVector

DEFAULT_COMPONENTS = 64
STD_FLOOR = 1e-9


@dataclass(frozen=True)
class PcaModel:
    """Fitted PCA basis: row-orthonormal components over centered inputs."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def d(self) -> int:
        return self.components.shape[1]


@dataclass(frozen=True)
class ZScaler:
    """Per-dimension standardization statistics (population std, floored)."""

    mean: np.ndarray
    std: np.ndarray

    @property
    def m(self) -> int:
        return self.mean.shape[0]


def pca_fit(X, k: int = DEFAULT_COMPONENTS) -> PcaModel:
    """Fit a k-component PCA via SVD of the mean-centered data.

    The reflection ambiguity is fixed by making each component's largest
    magnitude coordinate positive, so refits on identical data are bit
    identical. Explained variances are (singular value)^2 / (n - 1).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-d matrix")
    n, d = X.shape
    if k < 1 or k > d:
        raise ValueError(f"k must lie in [1, {d}]")
    if n < max(k, 2):
        raise InsufficientData(f"need at least {max(k, 2)} rows, got {n}")
    if np.ptp(X, axis=0).max() == 0.0:
        raise DegenerateInput("all rows identical; nothing to fit")

    mean = X.mean(axis=0)
    centered = X - mean
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:k].copy()
    flip = components[np.arange(k), np.argmax(np.abs(components), axis=1)] < 0.0
    components[flip] *= -1.0
    explained = singular[:k] ** 2 / (n - 1)
    return PcaModel(mean=mean, components=components, explained_variance=explained)


def pca_project(model: PcaModel, vec) -> np.ndarray:
    """Coordinates of a vector in the fitted component basis."""
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (model.d,):
        raise DimensionMismatch(f"expected a {model.d}-vector, got shape {vec.shape}")
    return model.components @ (vec - model.mean)


def project2d(model: PcaModel, vectors) -> np.ndarray:
    """First two PCA coordinates per input vector, for plot-data emission."""
    if model.k < 2:
        raise DimensionMismatch("model retains fewer than two components")
    vectors = np.asarray(vectors, dtype=float)
    if vectors.ndim == 1:
        vectors = vectors[None, :]
    if vectors.shape[1] != model.d:
        raise DimensionMismatch(
            f"expected {model.d}-vectors, got shape {vectors.shape}"
        )
    return (vectors - model.mean) @ model.components[:2].T


def fuse(pca_coords, metrics) -> np.ndarray:
    """Concatenate PCA coordinates with the seven metrics, in canonical order.

    No scaling happens here; standardization is a separate stage.
    """
    coords = np.asarray(pca_coords, dtype=float)
    if isinstance(metrics, MetricVector):
        metrics = metrics.as_array()
    metrics = np.asarray(metrics, dtype=float)
    if metrics.shape != (len(METRIC_NAMES),):
        raise DimensionMismatch("metrics must supply exactly seven values")
    return np.concatenate([coords, metrics])


def scaler_fit(D) -> ZScaler:
    """Per-dimension mean and population std; near-zero stds become 1.

    The floor keeps constant dimensions (a homogeneous corpus can produce
    them) from ever dividing by zero downstream.
    """
    D = np.asarray(D, dtype=float)
    if D.ndim != 2:
        raise ValueError("D must be a 2-d matrix")
    if D.shape[0] < 2:
        raise InsufficientData(f"need at least 2 rows, got {D.shape[0]}")
    mean = D.mean(axis=0)
    std = D.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    return ZScaler(mean=mean, std=std)


def scaler_apply(scaler: ZScaler, raw) -> np.ndarray:
    """Standardize a raw descriptor with the fitted statistics."""
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (scaler.m,):
        raise DimensionMismatch(f"expected a {scaler.m}-vector, got shape {raw.shape}")
    return (raw - scaler.mean) / scaler.std
