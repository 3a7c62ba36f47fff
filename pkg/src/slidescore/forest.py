"""Isolation-forest anomaly scoring and the centroid-distance baseline.

Trees isolate a descriptor with axis-parallel random cuts; points in dense
regions need many cuts, outliers very few. The bounded anomaly score is
a(x) = 2^(-mean path length / c(psi)), where c(psi) is the expected path
length of an unsuccessful search in a tree built from psi points. Deck
quality is the arithmetic mean of its slide scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatch, EmptyDeck, InsufficientData

DEFAULT_TREES = 200
DEFAULT_SUBSAMPLE = 256
DEFAULT_CONTAMINATION = 0.10
DEFAULT_SEED = 42


@dataclass(frozen=True)
class ForestParams:
    """Training knobs; height_limit defaults to ceil(log2(subsample))."""

    trees: int = DEFAULT_TREES
    subsample: int = DEFAULT_SUBSAMPLE
    contamination: float = DEFAULT_CONTAMINATION
    seed: int = DEFAULT_SEED
    height_limit: int = field(default=0)

    def __post_init__(self):
        if self.trees < 1:
            raise ValueError("trees must be >= 1")
        if self.subsample < 2:
            raise ValueError("subsample must be >= 2")
        if not (0.0 < self.contamination <= 0.5):
            raise ValueError("contamination must lie in (0, 0.5]")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.height_limit == 0:
            object.__setattr__(self, "height_limit", math.ceil(math.log2(self.subsample)))
        if self.height_limit < 1:
            raise ValueError("height_limit must be >= 1")


@dataclass(frozen=True)
class IsoTree:
    """Node arena: feature < 0 marks an external node holding its sample size."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray
    n_features: int


@dataclass(frozen=True)
class IsolationForest:
    trees: tuple[IsoTree, ...]
    params: ForestParams
    c_psi: float
    flag_threshold: float
    n_features: int


@dataclass(frozen=True)
class SlideScore:
    """Per-slide result; flags and path lengths exist only for the forest scorer."""

    key: str
    anomaly: float
    flagged: bool | None
    mean_path_length: float | None


@dataclass(frozen=True)
class AnomalyReport:
    slides: tuple[SlideScore, ...]
    deck_score: float


@lru_cache(maxsize=None)
def c_factor(n: int) -> float:
    """Expected unsuccessful-search path length for a sample of size n.

    c(n) = 2 H(n-1) - 2 (n-1)/n with the harmonic number summed exactly
    (no asymptotic approximation); single points need no cut, so c(1) = 0.
    """
    if n <= 1:
        return 0.0
    harmonic = math.fsum(1.0 / i for i in range(1, n))
    return 2.0 * harmonic - 2.0 * (n - 1) / n


def build_tree(sample, height_limit: int, rng: np.random.Generator) -> IsoTree:
    """Grow one isolation tree over the sample rows.

    Recursion stops at the height limit, at singleton nodes, and on nodes
    whose every feature is constant. Split features are drawn uniformly
    among dimensions with nonzero range; split values uniformly strictly
    inside (min, max), so both children are always non-empty. The RNG call
    order (feature, then split, left subtree before right) is part of the
    determinism contract.
    """
    sample = np.asarray(sample, dtype=float)
    if sample.ndim != 2 or sample.shape[0] < 1:
        raise ValueError("sample must be a non-empty 2-d matrix")
    features: list[int] = []
    thresholds: list[float] = []
    lefts: list[int] = []
    rights: list[int] = []
    sizes: list[int] = []

    def grow(rows: np.ndarray, depth: int) -> int:
        node = len(features)
        features.append(-1)
        thresholds.append(0.0)
        lefts.append(-1)
        rights.append(-1)
        sizes.append(rows.shape[0])
        if depth >= height_limit or rows.shape[0] <= 1:
            return node
        mins = rows.min(axis=0)
        maxs = rows.max(axis=0)
        eligible = np.nonzero(maxs > mins)[0]
        if eligible.size == 0:
            return node
        q = int(eligible[rng.integers(eligible.size)])
        lo, hi = float(mins[q]), float(maxs[q])
        split = rng.uniform(lo, hi)
        while not (lo < split < hi):
            split = rng.uniform(lo, hi)
        mask = rows[:, q] < split
        features[node] = q
        thresholds[node] = split
        lefts[node] = grow(rows[mask], depth + 1)
        rights[node] = grow(rows[~mask], depth + 1)
        return node

    grow(sample, 0)
    return IsoTree(
        feature=np.array(features, dtype=np.int32),
        threshold=np.array(thresholds, dtype=np.float64),
        left=np.array(lefts, dtype=np.int32),
        right=np.array(rights, dtype=np.int32),
        size=np.array(sizes, dtype=np.int32),
        n_features=sample.shape[1],
    )


def path_length(tree: IsoTree, x) -> float:
    """Edges traversed isolating x, plus the expected-depth term at the leaf."""
    x = np.asarray(x, dtype=float)
    if x.shape != (tree.n_features,):
        raise DimensionMismatch(
            f"expected a {tree.n_features}-vector, got shape {x.shape}"
        )
    node = 0
    depth = 0
    while tree.feature[node] >= 0:
        q = tree.feature[node]
        node = int(tree.left[node] if x[q] < tree.threshold[node] else tree.right[node])
        depth += 1
    return depth + c_factor(int(tree.size[node]))


def forest_fit(X, params: ForestParams | None = None) -> IsolationForest:
    """Train an isolation forest and calibrate its flagging threshold.

    Each tree gets a fresh stream seeded by (seed, tree index), draws its
    subsample without replacement, and grows from that stream, so training
    is deterministic and trees could be built in parallel. The threshold is
    the (1 - contamination) quantile (linear interpolation) of the training
    scores.
    """
    params = params or ForestParams()
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-d matrix")
    n = X.shape[0]
    if n < params.subsample:
        raise InsufficientData(
            f"need at least subsample={params.subsample} rows, got {n}"
        )
    trees = []
    for t in range(params.trees):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((params.seed, t))))
        rows = rng.choice(n, size=params.subsample, replace=False)
        trees.append(build_tree(X[rows], params.height_limit, rng))
    forest = IsolationForest(
        trees=tuple(trees),
        params=params,
        c_psi=c_factor(params.subsample),
        flag_threshold=0.0,
        n_features=X.shape[1],
    )
    train_scores = np.array([score(forest, row)[0] for row in X])
    threshold = float(np.quantile(train_scores, 1.0 - params.contamination))
    return replace(forest, flag_threshold=threshold)


def anomaly_from_mean_path(lbar: float, c_psi: float) -> float:
    """Bounded anomaly score from a mean path length.

    a = clip(0.5 - d, 0, 1) with decision value d = 0.5 - 2^(-lbar/c_psi).
    The two 0.5 terms cancel algebraically, so the collapsed form
    2^(-lbar/c_psi) is evaluated directly: it keeps very small scores
    positive where the literal two-step float arithmetic would round them
    to zero. The clip can never bind for lbar >= 0; larger scores mean
    stronger deviation from the reference corpus.
    """
    return min(max(2.0 ** (-lbar / c_psi), 0.0), 1.0)


def score(forest: IsolationForest, x) -> tuple[float, float]:
    """Anomaly score a(x) in [0, 1] and the mean path length behind it."""
    x = np.asarray(x, dtype=float)
    if x.shape != (forest.n_features,):
        raise DimensionMismatch(
            f"expected a {forest.n_features}-vector, got shape {x.shape}"
        )
    lbar = math.fsum(path_length(tree, x) for tree in forest.trees) / len(forest.trees)
    return anomaly_from_mean_path(lbar, forest.c_psi), lbar


def centroid_fit(X) -> np.ndarray:
    """Arithmetic mean of the training descriptors."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("X must be a non-empty 2-d matrix")
    return X.mean(axis=0)


def centroid_score(centroid, x) -> float:
    """Euclidean distance from the reference centroid."""
    centroid = np.asarray(centroid, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape != centroid.shape:
        raise DimensionMismatch(
            f"expected a {centroid.shape[0]}-vector, got shape {x.shape}"
        )
    return float(np.linalg.norm(x - centroid))


def score_deck(model, descriptors, keys=None) -> AnomalyReport:
    """Score every slide of a deck and aggregate by arithmetic mean.

    `model` is either a fitted IsolationForest (scores come with flags and
    path lengths) or a centroid vector (plain distances, no flags).
    """
    descriptors = [np.asarray(d, dtype=float) for d in descriptors]
    if len(descriptors) == 0:
        raise EmptyDeck("deck contains no slides")
    if keys is None:
        keys = [f"slide-{i:04d}" for i in range(len(descriptors))]
    if len(keys) != len(descriptors):
        raise ValueError("keys and descriptors must align")
    slides = []
    for key, desc in zip(keys, descriptors):
        if isinstance(model, IsolationForest):
            anomaly, lbar = score(model, desc)
            flagged = anomaly >= model.flag_threshold
            slides.append(SlideScore(key, anomaly, flagged, lbar))
        else:
            anomaly = centroid_score(model, desc)
            slides.append(SlideScore(key, anomaly, None, None))
    deck_score = math.fsum(s.anomaly for s in slides) / len(slides)
    return AnomalyReport(slides=tuple(slides), deck_score=deck_score)
