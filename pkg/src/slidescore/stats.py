"""Correlation and inter-rater agreement statistics.

Covers the validation toolkit for comparing anomaly scores with human
ratings: Pearson and Spearman correlations with exact small-n permutation
p-values, Fisher-z confidence intervals, and the classic reliability
coefficients (Cronbach alpha, ICC(2,k), Kendall W).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm as _norm
from scipy.stats import rankdata
from scipy.stats import t as _t

from .errors import (
    AllTied,
    ConstantInput,
    DegenerateAnova,
    DegenerateR,
    LengthMismatch,
    TooFewPoints,
    ZeroTotalVariance,
)

# Exact two-tailed permutation p-values up to 8 points (40320 permutations);
# beyond that the t approximation takes over.
EXACT_PERMUTATION_LIMIT = 8
_PERMUTATION_EPS = 1e-12


@dataclass(frozen=True)
class RatingsMatrix:
    """Complete subjects x raters matrix of ratings."""

    values: np.ndarray
    subjects: tuple[str, ...] = ()
    raters: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 2:
            raise ValueError("ratings must form a 2-d matrix")
        n, m = values.shape
        if n < 2 or m < 2:
            raise ValueError("need at least 2 subjects and 2 raters")
        if not np.all(np.isfinite(values)):
            raise ValueError("ratings matrix must have no missing cells")
        if not self.subjects:
            object.__setattr__(self, "subjects", tuple(f"s{i}" for i in range(n)))
        if not self.raters:
            object.__setattr__(self, "raters", tuple(f"r{j}" for j in range(m)))
        if len(self.subjects) != n or len(self.raters) != m:
            raise ValueError("label counts must match the matrix shape")

    @property
    def n_subjects(self) -> int:
        return self.values.shape[0]

    @property
    def n_raters(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class CorrelationResult:
    coefficient: float
    p_value: float
    ci_low: float
    ci_high: float
    n: int
    method: str


def _check_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("inputs must be 1-d vectors")
    if x.shape[0] != y.shape[0]:
        raise LengthMismatch(f"lengths differ: {x.shape[0]} vs {y.shape[0]}")
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        raise ConstantInput("correlation is undefined for constant input")
    return x, y


def pearson(x, y) -> float:
    """Sample product-moment correlation."""
    x, y = _check_pair(x, y)
    if x.shape[0] < 2:
        raise TooFewPoints("need at least 2 points")
    xc = x - x.mean()
    yc = y - y.mean()
    return float((xc @ yc) / math.sqrt((xc @ xc) * (yc @ yc)))


def fisher_ci(r: float, n: int, level: float = 0.95) -> tuple[float, float]:
    """Fisher-z confidence interval for a correlation coefficient.

    z = atanh(r) with standard error 1/sqrt(n - 3); the bounds map back
    through tanh, so they always lie strictly inside (-1, 1).
    """
    if abs(r) >= 1.0:
        raise DegenerateR("|r| = 1 has no finite Fisher transform")
    if n < 4:
        raise TooFewPoints("Fisher interval needs n >= 4")
    if not (0.0 < level < 1.0):
        raise ValueError("level must lie in (0, 1)")
    z = math.atanh(r)
    half_width = float(_norm.ppf((1.0 + level) / 2.0)) / math.sqrt(n - 3)
    return math.tanh(z - half_width), math.tanh(z + half_width)


def _t_two_tailed_p(r: float, n: int) -> float:
    if abs(r) >= 1.0:
        return 0.0
    t_stat = r * math.sqrt((n - 2) / (1.0 - r * r))
    return float(2.0 * _t.sf(abs(t_stat), n - 2))


def _exact_spearman_p(x_ranks: np.ndarray, y_ranks: np.ndarray, rho: float) -> float:
    """Two-tailed p by full enumeration of rank permutations.

    Counts permutations of the observed y ranks whose |rho| is at least
    |rho_observed|; a 1e-12 slack keeps mathematically tied values from
    being dropped to floating-point jitter.
    """
    n = x_ranks.shape[0]
    perms = np.array(list(itertools.permutations(y_ranks)))
    xc = x_ranks - x_ranks.mean()
    sx = math.sqrt(float(xc @ xc))
    yc = y_ranks - y_ranks.mean()
    sy = math.sqrt(float(yc @ yc))
    rhos = (perms - y_ranks.mean()) @ xc / (sx * sy)
    hits = int(np.sum(np.abs(rhos) >= abs(rho) - _PERMUTATION_EPS))
    return hits / math.factorial(n)


def _ci_for(rho: float, n: int) -> tuple[float, float]:
    if n < 4:
        return math.nan, math.nan
    if abs(rho) >= 1.0:
        return rho, rho
    return fisher_ci(rho, n)


def spearman(x, y) -> CorrelationResult:
    """Rank correlation with exact or t-approximate two-tailed p.

    Ties get average ranks and the coefficient is the Pearson correlation
    of the ranks. Up to EXACT_PERMUTATION_LIMIT points the p-value comes
    from full permutation enumeration, beyond that from the Student-t
    approximation; the interval is the Fisher-z one in either regime.
    """
    x, y = _check_pair(x, y)
    n = x.shape[0]
    if n < 3:
        raise TooFewPoints("need at least 3 points")
    x_ranks = rankdata(x)
    y_ranks = rankdata(y)
    rho = pearson(x_ranks, y_ranks)
    if n <= EXACT_PERMUTATION_LIMIT:
        p = _exact_spearman_p(x_ranks, y_ranks, rho)
    else:
        p = _t_two_tailed_p(rho, n)
    ci_low, ci_high = _ci_for(rho, n)
    return CorrelationResult(rho, p, ci_low, ci_high, n, "spearman")


def cronbach_alpha(ratings: RatingsMatrix) -> float:
    """Internal consistency: m/(m-1) * (1 - sum of rater variances / total variance).

    Sample variances throughout; raters are columns and the total is the
    variance of per-subject rating sums.
    """
    values = ratings.values
    m = ratings.n_raters
    total_var = float(values.sum(axis=1).var(ddof=1))
    if total_var == 0.0:
        raise ZeroTotalVariance("subject totals carry no variance")
    column_var = values.var(axis=0, ddof=1).sum()
    return float(m / (m - 1) * (1.0 - column_var / total_var))


def icc_2k(ratings: RatingsMatrix) -> float:
    """Two-way random-effects, average-measures intraclass correlation.

    From the subjects x raters ANOVA: (MSR - MSE) / (MSR + (MSC - MSE)/n)
    with MSR the between-subjects, MSC the between-raters, and MSE the
    residual mean square.
    """
    values = ratings.values
    n, m = values.shape
    grand = values.mean()
    row_means = values.mean(axis=1)
    col_means = values.mean(axis=0)
    ss_rows = m * float(((row_means - grand) ** 2).sum())
    ss_cols = n * float(((col_means - grand) ** 2).sum())
    ss_total = float(((values - grand) ** 2).sum())
    ss_err = ss_total - ss_rows - ss_cols
    msr = ss_rows / (n - 1)
    msc = ss_cols / (m - 1)
    mse = ss_err / ((n - 1) * (m - 1))
    denom = msr + (msc - mse) / n
    if denom == 0.0:
        raise DegenerateAnova("ANOVA denominator is zero")
    return float((msr - mse) / denom)


def kendall_w(ratings: RatingsMatrix) -> float:
    """Tie-corrected Kendall coefficient of concordance among raters.

    Each rater's column is ranked with average ties; with rank sums R_i,
    S = sum (R_i - mean)^2 and W = 12 S / (m^2 (n^3 - n) - m sum_j T_j)
    where T_j sums (t^3 - t) over tie groups of rater j.
    """
    values = ratings.values
    n, m = values.shape
    rank_columns = np.column_stack([rankdata(values[:, j]) for j in range(m)])
    tie_term = 0.0
    for j in range(m):
        _, counts = np.unique(values[:, j], return_counts=True)
        tie_term += float((counts.astype(float) ** 3 - counts).sum())
    denominator = m * m * (n**3 - n) - m * tie_term
    if denominator == 0.0:
        raise AllTied("every rater ranked all subjects equal")
    rank_sums = rank_columns.sum(axis=1)
    s = float(((rank_sums - rank_sums.mean()) ** 2).sum())
    return float(12.0 * s / denominator)


def correlate_scores(anomaly, ratings, method: str = "spearman") -> CorrelationResult:
    """Correlate per-deck anomaly scores with per-deck mean ratings.

    The anomaly sign is preserved: scores grow away from the reference
    corpus, so convergent scales correlate negatively. Callers comparing
    against rating-style outputs may negate afterwards.
    """
    anomaly = np.asarray(anomaly, dtype=float)
    ratings = np.asarray(ratings, dtype=float)
    if anomaly.shape != ratings.shape:
        raise LengthMismatch(
            f"score/rating lengths differ: {anomaly.shape} vs {ratings.shape}"
        )
    n = anomaly.shape[0]
    if n < 3:
        raise TooFewPoints("need at least 3 decks")
    if method == "spearman":
        return spearman(anomaly, ratings)
    if method == "pearson":
        r = pearson(anomaly, ratings)
        p = _t_two_tailed_p(r, n)
        ci_low, ci_high = _ci_for(r, n)
        return CorrelationResult(r, p, ci_low, ci_high, n, "pearson")
    raise ValueError(f"unknown method: {method!r}")
