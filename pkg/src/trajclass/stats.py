"""Wilcoxon signed-rank, Mann-Whitney U and Anderson-Darling normality tests.

The rank tests are two-sided.  Small samples get exact p-values by
enumerating the permutation null distribution of the observed (mid)ranks;
larger ones use a normal approximation with tie and continuity corrections.
The exact two-sided p is the null probability of a statistic at least as far
from its mean as the observed one, which stays valid when ties make the null
distribution asymmetric.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr
from scipy.stats import rankdata

from .exceptions import DegenerateSampleError, SampleSizeError

EXACT_MAX_N = 12

AD_CRITICAL_VALUES = (0.576, 0.656, 0.787, 0.918, 1.092)
AD_SIGNIFICANCE = (0.15, 0.10, 0.05, 0.025, 0.01)


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str
    n: tuple
    p_bracket: tuple | None = None

    __test__ = False  # not a pytest class


def _two_sided_normal(deviation: float, sd: float) -> float:
    if sd == 0:
        return 1.0
    z = max(abs(deviation) - 0.5, 0.0) / sd
    return float(min(1.0, 2.0 * ndtr(-z)))


def _tie_sizes(values) -> np.ndarray:
    _, counts = np.unique(values, return_counts=True)
    return counts.astype(float)


def _exact_two_sided(null_values: np.ndarray, observed: float, center: float) -> float:
    extreme = np.abs(null_values - center) >= abs(observed - center) - 1e-9
    return float(np.count_nonzero(extreme)) / len(null_values)


def _signed_rank_null(ranks: np.ndarray) -> np.ndarray:
    """W+ for each of the 2**n sign assignments of ``ranks``."""
    n = len(ranks)
    masks = (np.arange(2 ** n)[:, None] >> np.arange(n)) & 1
    return masks @ ranks


def wilcoxon_signed_rank(a, b) -> TestResult:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) == 0:
        raise SampleSizeError("paired samples must be 1-D, non-empty and of equal length")
    d = a - b
    d = d[d != 0]
    n = len(d)
    if n == 0:
        raise DegenerateSampleError("all paired differences are zero")
    magnitude = np.abs(d)
    ranks = rankdata(magnitude)
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    mean = n * (n + 1) / 4.0
    if n <= EXACT_MAX_N:
        return TestResult(w, _exact_two_sided(_signed_rank_null(ranks), w_plus, mean), "exact", (n,))
    ties = _tie_sizes(magnitude)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(ties ** 3 - ties) / 48.0
    return TestResult(w, _two_sided_normal(w - mean, math.sqrt(max(var, 0.0))), "normal-approximation", (n,))


def _rank_sum_null(ranks: np.ndarray, n_a: int) -> np.ndarray:
    """Rank sum of sample a for every placement of its n_a members in the pool."""
    return np.array([ranks[list(combo)].sum() for combo in itertools.combinations(range(len(ranks)), n_a)])


def mann_whitney_u(a, b) -> TestResult:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    n_a, n_b = len(a), len(b)
    if n_a == 0 or n_b == 0:
        raise SampleSizeError("both samples must be non-empty")
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    u_a = float(ranks[:n_a].sum()) - n_a * (n_a + 1) / 2.0
    u_b = n_a * n_b - u_a
    u = min(u_a, u_b)
    total = n_a + n_b
    mean = n_a * n_b / 2.0
    if total <= EXACT_MAX_N:
        null_u = _rank_sum_null(ranks, n_a) - n_a * (n_a + 1) / 2.0
        return TestResult(u, _exact_two_sided(null_u, u_a, mean), "exact", (n_a, n_b))
    ties = _tie_sizes(pooled)
    var = n_a * n_b / 12.0 * ((total + 1) - np.sum(ties ** 3 - ties) / (total * (total - 1)))
    return TestResult(u, _two_sided_normal(u - mean, math.sqrt(max(var, 0.0))), "normal-approximation",
                      (n_a, n_b))


def anderson_darling_normality(x) -> TestResult:
    """Normality test with estimated mean and variance.

    ``statistic`` is the small-sample adjusted A*^2.  Instead of an
    interpolated p-value the result carries ``p_bracket``, the pair of
    tabulated significance levels enclosing the statistic; ``p_value`` is its
    upper end.  Normality is rejected at 0.05 when A*^2 > 0.787.
    """
    x = np.sort(np.asarray(x, dtype=float).ravel())
    n = len(x)
    if n < 8:
        raise SampleSizeError(f"Anderson-Darling needs n >= 8, got {n}")
    sd = x.std(ddof=1)
    if sd == 0:
        raise DegenerateSampleError("sample has zero variance")
    z = (x - x.mean()) / sd
    log_cdf = np.log(ndtr(z))
    log_sf = np.log(ndtr(-z[::-1]))
    i = np.arange(1, n + 1)
    a2 = -n - np.sum((2 * i - 1) * (log_cdf + log_sf)) / n
    a2_star = float(a2 * (1 + 4.0 / n - 25.0 / n ** 2))
    upper = 1.0
    for crit, level in zip(AD_CRITICAL_VALUES, AD_SIGNIFICANCE):
        if a2_star <= crit:
            break
        upper = level
    idx = AD_SIGNIFICANCE.index(upper) if upper in AD_SIGNIFICANCE else -1
    lower = AD_SIGNIFICANCE[idx + 1] if idx + 1 < len(AD_SIGNIFICANCE) else 0.0
    return TestResult(a2_star, upper, "critical-values", (n,), p_bracket=(lower, upper))


def is_normal(result: TestResult, alpha: float = 0.05) -> bool:
    return result.p_bracket[0] >= alpha
