"""Two-sample and goodness-of-fit statistics used by the experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import stats as _st
from scipy.spatial.distance import cdist

# asymptotic Kolmogorov quantile at level 0.01: P(sup|B| > 1.628) = 0.01
KS_C_001 = 1.6276


@dataclass(frozen=True)
class TestResult:
    statistic: float
    threshold: float = float("nan")
    passed: Optional[bool] = None
    ci_level: float = float("nan")
    ci_lo: float = float("nan")
    ci_hi: float = float("nan")

    __test__ = False  # not a pytest class


def _clean(a, name="sample", scalar=True) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if scalar:
        a = a.ravel()
    if len(a) < 1:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def _verdict(stat: float, threshold: Optional[float]) -> TestResult:
    if threshold is None:
        return TestResult(stat)
    return TestResult(stat, threshold, bool(stat <= threshold))


def ks_two_sample(A, B, threshold: Optional[float] = None) -> TestResult:
    """Sup distance between the two empirical CDFs."""
    A, B = _clean(A, "A"), _clean(B, "B")
    return _verdict(float(_st.ks_2samp(A, B).statistic), threshold)


def ks_threshold(n: int, m: int, median_se: float = 0.0) -> float:
    """``q_0.01(n, m) + 2 median SE`` with the asymptotic two-sample quantile.

    The second term inflates the threshold by the inner Monte Carlo noise of
    the compared samples.
    """
    return KS_C_001 * math.sqrt((n + m) / (n * m)) + 2.0 * median_se


def energy_distance(A, B, threshold: Optional[float] = None) -> TestResult:
    """``2 E|a - b| - E|a - a'| - E|b - b'|`` with Euclidean norms.

    All pairs are averaged, diagonal included (the V-statistic), which is
    nonnegative and vanishes exactly when the two empirical laws coincide.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    A = A.reshape(len(A), -1)
    B = B.reshape(len(B), -1)
    if A.shape[1] != B.shape[1]:
        raise ValueError("dimension mismatch")
    _clean(A, "A", scalar=False)
    _clean(B, "B", scalar=False)
    ab = cdist(A, B).mean()
    aa = cdist(A, A).mean()
    bb = cdist(B, B).mean()
    return _verdict(max(float(2.0 * ab - aa - bb), 0.0), threshold)


def gaussian_fit_ks(samples, mu: float, var: float,
                    threshold: Optional[float] = None) -> TestResult:
    """One-sample KS distance to ``Normal(mu, var)``."""
    if not var > 0:
        raise ValueError("variance must be positive")
    x = _clean(samples)
    if len(x) < 2:
        raise ValueError("need at least two samples")
    d = _st.kstest(x, "norm", args=(mu, math.sqrt(var))).statistic
    return _verdict(float(d), threshold)


def bootstrap_ci(samples, statistic: Callable = np.mean, B: int = 1000,
                 level: float = 0.95, rng=None) -> TestResult:
    """Percentile bootstrap confidence interval of ``statistic``."""
    if B < 100:
        raise ValueError("need at least 100 bootstrap resamples")
    x = _clean(samples)
    if len(x) < 2:
        raise ValueError("need at least two samples")
    rng = rng if rng is not None else np.random.default_rng(0)
    res = _st.bootstrap((x,), statistic, n_resamples=B, confidence_level=level,
                        method="percentile", vectorized=False, random_state=rng)
    ci = res.confidence_interval
    return TestResult(float(statistic(x)), ci_level=level,
                      ci_lo=float(ci.low), ci_hi=float(ci.high))


def variance_se(x) -> tuple[float, float]:
    """Sample variance and its standard error (fourth-moment formula)."""
    x = _clean(x)
    n = len(x)
    v = float(np.var(x, ddof=1))
    m4 = float(np.mean((x - x.mean()) ** 4))
    return v, math.sqrt(max(m4 - v * v * (n - 3) / (n - 1), 0.0) / n)


def rms_relative_gap(estimate, reference) -> float:
    """``RMS(estimate - reference) / RMS(reference)``."""
    e = _clean(estimate)
    r = _clean(reference)
    return float(np.sqrt(np.mean((e - r) ** 2)) / np.sqrt(np.mean(r ** 2)))
