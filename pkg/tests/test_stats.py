import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from homog_lab import stats as S

samples = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=40)


# ---------------------------------------------------------------------- KS

def test_ks_examples():
    assert S.ks_two_sample([1, 2, 3], [1, 2, 3]).statistic == 0.0
    assert S.ks_two_sample([1, 2, 3], [10, 11]).statistic == 1.0
    assert S.ks_two_sample([1, 2, 3], [1.5, 2.5, 3.5]).statistic == pytest.approx(1 / 3)


def test_ks_threshold_formula():
    assert S.ks_threshold(100, 100) == pytest.approx(1.6276 * math.sqrt(0.02))
    assert S.ks_threshold(100, 100, 0.01) == pytest.approx(1.6276 * math.sqrt(0.02) + 0.02)
    # the constant is the 0.99 quantile of the Kolmogorov distribution
    assert stats.kstwobign.ppf(0.99) == pytest.approx(S.KS_C_001, abs=1e-4)


def test_ks_verdict():
    r = S.ks_two_sample([1, 2, 3], [1.5, 2.5, 3.5], threshold=0.5)
    assert r.passed is True and r.threshold == 0.5
    assert S.ks_two_sample([1, 2], [5, 6], threshold=0.5).passed is False


@pytest.mark.filterwarnings("ignore:ks_2samp")
@settings(max_examples=60, deadline=None)
@given(A=samples, B=samples)
def test_ks_symmetric_and_in_range(A, B):
    d = S.ks_two_sample(A, B).statistic
    assert 0.0 <= d <= 1.0
    assert d == S.ks_two_sample(B, A).statistic


@pytest.mark.filterwarnings("ignore:ks_2samp")
@settings(max_examples=60, deadline=None)
@given(A=samples, B=samples)
def test_ks_invariant_under_increasing_map(A, B):
    f = lambda x: np.arctan(np.asarray(x) / 100.0) ** 3
    fa, fb = f(A), f(B)
    # the map must stay strictly increasing in floating point on these values
    vals = np.unique(np.concatenate([A, B]))
    if np.all(np.diff(f(vals)) > 0):
        assert S.ks_two_sample(A, B).statistic == S.ks_two_sample(fa, fb).statistic


def test_input_validation():
    with pytest.raises(ValueError):
        S.ks_two_sample([], [1.0])
    with pytest.raises(ValueError):
        S.ks_two_sample([1.0, np.nan], [1.0])
    with pytest.raises(ValueError):
        S.energy_distance([[1.0, 2.0]], [[1.0]])
    with pytest.raises(ValueError):
        S.gaussian_fit_ks([1.0, 2.0], 0.0, 0.0)
    with pytest.raises(ValueError):
        S.bootstrap_ci([1.0, 2.0], B=10)


# ----------------------------------------------------------- energy distance

def _brute_energy(A, B):
    A = np.asarray(A, float).reshape(len(A), -1)
    B = np.asarray(B, float).reshape(len(B), -1)
    d = lambda u, v: np.linalg.norm(u - v)
    ab = np.mean([d(a, b) for a in A for b in B])
    aa = np.mean([d(a, b) for a in A for b in A])
    bb = np.mean([d(a, b) for a in B for b in B])
    return 2 * ab - aa - bb


def test_energy_matches_double_sum():
    rng = np.random.default_rng(0)
    A, B = rng.normal(size=10), rng.normal(0.5, 1.2, size=10)
    assert S.energy_distance(A, B).statistic == pytest.approx(_brute_energy(A, B), rel=1e-12)
    A3, B3 = rng.normal(size=(10, 3)), rng.normal(size=(8, 3))
    assert S.energy_distance(A3, B3).statistic == pytest.approx(_brute_energy(A3, B3), rel=1e-12)


def test_energy_one_dimensional_cdf_form():
    # in 1D the statistic is 2 int (F_A - F_B)^2 dx
    rng = np.random.default_rng(1)
    A, B = rng.normal(size=30), rng.normal(0.3, 1, size=20)
    grid = np.sort(np.concatenate([A, B]))
    FA = np.searchsorted(np.sort(A), grid, side="right") / len(A)
    FB = np.searchsorted(np.sort(B), grid, side="right") / len(B)
    cdf = 2 * np.sum((FA[:-1] - FB[:-1]) ** 2 * np.diff(grid))
    assert S.energy_distance(A, B).statistic == pytest.approx(cdf, rel=1e-10)


def test_energy_identical_multisets_and_translation():
    A = np.array([0.3, 1.0, 1.0, 2.5])
    assert S.energy_distance(A, A[::-1]).statistic == 0.0
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 3))
    off = np.array([1000.0, 0, 0])
    # 2 offset minus the within-cloud mean distances, which are O(1)
    assert S.energy_distance(X, X + off).statistic == pytest.approx(2000.0, rel=5e-3)


def test_energy_zero_iff_identical_on_small_multisets():
    vals = [0.0, 1.0, 2.0]
    bags = [b for k in (1, 2) for b in itertools.combinations_with_replacement(vals, k)]
    for A, B in itertools.product(bags, bags):
        d = S.energy_distance(list(A), list(B)).statistic
        same = np.allclose(np.bincount(np.array(A, int), minlength=3) / len(A),
                           np.bincount(np.array(B, int), minlength=3) / len(B))
        assert d >= 0
        assert (d < 1e-12) == same


# ----------------------------------------------------- goodness of fit, CI

def test_gaussian_fit_examples():
    n = 1000
    q = stats.norm.ppf((np.arange(n) + 0.5) / n)
    assert S.gaussian_fit_ks(q, 0.0, 1.0).statistic <= 1.0 / n
    x = np.random.default_rng(3).normal(size=10_000)
    # sup |Phi(x) - Phi(x/2)| is attained where phi(x) = phi(x/2)/2
    xs = math.sqrt(8 * math.log(2) / 3)
    exact = stats.norm.cdf(xs) - stats.norm.cdf(xs / 2)
    assert exact == pytest.approx(0.1613, abs=1e-4)
    assert abs(S.gaussian_fit_ks(x, 0.0, 4.0).statistic - exact) <= 0.02


def test_bootstrap_ci():
    r = S.bootstrap_ci(np.full(50, 2.5), B=200)
    assert r.ci_lo == r.ci_hi == 2.5 == r.statistic
    x = np.random.default_rng(4).normal(1.0, 1.0, size=400)
    r = S.bootstrap_ci(x, B=500, level=0.95, rng=np.random.default_rng(5))
    assert r.ci_lo < x.mean() < r.ci_hi
    assert r.ci_hi - r.ci_lo == pytest.approx(2 * 1.96 / 20, rel=0.25)


def test_variance_se_normal():
    x = np.random.default_rng(6).normal(size=20_000)
    v, se = S.variance_se(x)
    assert se == pytest.approx(v * math.sqrt(2 / 20_000), rel=0.05)


def test_rms_relative_gap():
    assert S.rms_relative_gap([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert S.rms_relative_gap([1.1, -1.1], [1.0, -1.0]) == pytest.approx(0.1)
