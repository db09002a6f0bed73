import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from homog_lab import fields as F

SPEC = F.FieldSpec()  # two_point(1, 4, 0.5), rademacher(0.5), box, m = 1
CONST = F.FieldSpec(a=F.TwoPoint(1.0, 1.0, 0.5), c=F.Rademacher(0.0))
TRI = F.FieldSpec(kernel="triangle", dependence_range=2.0)


# ---------------------------------------------------------------- construction

def test_degenerate_constants():
    f = F.make_field(CONST, 3)
    x = np.linspace(-50, 50, 1001)
    assert np.all(F.eval_a(f, x) == 1.0)
    assert np.all(F.eval_c(f, x) == 0.0)


def test_determinism_same_seed_and_query_order():
    x = np.array([1e6, -3.5, 0.25, 12345.678])
    f1 = F.make_field(SPEC, 99)
    a1 = F.eval_a(f1, x)
    f2 = F.make_field(SPEC, 99)
    # query far away first, then in a different order
    f2.a(np.array([-2e6]))
    a2 = F.eval_a(f2, x[::-1])[::-1]
    assert np.array_equal(a1, a2)
    assert np.array_equal(F.eval_c(f1, x), F.eval_c(F.make_field(SPEC, 99), x))


def test_different_seeds_differ():
    x = np.linspace(0, 100, 101)
    assert not np.array_equal(F.make_field(SPEC, 1).c(x), F.make_field(SPEC, 2).c(x))


def test_empirical_mean_inverse_a():
    f = F.make_field(SPEC, 7)
    L = 1e4
    est = f.int_inv_a(np.array([L]))[0] / L
    # unit cells are i.i.d.; sd of 1/a is 0.375
    se = 0.375 / math.sqrt(L)
    assert abs(est - 0.625) <= 3 * se


def test_box_fields_constant_on_shifted_cells():
    f = F.make_field(SPEC, 5)
    U = f.shift_c
    for j in range(-5, 5):
        pts = j + U + np.array([0.0, 0.3, 0.7, 0.999999])
        assert np.unique(f.c(pts)).size == 1


def test_time_average_of_c_vanishes():
    spec = F.FieldSpec(c=F.Rademacher(1.0))
    f = F.make_field(spec, 11)
    avg = f.int_c(np.array([1e4]))[0] / 1e4
    assert abs(avg) <= 3 / math.sqrt(1e4)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**63), x=st.floats(-1e5, 1e5),
       kernel=st.sampled_from(["box", "triangle"]))
def test_value_bounds(seed, x, kernel):
    spec = F.FieldSpec(kernel=kernel, c=F.UniformSym(0.7))
    f = F.make_field(spec, seed)
    a = f.a(np.array([x]))[0]
    c = f.c(np.array([x]))[0]
    assert 1.0 <= a <= 4.0
    assert abs(c) <= 0.7


def test_invalid_specs_rejected():
    with pytest.raises(ValueError):
        F.FieldSpec(a=F.TwoPoint(0.0, 2.0))
    with pytest.raises(ValueError):
        F.FieldSpec(a=F.Uniform(3.0, 2.0))
    with pytest.raises(ValueError):
        F.FieldSpec(c=F.Rademacher(-1.0))
    with pytest.raises(ValueError):
        F.FieldSpec(kernel="gauss")
    with pytest.raises(ValueError):
        F.FieldSpec(dependence_range=0.5)


@settings(max_examples=30, deadline=None)
@given(lo=st.floats(0.1, 5), width=st.floats(0, 5), p=st.floats(0, 1),
       sigma=st.floats(0, 3), kernel=st.sampled_from(["box", "triangle"]),
       m=st.floats(1, 4), two_point=st.booleans(), rad=st.booleans())
def test_spec_roundtrip(lo, width, p, sigma, kernel, m, two_point, rad):
    a = F.TwoPoint(lo, lo + width, p) if two_point else F.Uniform(lo, lo + width)
    c = F.Rademacher(sigma) if rad else F.UniformSym(sigma)
    spec = F.FieldSpec(a=a, c=c, kernel=kernel, dependence_range=m)
    assert F.FieldSpec.from_dict(spec.to_dict()) == spec


def test_spec_unknown_key():
    with pytest.raises(KeyError):
        F.FieldSpec.from_dict({"sigmaa": "1"})


# ------------------------------------------------------- covariance and means

def test_covariance_examples():
    spec1 = F.FieldSpec(c=F.Rademacher(1.0))
    assert F.covariance_c(spec1, 0.0) == 1.0
    assert F.covariance_c(spec1, 1.0) == 0.0
    assert F.covariance_c(spec1, 3.7) == 0.0
    assert F.covariance_c(SPEC, 0.5) == pytest.approx(0.125)


@pytest.mark.parametrize("spec", [SPEC, TRI, F.FieldSpec(kernel="triangle", c=F.UniformSym(1.0)),
                                  F.FieldSpec(dependence_range=3.0, c=F.UniformSym(2.0))])
def test_covariance_integrates_to_c_bar_sq(spec):
    m = spec.dependence_range
    val, _ = integrate.quad(lambda x: float(F.covariance_c(spec, x)), -m, m,
                            points=[-spec.spacing, 0.0, spec.spacing], epsabs=1e-13)
    assert val == pytest.approx(F.effective_c_sq(spec), rel=1e-10)


@pytest.mark.parametrize("spec", [SPEC, TRI])
def test_covariance_matches_sample_products(spec):
    # empirical E[c(y) c(y + r)] over a long stretch of one realization
    f = F.make_field(spec, 21)
    y = np.linspace(0, 2e4, 400_001)
    for r in (0.0, 0.3, 0.75):
        emp = np.mean(f.c(y) * f.c(y + r))
        assert emp == pytest.approx(float(F.covariance_c(spec, r)), abs=0.006)


def test_effective_c_sq_examples():
    assert F.effective_c_sq(F.FieldSpec(c=F.Rademacher(0.0))) == 0.0
    assert F.effective_c_sq(F.FieldSpec(c=F.Rademacher(1.0))) == 1.0
    tri = F.FieldSpec(kernel="triangle", c=F.Rademacher(1.0))
    # independent 1D quadrature of the closed-form autocorrelation
    val, _ = integrate.quad(lambda x: float(F.covariance_c(tri, x)), -1, 1, points=[-0.5, 0, 0.5])
    assert F.effective_c_sq(tri) == pytest.approx(val, rel=1e-12)
    assert F.effective_c_sq(tri) == pytest.approx(0.5)


def test_effective_a_examples():
    assert F.effective_a(CONST) == 1.0
    assert F.effective_a(SPEC) == pytest.approx(1.6, rel=1e-15)
    assert F.effective_a(F.FieldSpec(a=F.Uniform(1.0, 2.0))) == pytest.approx(1 / math.log(2))
    assert F.effective_a(F.FieldSpec(a=F.Uniform(2.0, 2.0))) == 2.0


@pytest.mark.parametrize("spec", [SPEC, F.FieldSpec(a=F.Uniform(1.0, 3.0)),
                                  TRI, F.FieldSpec(kernel="triangle", a=F.Uniform(1.0, 3.0))])
def test_effective_a_quadrature_and_mc_agree(spec):
    q = F.effective_a(spec, "quadrature")
    assert spec.a_lo <= q <= spec.a_hi
    if not (spec.kernel == "triangle" and isinstance(spec.a, F.Uniform)):
        assert F.effective_a(spec) == pytest.approx(q, rel=1e-9)
    mc = F.effective_coefficients(spec, "monte_carlo", n=200_000,
                                  rng=np.random.default_rng(3))
    assert mc.provenance == "monte_carlo"
    assert abs(mc.a_bar - q) <= 4 * mc.a_bar_se


def test_effective_a_matches_spatial_average_triangle():
    f = F.make_field(TRI, 4)
    L = 4e4
    emp = L / f.int_inv_a(np.array([L]))[0]
    assert emp == pytest.approx(F.effective_a(TRI), rel=0.01)


def test_effective_coefficients_bounds():
    co = F.effective_coefficients(SPEC)
    assert co.a_bar == pytest.approx(1.6)
    assert co.c_bar == pytest.approx(0.5)
    assert co.provenance == "closed_form"


# ------------------------------------------------------------------ correctors

def test_corrector_identity_on_cells():
    f = F.make_field(SPEC, 8)
    a_bar = 1.6
    b = f.breakpoints("a", -500, 500)
    chi = F.corrector_chi(f, a_bar, b)
    slope = np.diff(chi) / np.diff(b)
    mid = 0.5 * (b[1:] + b[:-1])
    assert np.max(np.abs(f.a(mid) * (1 + slope) - a_bar)) / a_bar <= 1e-10


def test_corrector_vanishes_in_homogeneous_medium():
    f = F.make_field(F.FieldSpec(a=F.TwoPoint(2.5, 2.5)), 1)
    x = np.linspace(-30, 30, 601)
    assert np.max(np.abs(F.corrector_chi(f, 2.5, x))) <= 1e-12
    assert F.corrector_chi(f, 2.5, np.array([0.0]))[0] == 0.0


def test_corrector_increment_over_unit_cell_with_a_equal_one():
    f = F.make_field(SPEC, 12)
    b = f.breakpoints("a", 0, 50)
    vals = f.a(0.5 * (b[1:] + b[:-1]))
    j = int(np.flatnonzero(vals == 1.0)[0])
    lo, hi = b[j], b[j + 1]
    inc = np.diff(F.corrector_chi(f, 1.6, np.array([lo, hi])))[0]
    assert inc == pytest.approx((1.6 * 1.0 - 1.0) * (hi - lo), rel=1e-12)


def test_corrector_sublinear():
    R = 1e3
    x = np.linspace(-R, R, 4001)
    ratios = [np.max(np.abs(F.corrector_chi(F.make_field(SPEC, s), 1.6, x))) / R
              for s in range(20)]
    assert np.median(ratios) < 0.05


def test_phi_zero_for_zero_potential():
    f = F.make_field(F.FieldSpec(c=F.Rademacher(0.0)), 2)
    phi, dphi = F.corrector_phi(f, np.linspace(-10, 10, 11))
    assert np.all(phi == 0) and np.all(dphi == 0)


def test_phi_quadratic_on_first_cell():
    # a = 1 and c = kappa on the cell containing 0: Phi(x) = kappa x^2 / 2
    spec = F.FieldSpec(a=F.TwoPoint(1.0, 1.0), c=F.Rademacher(0.8))
    f = F.make_field(spec, 4)
    kappa = f.c(np.array([0.0]))[0]
    end = f.shift_c  # right end of the cell containing 0
    x = np.linspace(0, end, 7)
    phi, dphi = F.corrector_phi(f, x)
    np.testing.assert_allclose(phi, kappa * x ** 2 / 2, rtol=1e-13, atol=1e-16)
    np.testing.assert_allclose(dphi, kappa * x, rtol=1e-13, atol=1e-16)


def test_phi_unit_interval_constant_kappa():
    # cells of length 2, so some realization has [0, 1] inside one cell
    spec = F.FieldSpec(a=F.TwoPoint(1.0, 1.0), c=F.Rademacher(0.6), dependence_range=2.0)
    for seed in range(100):
        f = F.make_field(spec, seed)
        if 2.0 * f.shift_c >= 1.0:
            break
    kappa = f.c(np.array([0.0]))[0]
    assert F.corrector_phi(f, np.array([1.0]))[0][0] == pytest.approx(kappa / 2, rel=1e-13)


@pytest.mark.parametrize("spec", [SPEC, TRI])
def test_flux_derivative_reproduces_c(spec):
    f = F.make_field(spec, 31)
    b = np.unique(np.concatenate([f.breakpoints("a", -40, 40), f.breakpoints("c", -40, 40)]))
    mid = 0.5 * (b[1:] + b[:-1])
    h = 1e-5
    flux = lambda x: f.a(x) * F.corrector_phi(f, x)[1]
    fd = (flux(mid + h) - flux(mid - h)) / (2 * h)
    c = f.c(mid)
    scale = np.maximum(np.abs(c), 0.1)
    assert np.max(np.abs(fd - c) / scale) <= 1e-6


@pytest.mark.parametrize("x", [2.3, -2.3, 7.77])
def test_phi_triangle_against_adaptive_quadrature(x):
    f = F.make_field(TRI, 3)
    pts = np.unique(np.concatenate([f.breakpoints("a", min(0, x), max(0, x)),
                                    f.breakpoints("c", min(0, x), max(0, x))]))
    ref, _ = integrate.quad(lambda z: f.int_c(np.array([z]))[0] / f.a(np.array([z]))[0],
                            0, x, points=pts, limit=400, epsabs=1e-13, epsrel=1e-12)
    assert f.phi(np.array([x]))[0] == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_table_growth_keeps_values_bitwise():
    f = F.make_field(SPEC, 17)
    x = np.array([3.3, -2.2, 10.0])
    before = (f.int_inv_a(x), f.int_c(x), f.phi(x))
    f.table(-1e4, 1e4)
    after = (f.int_inv_a(x), f.int_c(x), f.phi(x))
    for u, v in zip(before, after):
        assert np.array_equal(u, v)


# ------------------------------------------------------- rescaled processes

def test_rescaled_zero_potential():
    f = F.make_field(F.FieldSpec(c=F.Rademacher(0.0)), 2)
    x = np.linspace(-3, 3, 13)
    assert np.all(F.w_eps(f, 1.0, 0.1, x) == 0)
    assert np.all(F.f_eps(f, 0.1, x) == 0)


def test_k_eps_constant_coefficient():
    f = F.make_field(F.FieldSpec(a=F.TwoPoint(2.0, 2.0)), 2)
    x = np.linspace(-3, 3, 13)
    for e in (1.0, 0.1, 0.013):
        np.testing.assert_allclose(F.k_eps(f, e, x), x / 2, rtol=1e-13, atol=1e-15)


def test_rescaled_reject_bad_eps():
    f = F.make_field(SPEC, 1)
    for fn in (lambda: F.w_eps(f, 0.5, 0.0, 1.0), lambda: F.f_eps(f, -1.0, 1.0),
               lambda: F.k_eps(f, 0.0, 1.0), lambda: F.w_eps(f, 0.0, 0.1, 1.0)):
        with pytest.raises(ValueError):
            fn()


@pytest.mark.parametrize("spec", [SPEC, TRI])
def test_F_eps_equals_integral_of_W_over_a(spec):
    f = F.make_field(spec, 6)
    eps, c_bar = 0.2, math.sqrt(F.effective_c_sq(spec))
    x = 1.7
    pts = eps * np.unique(np.concatenate([f.breakpoints("a", 0, x / eps),
                                          f.breakpoints("c", 0, x / eps)]))
    ref, _ = integrate.quad(lambda z: F.w_eps(f, c_bar, eps, np.array([z]))[0]
                            / f.a(np.array([z / eps]))[0], 0, x, points=pts, limit=400,
                            epsabs=1e-13)
    assert F.f_eps(f, eps, np.array([x]))[0] == pytest.approx(c_bar * ref, rel=1e-8)


def test_W_eps_derivative_is_scaled_potential():
    f = F.make_field(SPEC, 9)
    eps, c_bar = 0.1, 0.5
    b = eps * f.breakpoints("c", -20, 20)
    mid = 0.5 * (b[1:] + b[:-1])
    h = 1e-6
    d = (F.w_eps(f, c_bar, eps, mid + h) - F.w_eps(f, c_bar, eps, mid - h)) / (2 * h)
    np.testing.assert_allclose(c_bar * d, f.c(mid / eps) / math.sqrt(eps), rtol=1e-7)


def test_w_eps_variance_closed_form_box():
    # box kernel: 1 - eps/3 once x >= eps
    for e in (0.2, 0.05):
        assert F.w_eps_variance(SPEC, e, 1.0) == pytest.approx(1 - e / 3, rel=1e-12)


def test_w_eps_variance_against_double_integral():
    for spec in (SPEC, TRI):
        e, x = 0.3, 0.8
        c2 = F.effective_c_sq(spec)
        val, _ = integrate.dblquad(lambda y, z: float(F.covariance_c(spec, (y - z) / e)),
                                   0, x, 0, x, epsabs=1e-11)
        assert F.w_eps_variance(spec, e, x) == pytest.approx(val / (c2 * e), rel=1e-7)


@pytest.mark.parametrize("x", [0.5, 1.0, 2.0])
def test_w_eps_variance_monte_carlo(x):
    eps = 0.1
    vals = np.array([F.w_eps(F.make_field(SPEC, s), 0.5, eps, np.array([x]))[0]
                     for s in range(3000)])
    v = vals.var(ddof=1)
    se = v * math.sqrt(2 / (len(vals) - 1))
    assert abs(v - F.w_eps_variance(SPEC, eps, x)) <= 3 * se


# ---------------------------------------------------------------------- xi

def test_xi_zero_potential():
    f = F.make_field(F.FieldSpec(c=F.Rademacher(0.0)), 1)
    assert F.xi_gamma_eps(f, 1.0, 0.1, 0.25, R=50) == 0.0


def test_xi_rejects_gamma():
    f = F.make_field(SPEC, 1)
    for g in (0.0, 0.5, -0.1, 0.7):
        with pytest.raises(ValueError):
            F.xi_gamma_eps(f, 0.5, 0.1, g)


@pytest.mark.parametrize("spec", [SPEC, TRI])
def test_xi_is_sup_of_dense_evaluation(spec):
    f = F.make_field(spec, 13)
    c_bar = math.sqrt(F.effective_c_sq(spec))
    eps, gamma, R = 0.2, 0.25, 30.0
    xi = F.xi_gamma_eps(f, c_bar, eps, gamma, R)
    x = np.linspace(-R, R, 600_001)
    dense = np.max(np.abs(F.w_eps(f, c_bar, eps, x)) / (1 + np.abs(x)) ** (1 - gamma))
    assert dense <= xi * (1 + 1e-12)
    assert xi <= dense * (1 + 1e-4)
    w1 = abs(F.w_eps(f, c_bar, eps, np.array([1.0]))[0])
    assert xi >= w1 / 2 ** 0.75
