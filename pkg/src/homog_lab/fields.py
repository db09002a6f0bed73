"""Stationary finite-range random coefficients and their correctors.

Both coefficients are moving averages over a shifted lattice of i.i.d. values,

    c(x) = sum_j eta_j k((x - s (j + U)) / s),

with spacing ``s`` equal to the dependence range for the box kernel and half
of it for the triangle kernel.  With the box kernel a field is piecewise
constant on the cells ``[s(j+U), s(j+1+U))`` and keeps the marginal law of the
lattice values; with the triangle kernel it is the linear interpolant of the
lattice values.  Values at distance more than the dependence range apart are
independent, so the mixing coefficient vanishes beyond that range.

All antiderivatives used by the correctors (``int 1/a``, ``int c`` and
``int (int c)/a``) are computed segment by segment on the union of the two
lattices, exactly for box fields and by Gauss-Legendre quadrature on each
(short, smooth) segment for triangle fields.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import integrate

from . import rng as _rng

BLOCK = 4096
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


# --------------------------------------------------------------------------
# marginals
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoPoint:
    """``a = lo`` with probability ``p``, else ``hi``."""

    lo: float
    hi: float
    p: float = 0.5

    def sample(self, u):
        return np.where(u < self.p, self.lo, self.hi)

    def mean_inverse(self) -> float:
        return self.p / self.lo + (1.0 - self.p) / self.hi

    def validate(self):
        if not (0.0 < self.lo <= self.hi < math.inf):
            raise ValueError(f"need 0 < a_lo <= a_hi < inf, got {self}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"probability p must lie in [0, 1], got {self.p}")


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def sample(self, u):
        return self.lo + (self.hi - self.lo) * u

    def mean_inverse(self) -> float:
        if self.hi == self.lo:
            return 1.0 / self.lo
        return math.log(self.hi / self.lo) / (self.hi - self.lo)

    def validate(self):
        if not (0.0 < self.lo <= self.hi < math.inf):
            raise ValueError(f"need 0 < a_lo <= a_hi < inf, got {self}")


@dataclass(frozen=True)
class Rademacher:
    """``+-sigma`` with equal probability."""

    sigma: float

    def sample(self, u):
        return np.where(u < 0.5, -self.sigma, self.sigma)

    def variance(self) -> float:
        return self.sigma ** 2

    def validate(self):
        if not self.sigma >= 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class UniformSym:
    """Uniform on ``[-sigma, sigma]``."""

    sigma: float

    def sample(self, u):
        return self.sigma * (2.0 * u - 1.0)

    def variance(self) -> float:
        return self.sigma ** 2 / 3.0

    def validate(self):
        if not self.sigma >= 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


AMarginal = Union[TwoPoint, Uniform]
CMarginal = Union[Rademacher, UniformSym]

_A_KINDS = {"two_point": TwoPoint, "uniform": Uniform}
_C_KINDS = {"rademacher": Rademacher, "uniform_sym": UniformSym}


@dataclass(frozen=True)
class FieldSpec:
    """Parametric description of the pair (a, c)."""

    a: AMarginal = TwoPoint(1.0, 4.0, 0.5)
    c: CMarginal = Rademacher(0.5)
    kernel: str = "box"
    dependence_range: float = 1.0
    coupling: str = "independent"

    def __post_init__(self):
        if self.kernel not in ("box", "triangle"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if not self.dependence_range >= 1.0:
            raise ValueError("dependence_range must be >= 1")
        if self.coupling != "independent":
            raise ValueError(f"unsupported coupling {self.coupling!r}")
        if not isinstance(self.a, (TwoPoint, Uniform)):
            raise TypeError("a marginal must be TwoPoint or Uniform")
        if not isinstance(self.c, (Rademacher, UniformSym)):
            raise TypeError("c marginal must be Rademacher or UniformSym")
        self.a.validate()
        self.c.validate()

    @property
    def spacing(self) -> float:
        m = self.dependence_range
        return m if self.kernel == "box" else 0.5 * m

    @property
    def a_lo(self) -> float:
        return self.a.lo

    @property
    def a_hi(self) -> float:
        return self.a.hi

    @property
    def c_bound(self) -> float:
        # kernel maximum is 1 and the triangle field is a convex combination
        return self.c.sigma

    def to_dict(self) -> dict:
        d = {
            "kernel": self.kernel,
            "dependence_range": repr(float(self.dependence_range)),
            "a_marginal": "two_point" if isinstance(self.a, TwoPoint) else "uniform",
            "a_lo": repr(float(self.a.lo)),
            "a_hi": repr(float(self.a.hi)),
            "c_marginal": "rademacher" if isinstance(self.c, Rademacher) else "uniform_sym",
            "sigma": repr(float(self.c.sigma)),
            "coupling": self.coupling,
        }
        if isinstance(self.a, TwoPoint):
            d["a_p"] = repr(float(self.a.p))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FieldSpec":
        d = dict(d)
        known = {"kernel", "dependence_range", "a_marginal", "a_lo", "a_hi",
                 "a_p", "c_marginal", "sigma", "coupling"}
        unknown = set(d) - known
        if unknown:
            raise KeyError(f"unknown field keys: {sorted(unknown)}")
        a_kind = d.get("a_marginal", "two_point")
        if a_kind not in _A_KINDS:
            raise ValueError(f"unknown a_marginal {a_kind!r}")
        lo, hi = float(d.get("a_lo", 1.0)), float(d.get("a_hi", 4.0))
        if a_kind == "two_point":
            a = TwoPoint(lo, hi, float(d.get("a_p", 0.5)))
        else:
            if "a_p" in d:
                raise KeyError("a_p only applies to the two_point marginal")
            a = Uniform(lo, hi)
        c_kind = d.get("c_marginal", "rademacher")
        if c_kind not in _C_KINDS:
            raise ValueError(f"unknown c_marginal {c_kind!r}")
        c = _C_KINDS[c_kind](float(d.get("sigma", 0.5)))
        return cls(a=a, c=c, kernel=d.get("kernel", "box"),
                   dependence_range=float(d.get("dependence_range", 1.0)),
                   coupling=d.get("coupling", "independent"))


# --------------------------------------------------------------------------
# realizations
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SegmentTable:
    """Piecewise description of a realization on ``[x[0], x[-1]]``.

    On segment ``k`` both coefficients are affine, ``a = a0 + da * tau`` and
    ``c = c0 + dc * tau`` with ``tau = x - x[k]``.  ``A``, ``C`` and ``P`` hold
    ``int_0^x 1/a``, ``int_0^x c`` and ``Phi(x)`` at the breakpoints.
    """

    x: np.ndarray
    a0: np.ndarray
    da: np.ndarray
    c0: np.ndarray
    dc: np.ndarray
    A: np.ndarray
    C: np.ndarray
    P: np.ndarray
    exact: bool

    @property
    def lo(self) -> float:
        return float(self.x[0])

    @property
    def hi(self) -> float:
        return float(self.x[-1])

    def locate(self, x):
        k = np.searchsorted(self.x, x, side="right") - 1
        return np.clip(k, 0, len(self.x) - 2)


def _inv_integral(a0, da, tau):
    """int_0^tau ds / (a0 + da s)."""
    r = da * tau / a0
    small = np.abs(r) < 1e-9
    safe_da = np.where(small, 1.0, da)
    exact = np.log1p(np.where(small, 0.0, r)) / safe_da
    return np.where(small, tau / a0 * (1.0 - 0.5 * r), exact)


def _phi_integral(a0, da, c0, dc, Ck, tau, exact):
    """int_0^tau (Ck + c0 s + dc s^2 / 2) / (a0 + da s) ds."""
    if exact:
        return (Ck * tau + 0.5 * c0 * tau ** 2 + dc * tau ** 3 / 6.0) / a0
    s = 0.5 * tau[..., None] * (_GL_NODES + 1.0)
    num = Ck[..., None] + c0[..., None] * s + 0.5 * dc[..., None] * s ** 2
    den = a0[..., None] + da[..., None] * s
    return 0.5 * tau * np.sum(_GL_WEIGHTS * num / den, axis=-1)


class FieldRealization:
    """One sampled pair (a, c); lattice values are generated lazily per block.

    Evaluation is a pure function of ``(spec, seed)``: block ``b`` of the
    lattice values is always drawn from the same keyed counter range, so the
    order of queries never matters.  The block cache and the segment table are
    the only mutable state and are extended under a lock.
    """

    def __init__(self, spec: FieldSpec, seed: int):
        self.spec = spec
        self.seed = int(seed)
        shift_rng = _rng.stream(self.seed, _rng.FIELD_SHIFT)
        self.shift_a, self.shift_c = (float(v) for v in shift_rng.random(2))
        self._keys = {"a": _rng.philox_key(self.seed, _rng.FIELD_A),
                      "c": _rng.philox_key(self.seed, _rng.FIELD_C)}
        self._blocks: dict[tuple[str, int], np.ndarray] = {}
        self._lock = threading.RLock()
        self._table: SegmentTable | None = None

    # lattice values ------------------------------------------------------
    def _block(self, which: str, b: int) -> np.ndarray:
        arr = self._blocks.get((which, b))
        if arr is None:
            u = _rng.block_uniforms(self._keys[which], b, BLOCK)
            marginal = self.spec.a if which == "a" else self.spec.c
            arr = np.asarray(marginal.sample(u), dtype=float)
            arr.setflags(write=False)
            with self._lock:
                arr = self._blocks.setdefault((which, b), arr)
        return arr

    def lattice_values(self, which: str, j) -> np.ndarray:
        """Lattice values ``alpha_j`` (``which='a'``) or ``eta_j`` (``'c'``)."""
        j = np.asarray(j, dtype=np.int64)
        blocks = np.floor_divide(j, BLOCK)
        offsets = j - blocks * BLOCK
        out = np.empty(j.shape, dtype=float)
        for b in np.unique(blocks):
            mask = blocks == b
            out[mask] = self._block(which, int(b))[offsets[mask]]
        return out

    def _eval(self, which: str, x):
        x = np.asarray(x, dtype=float)
        s = self.spec.spacing
        shift = self.shift_a if which == "a" else self.shift_c
        xi = x / s - shift
        j = np.floor(xi).astype(np.int64)
        if self.spec.kernel == "box":
            return self.lattice_values(which, j)
        frac = xi - j
        return ((1.0 - frac) * self.lattice_values(which, j)
                + frac * self.lattice_values(which, j + 1))

    def a(self, x):
        return self._eval("a", x)

    def c(self, x):
        return self._eval("c", x)

    def breakpoints(self, which: str, lo: float, hi: float) -> np.ndarray:
        """Lattice points of field ``which`` inside ``[lo, hi]``."""
        s = self.spec.spacing
        shift = self.shift_a if which == "a" else self.shift_c
        j0 = math.floor(lo / s - shift)
        j1 = math.ceil(hi / s - shift)
        pts = s * (np.arange(j0, j1 + 1) + shift)
        return pts[(pts >= lo) & (pts <= hi)]

    # segment table -------------------------------------------------------
    def table(self, lo: float, hi: float) -> SegmentTable:
        """Segment table covering ``[lo, hi]`` (grown and cached)."""
        t = self._table
        if t is not None and t.lo <= lo and hi <= t.hi:
            return t
        with self._lock:
            t = self._table
            if t is not None and t.lo <= lo and hi <= t.hi:
                return t
            span = max(hi - lo, 8.0 * self.spec.dependence_range)
            new_lo = min(lo - 0.25 * span, 0.0)
            new_hi = max(hi + 0.25 * span, 0.0)
            if t is not None:
                new_lo = min(new_lo, t.lo)
                new_hi = max(new_hi, t.hi)
            t = self._build_table(new_lo, new_hi)
            self._table = t
            return t

    def _build_table(self, lo: float, hi: float) -> SegmentTable:
        pts = np.concatenate([self.breakpoints("a", lo, hi),
                              self.breakpoints("c", lo, hi), [lo, 0.0, hi]])
        x = np.unique(pts)
        left, right = x[:-1], x[1:]
        length = right - left
        exact = self.spec.kernel == "box"
        if exact:
            mid = 0.5 * (left + right)
            a0, c0 = self.a(mid), self.c(mid)
            da = np.zeros_like(a0)
            dc = np.zeros_like(c0)
        else:
            a0, c0 = self.a(left), self.c(left)
            da = (self.a(right) - a0) / length
            dc = (self.c(right) - c0) / length
        k0 = int(np.searchsorted(x, 0.0))

        def cumulate(inc):
            # sum outward from the origin so that values at a breakpoint do
            # not depend on how far the table extends
            cum = np.zeros(len(x))
            cum[k0 + 1:] = np.cumsum(inc[k0:])
            cum[:k0] = -np.cumsum(inc[:k0][::-1])[::-1]
            return cum

        A = cumulate(_inv_integral(a0, da, length))
        C = cumulate(length * (c0 + 0.5 * dc * length))
        P = cumulate(_phi_integral(a0, da, c0, dc, C[:-1], length, exact))
        return SegmentTable(x, a0, da, c0, dc, A, C, P, exact)

    def _query(self, x):
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return x, None, None, None
        t = self.table(float(np.min(x)), float(np.max(x)))
        k = t.locate(x)
        return x, t, k, x - t.x[k]

    def int_inv_a(self, x):
        """``int_0^x dy / a(y)``."""
        x, t, k, tau = self._query(x)
        if t is None:
            return np.zeros_like(x)
        return t.A[k] + _inv_integral(t.a0[k], t.da[k], tau)

    def int_c(self, x):
        """``int_0^x c(y) dy``."""
        x, t, k, tau = self._query(x)
        if t is None:
            return np.zeros_like(x)
        return t.C[k] + tau * (t.c0[k] + 0.5 * t.dc[k] * tau)

    def phi(self, x):
        """``Phi(x) = int_0^x (1/a(z)) int_0^z c(y) dy dz``."""
        x, t, k, tau = self._query(x)
        if t is None:
            return np.zeros_like(x)
        return t.P[k] + _phi_integral(t.a0[k], t.da[k], t.c0[k], t.dc[k],
                                      t.C[k], tau, t.exact)


def make_field(spec: FieldSpec, seed: int) -> FieldRealization:
    """Deterministic realization of ``spec`` for a 64-bit ``seed``."""
    if not isinstance(spec, FieldSpec):
        raise TypeError("spec must be a FieldSpec")
    return FieldRealization(spec, seed)


def eval_a(f: FieldRealization, x):
    return f.a(x)


def eval_c(f: FieldRealization, x):
    return f.c(x)


# --------------------------------------------------------------------------
# covariance and effective coefficients
# --------------------------------------------------------------------------

def _eta_variance(spec: FieldSpec) -> float:
    return spec.c.variance()


def covariance_c(spec: FieldSpec, x):
    """Closed-form ``E[c(0) c(x)]``."""
    r = np.abs(np.asarray(x, dtype=float)) / spec.spacing
    v = _eta_variance(spec)
    if spec.kernel == "box":
        return v * np.clip(1.0 - r, 0.0, None)
    # autocorrelation of a unit tent with half-width equal to the spacing
    inner = 2.0 / 3.0 - r ** 2 + 0.5 * r ** 3
    outer = np.clip(2.0 - r, 0.0, None) ** 3 / 6.0
    return v * np.where(r <= 1.0, inner, outer)


def effective_c_sq(spec: FieldSpec) -> float:
    """``c_bar^2 = int E[c(0) c(x)] dx``: Var(eta) (int k)^2 / spacing."""
    m = spec.dependence_range
    scale = m if spec.kernel == "box" else 0.5 * m
    return _eta_variance(spec) * scale


def _triangle_mean_inverse(a: AMarginal) -> float:
    # E int_0^1 ds / ((1-s) a0 + s a1) for independent endpoint values
    def logmean_inv(x, y):
        if abs(x - y) <= 1e-14 * max(x, y):
            return 1.0 / x
        return math.log(y / x) / (y - x)

    if isinstance(a, TwoPoint):
        p, q = a.p, 1.0 - a.p
        return (p * p / a.lo + q * q / a.hi
                + 2.0 * p * q * logmean_inv(a.lo, a.hi))
    if a.hi == a.lo:
        return 1.0 / a.lo
    width = a.hi - a.lo
    val, _ = integrate.dblquad(lambda y, x: logmean_inv(x, y) / width ** 2,
                               a.lo, a.hi, a.lo, a.hi, epsabs=1e-13, epsrel=1e-12)
    return val


def effective_a(spec: FieldSpec, method: str = "closed_form") -> float:
    """Harmonic mean ``a_bar = 1 / E[1/a]``.

    ``closed_form`` covers both marginals for the box kernel and the two-point
    marginal for the triangle kernel; ``quadrature`` is used otherwise (and may
    be requested explicitly).  See :func:`effective_a_mc` for the sampled
    estimate.
    """
    if method not in ("closed_form", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    if spec.kernel == "box":
        if method == "closed_form":
            return 1.0 / spec.a.mean_inverse()
        val, _ = integrate.quad(lambda u: 1.0 / float(spec.a.sample(u)), 0.0, 1.0,
                                points=[getattr(spec.a, "p", 0.5)], limit=200)
        return 1.0 / val
    if method == "closed_form" and isinstance(spec.a, Uniform) and spec.a.lo != spec.a.hi:
        raise ValueError("no closed form for uniform a with the triangle kernel; "
                         "use method='quadrature'")
    return 1.0 / _triangle_mean_inverse(spec.a)


def effective_a_mc(spec: FieldSpec, n: int, rng: np.random.Generator):
    """Sampled ``(a_bar, se)`` from ``n`` independent one-point draws of 1/a."""
    u0, u1, s = rng.random((3, n))
    a0 = spec.a.sample(u0)
    if spec.kernel == "box":
        inv = 1.0 / a0
    else:
        inv = 1.0 / ((1.0 - s) * a0 + s * spec.a.sample(u1))
    m = inv.mean()
    se_m = inv.std(ddof=1) / math.sqrt(n)
    return 1.0 / m, se_m / m ** 2


@dataclass(frozen=True)
class EffectiveCoefficients:
    a_bar: float
    c_bar_sq: float
    provenance: str = "closed_form"
    a_bar_se: float = 0.0

    @property
    def c_bar(self) -> float:
        return math.sqrt(self.c_bar_sq)


def effective_coefficients(spec: FieldSpec, method: str = "closed_form",
                           n: int = 100_000, rng=None) -> EffectiveCoefficients:
    if method == "monte_carlo":
        rng = rng if rng is not None else _rng.stream(0, _rng.MISC)
        a_bar, se = effective_a_mc(spec, n, rng)
        return EffectiveCoefficients(a_bar, effective_c_sq(spec), method, se)
    if method == "closed_form" and spec.kernel == "triangle" and isinstance(spec.a, Uniform):
        method = "quadrature"
    return EffectiveCoefficients(effective_a(spec, method), effective_c_sq(spec), method)


# --------------------------------------------------------------------------
# correctors and rescaled processes
# --------------------------------------------------------------------------

def corrector_chi(f: FieldRealization, a_bar: float, x):
    """``chi(x) = a_bar int_0^x dy/a(y) - x``."""
    x = np.asarray(x, dtype=float)
    return a_bar * f.int_inv_a(x) - x


def corrector_phi(f: FieldRealization, x):
    """``(Phi(x), Phi'(x))`` with ``(a Phi')' = c`` and ``Phi(0) = Phi'(0) = 0``."""
    x = np.asarray(x, dtype=float)
    return f.phi(x), f.int_c(x) / f.a(x)


@dataclass(frozen=True)
class CorrectorTable:
    x: np.ndarray
    chi: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    exact: bool


def corrector_table(f: FieldRealization, a_bar: float, x) -> CorrectorTable:
    x = np.asarray(x, dtype=float)
    phi, dphi = corrector_phi(f, x)
    return CorrectorTable(x, corrector_chi(f, a_bar, x), phi, dphi,
                          exact=f.spec.kernel == "box")


def _check_eps(eps):
    if not eps > 0:
        raise ValueError(f"epsilon must be positive, got {eps}")


def w_eps(f: FieldRealization, c_bar: float, eps: float, x):
    """``W_eps(x) = (1 / (c_bar sqrt(eps))) int_0^x c(y/eps) dy``."""
    _check_eps(eps)
    if not c_bar > 0:
        raise ValueError("c_bar must be positive")
    x = np.asarray(x, dtype=float)
    return math.sqrt(eps) * f.int_c(x / eps) / c_bar


def f_eps(f: FieldRealization, eps: float, x):
    """``F_eps(x) = eps^{3/2} Phi(x/eps)``."""
    _check_eps(eps)
    x = np.asarray(x, dtype=float)
    return eps ** 1.5 * f.phi(x / eps)


def k_eps(f: FieldRealization, eps: float, x):
    """``k_eps(x) = int_0^x dz / a(z/eps)``."""
    _check_eps(eps)
    x = np.asarray(x, dtype=float)
    return eps * f.int_inv_a(x / eps)


def w_eps_variance(spec: FieldSpec, eps: float, x: float) -> float:
    """Exact ``E[W_eps(x)^2] = (1/(c_bar^2 eps)) int_0^x int_0^x cov((y-z)/eps)``."""
    _check_eps(eps)
    x = abs(float(x))
    c2 = effective_c_sq(spec)
    upper = min(x / eps, spec.dependence_range)
    # reduce the double integral over the square to one over the lag
    val, _ = integrate.quad(lambda v: (x - eps * v) * float(covariance_c(spec, v)),
                            0.0, upper, points=[spec.spacing] if spec.spacing < upper else None,
                            epsabs=1e-14, epsrel=1e-12, limit=200)
    return 2.0 * val / c2


def xi_gamma_eps(f: FieldRealization, c_bar: float, eps: float, gamma: float,
                 R: float = 1e3) -> float:
    """``sup_{|x| <= R} |W_eps(x)| / (1 + |x|)^(1 - gamma)``.

    ``W_eps`` is piecewise quadratic (linear for the box kernel) between the
    scaled lattice points, so the supremum over each piece is attained at an
    endpoint or at a root of the derivative of the ratio.
    """
    if not 0.0 < gamma < 0.5:
        raise ValueError("gamma must lie in (0, 1/2)")
    _check_eps(eps)
    if not c_bar > 0:
        raise ValueError("c_bar must be positive")
    beta = 1.0 - gamma
    t = f.table(-R / eps, R / eps)
    x = t.x * eps
    inside = (x > -R) & (x < R)
    knots = np.unique(np.concatenate([x[inside], [-R, R, 0.0]]))
    left, right = knots[:-1], knots[1:]
    length = right - left
    sign = np.where(0.5 * (left + right) >= 0.0, 1.0, -1.0)
    # W on each piece as q0 + q1 tau + q2 tau^2 in tau = x - left
    k = t.locate(0.5 * (left + right) / eps)
    tau0 = left / eps - t.x[k]
    scale = math.sqrt(eps) / c_bar
    c_left = t.c0[k] + t.dc[k] * tau0
    q0 = w_eps(f, c_bar, eps, left)
    q1 = scale * c_left / eps
    q2 = scale * 0.5 * t.dc[k] / eps ** 2
    d0 = 1.0 + np.abs(left)
    # numerator of the derivative of q / (1 + |x|)^beta
    c0_ = q1 * d0 - beta * sign * q0
    c1_ = q1 * sign + 2.0 * q2 * d0 - beta * sign * q1
    c2_ = (2.0 - beta) * sign * q2
    cands = [np.zeros_like(left), length]
    with np.errstate(divide="ignore", invalid="ignore"):
        lin = np.where(c1_ != 0.0, -c0_ / c1_, np.nan)
        disc = c1_ ** 2 - 4.0 * c2_ * c0_
        sq = np.sqrt(np.where(disc >= 0.0, disc, np.nan))
        quad = np.abs(c2_) > 1e-300
        r1 = np.where(quad, (-c1_ + sq) / (2.0 * c2_), lin)
        r2 = np.where(quad, (-c1_ - sq) / (2.0 * c2_), lin)
    for r in (r1, r2):
        ok = np.isfinite(r) & (r > 0.0) & (r < length)
        cands.append(np.where(ok, r, 0.0))
    best = 0.0
    for tau in cands:
        w = q0 + q1 * tau + q2 * tau ** 2
        best = max(best, float(np.max(np.abs(w) / (d0 + sign * tau) ** beta)))
    return best

