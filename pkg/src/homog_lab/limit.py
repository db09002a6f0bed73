"""The limit model: a two-sided Wiener potential seen by a Brownian motion.

For a frozen Wiener path ``W`` and ``X = sqrt(a_bar) B`` the limit exponent is

    Y = c_bar int l_t(y - x) W(dy),

with ``l_t`` the time-occupation density of ``X`` (``int_0^t f(X_s) ds =
int f(y) l_t(y) dy``).  This is the Feynman-Kac exponent of
``u_t = (a_bar/2) u'' + c_bar W' u``.  It is estimated two ways:

* ``direct``: a forward Riemann sum of the binned occupation density against
  the increments of ``W``;
* ``ito``: the Ito-Tanaka rearrangement
  ``2 (c_bar/a_bar) [int_x^{x+X_t} W dy - int_0^t W(x + X_s) dX_s]``,
  which needs no local time at all.

The mollified potential ``W_n = clip(W * rho_n, -n, n)`` used by the
PDE route is also computed here, analytically from the piecewise-linear ``W``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numba as nb
import numpy as np
from scipy import integrate

from . import rng as _rng
from .paths import LocalTimeProfile, Trajectory, occupation_density

DEFAULT_DT = 1e-3
DEFAULT_DELTA = 0.02
DEFAULT_DELTA_W = 0.01


# --------------------------------------------------------------------------
# Wiener paths
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WienerPath:
    """Piecewise-linear interpolation of ``W`` on ``y_k = y0 + k delta``."""

    y0: float
    delta: float
    values: np.ndarray

    @property
    def y(self) -> np.ndarray:
        return self.y0 + self.delta * np.arange(len(self.values))

    @property
    def lo(self) -> float:
        return self.y0

    @property
    def hi(self) -> float:
        return self.y0 + self.delta * (len(self.values) - 1)

    @property
    def origin(self) -> int:
        return int(round(-self.y0 / self.delta))

    def __call__(self, x):
        return np.interp(x, self.y, self.values)

    def covers(self, lo: float, hi: float) -> bool:
        return self.lo <= lo and hi <= self.hi

    def require(self, lo: float, hi: float):
        if not self.covers(lo, hi):
            raise ValueError(f"W grid [{self.lo:g}, {self.hi:g}] does not cover "
                             f"[{lo:g}, {hi:g}]")

    def _cumulative(self) -> np.ndarray:
        v = self.values
        G = np.concatenate([[0.0], np.cumsum(0.5 * self.delta * (v[1:] + v[:-1]))])
        return G - G[self.origin]

    def antiderivative(self, x):
        """Exact ``int_0^x W(y) dy`` for the piecewise-linear path."""
        x = np.asarray(x, dtype=float)
        self.require(float(np.min(x)), float(np.max(x)))
        G = self._cumulative()
        k = np.clip(np.floor((x - self.y0) / self.delta).astype(np.int64), 0,
                    len(self.values) - 2)
        tau = x - (self.y0 + k * self.delta)
        slope = (self.values[k + 1] - self.values[k]) / self.delta
        return G[k] + self.values[k] * tau + 0.5 * slope * tau ** 2

    @classmethod
    def from_function(cls, fn: Callable, half_range: float, delta: float) -> "WienerPath":
        """Deterministic path sampled from ``fn`` (used to inject test paths)."""
        J = int(math.ceil(half_range / delta))
        y = delta * np.arange(-J, J + 1)
        v = np.asarray(fn(y), dtype=float) * np.ones_like(y)
        return cls(float(y[0]), float(delta), v)


def sample_W(half_range: float, delta: float, rng: np.random.Generator) -> WienerPath:
    """Two-sided Wiener path on ``[-half_range, half_range]`` with ``W(0) = 0``.

    Independent ``N(0, delta)`` increments are summed outward from the origin
    on each side.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    J = int(math.ceil(half_range / delta))
    inc = rng.standard_normal(2 * J) * math.sqrt(delta)
    right = np.cumsum(inc[:J])
    left = np.cumsum(inc[J:])
    v = np.concatenate([left[::-1], [0.0], right])
    return WienerPath(-J * delta, float(delta), v)


def keyed_W(seed: int, w_index: int, half_range: float, delta: float) -> WienerPath:
    return sample_W(half_range, delta, _rng.stream(seed, _rng.WIENER, w_index))


# --------------------------------------------------------------------------
# mollification
# --------------------------------------------------------------------------

@lru_cache(maxsize=1)
def _bump_tables(m: int = 20001):
    """CDF ``R`` and first moment ``Q`` of the unit bump, plus its normalizer."""
    norm, _ = integrate.quad(lambda s: math.exp(-1.0 / (1.0 - s * s)), -1.0, 1.0,
                             epsabs=1e-15, epsrel=1e-13)
    y = np.linspace(-1.0, 1.0, m)
    rho = _bump_shape(y) / norm
    R = integrate.cumulative_simpson(rho, x=y, initial=0.0)
    Q = integrate.cumulative_simpson(y * rho, x=y, initial=0.0)
    return y, R, Q, norm


def _bump_shape(y):
    inside = np.abs(y) < 1.0
    return np.where(inside, np.exp(-1.0 / np.where(inside, 1.0 - y * y, 1.0)), 0.0)


def bump(y):
    """The mollifier ``rho`` (unit mass, support ``[-1, 1]``)."""
    return _bump_shape(np.asarray(y, dtype=float)) / _bump_tables()[3]


def _bump_R(v):
    ys, R, _, _ = _bump_tables()
    return np.interp(v, ys, R, left=0.0, right=1.0)


def _bump_Q(v):
    ys, _, Q, _ = _bump_tables()
    return np.interp(v, ys, Q, left=0.0, right=Q[-1])


def mollify(W: WienerPath, n: float, x, clip: bool = True):
    """``(W_n(x), W_n'(x))`` for ``W_n = clip(W * rho_n, -n, n)``.

    ``W`` is linear on each grid cell, so the convolution reduces to the
    tabulated CDF and first moment of ``rho``.  Where the clip is active the
    derivative is zero.
    """
    x = np.asarray(x, dtype=float)
    if not n > 0:
        raise ValueError("n must be positive")
    if W.delta >= 1.0 / n:
        raise ValueError("W grid must be finer than the mollification width 1/n")
    W.require(float(np.min(x)) - 1.0 / n, float(np.max(x)) + 1.0 / n)
    v = W.values
    slope = np.diff(v) / W.delta
    reach = int(math.ceil(1.0 / (n * W.delta))) + 1
    base = np.floor((x - W.y0) / W.delta).astype(np.int64)
    conv = np.zeros_like(x)
    deriv = np.zeros_like(x)
    for off in range(-reach, reach + 1):
        i = np.clip(base + off, 0, len(v) - 2)
        valid = (base + off >= 0) & (base + off <= len(v) - 2)
        yi = W.y0 + i * W.delta
        v_hi = n * (x - yi)
        v_lo = n * (x - yi - W.delta)
        dR = _bump_R(v_hi) - _bump_R(v_lo)
        dQ = _bump_Q(v_hi) - _bump_Q(v_lo)
        s = slope[i]
        conv += np.where(valid, (v[i] + s * (x - yi)) * dR - s / n * dQ, 0.0)
        deriv += np.where(valid, s * dR, 0.0)
    if clip:
        over = np.abs(conv) > n
        conv = np.clip(conv, -n, n)
        deriv = np.where(over, 0.0, deriv)
    return conv, deriv


# --------------------------------------------------------------------------
# exponent estimators
# --------------------------------------------------------------------------

def _prefactor(c_bar: float, a_bar: float, convention: str) -> float:
    if convention == "occupation":
        return c_bar
    if convention == "ratio":
        # c_bar / a_bar in front of the occupation density: the reading that
        # treats the occupation density as if it were the semimartingale
        # local time; kept only to show that it disagrees with the PDE
        return c_bar / a_bar
    raise ValueError(f"unknown convention {convention!r}")


def exponent_direct(L: LocalTimeProfile, W: WienerPath, x: float, c_bar: float,
                    a_bar: float, convention: str = "occupation") -> float:
    """``c_bar sum_k l(y_k + delta_W/2 - x) (W(y_{k+1}) - W(y_k))``.

    ``L`` is the occupation density of the path started at 0; it is read as a
    piecewise-constant function at the midpoints of the W cells.
    """
    if W.delta > 0.5 * L.delta * (1 + 1e-12):
        raise ValueError("W grid step must be at most half the bin width")
    edges = L.edges + x
    W.require(float(edges[0]), float(edges[-1]))
    k0 = int(math.floor((edges[0] - W.y0) / W.delta))
    k1 = int(math.ceil((edges[-1] - W.y0) / W.delta))
    k = np.arange(max(k0, 0), min(k1, len(W.values) - 1))
    mid = W.y0 + (k + 0.5) * W.delta
    j = np.floor((mid - edges[0]) / L.delta).astype(np.int64)
    inside = (j >= 0) & (j < len(L.values))
    lval = np.where(inside, L.values[np.clip(j, 0, len(L.values) - 1)], 0.0)
    dW = W.values[k + 1] - W.values[k]
    return float(_prefactor(c_bar, a_bar, convention) * np.sum(lval * dW))


def exponent_ito(traj: Trajectory, W: WienerPath, x: float, c_bar: float,
                 a_bar: float) -> float:
    """``2 (c_bar/a_bar) [int_x^{x+X_t} W dy - sum_k W(x + X_k) dX_k]``."""
    X = x + (traj.X - traj.X[0])
    W.require(float(X.min()), float(X.max()))
    G = W.antiderivative(np.array([X[-1], X[0]]))
    stoch = float(np.sum(W(X[:-1]) * np.diff(X)))
    return float(2.0 * c_bar / a_bar * (G[0] - G[1] - stoch))


def exponent_smoothed(traj: Trajectory, W: WienerPath, x: float, c_bar: float,
                      n: float) -> float:
    """``c_bar int_0^t W_n'(x + X_s) ds`` (left sums) for the mollified path."""
    X = x + (traj.X - traj.X[0])
    _, d = mollify(W, n, X[:-1])
    return float(c_bar * np.sum(d) * traj.dt)


# --------------------------------------------------------------------------
# Monte Carlo over paths for a frozen W
# --------------------------------------------------------------------------

@nb.njit(cache=True)
def _ito_batch(Wv, y0, dW, xs, stops, scale, sq_ab_dt, normals, Y, XT, lo_hi):
    """Ito exponents of many paths for several start points and stop times.

    ``Y[i, j, p]`` is the (unscaled) bracket for start ``xs[i]`` and stop step
    ``stops[j]``; ``XT[j, p]`` is the displacement at that stop.
    """
    n_paths, n_steps = normals.shape
    nx = xs.shape[0]
    m = Wv.shape[0]
    G = np.zeros(m)
    for k in range(1, m):
        G[k] = G[k - 1] + 0.5 * dW * (Wv[k] + Wv[k - 1])
    k0 = int(round(-y0 / dW))
    g0 = G[k0]
    for k in range(m):
        G[k] -= g0
    lo = 1e300
    hi = -1e300
    for p in range(n_paths):
        for i in range(nx):
            x = xs[i]
            pos = x
            acc = 0.0
            j = 0
            for s in range(n_steps):
                r = (pos - y0) / dW
                k = int(math.floor(r))
                if k < 0:
                    k = 0
                elif k > m - 2:
                    k = m - 2
                fr = r - k
                w = Wv[k] + fr * (Wv[k + 1] - Wv[k])
                step = sq_ab_dt * normals[p, s]
                acc += w * step
                pos += step
                if pos < lo:
                    lo = pos
                if pos > hi:
                    hi = pos
                while j < stops.shape[0] and stops[j] == s + 1:
                    r2 = (pos - y0) / dW
                    k2 = int(math.floor(r2))
                    if k2 < 0:
                        k2 = 0
                    elif k2 > m - 2:
                        k2 = m - 2
                    t2 = pos - (y0 + k2 * dW)
                    sl = (Wv[k2 + 1] - Wv[k2]) / dW
                    Gend = G[k2] + Wv[k2] * t2 + 0.5 * sl * t2 * t2
                    r3 = (x - y0) / dW
                    k3 = int(math.floor(r3))
                    if k3 > m - 2:
                        k3 = m - 2
                    t3 = x - (y0 + k3 * dW)
                    sl3 = (Wv[k3 + 1] - Wv[k3]) / dW
                    Gx = G[k3] + Wv[k3] * t3 + 0.5 * sl3 * t3 * t3
                    Y[i, j, p] = scale * (Gend - Gx - acc)
                    if i == 0:
                        XT[j, p] = pos - x
                    j += 1
    lo_hi[0] = lo
    lo_hi[1] = hi


def limit_normals(seed: int, w_index: int, n_paths: int, n_steps: int,
                  first_path: int = 0) -> np.ndarray:
    """Normals for paths keyed by ``(seed, w_index, path)``."""
    key = _rng.philox_key(seed, _rng.LIMIT_PATH, w_index)
    out = np.empty((n_paths, n_steps))
    for p in range(n_paths):
        out[p] = _rng.counter_stream(key, first_path + p).standard_normal(n_steps)
    return out


def limit_path(seed: int, w_index: int, path: int, T: float, dt: float,
               a_bar: float) -> Trajectory:
    """The limit path with key ``(seed, w_index, path)``, started at 0."""
    from .paths import PathConfig, simulate_limit_path
    n = int(round(T / dt))
    z = limit_normals(seed, w_index, 1, n, path)[0]
    return simulate_limit_path(PathConfig(0.0, 0.0, T, dt), a_bar, normals=z)


def ito_exponents(W: WienerPath, xs: Sequence[float], times: Sequence[float],
                  a_bar: float, c_bar: float, normals: np.ndarray, dt: float):
    """Ito exponents ``Y[i, j, p]`` and displacements ``X[j, p]``.

    All start points and stop times share the same paths (rows of
    ``normals``), so fdd vectors are built from one set of paths.
    """
    xs = np.asarray(xs, dtype=float)
    stops = np.array([int(round(t / dt)) for t in times], dtype=np.int64)
    if np.any(np.abs(stops * dt - np.asarray(times)) > 1e-9) or np.any(np.diff(stops) < 0):
        raise ValueError("times must be nondecreasing multiples of dt")
    if stops[-1] > normals.shape[1]:
        raise ValueError("not enough steps for the requested times")
    normals = np.ascontiguousarray(normals[:, :stops[-1]])
    n_paths = normals.shape[0]
    Y = np.empty((len(xs), len(stops), n_paths))
    XT = np.empty((len(stops), n_paths))
    lo_hi = np.empty(2)
    _ito_batch(W.values, W.y0, W.delta, xs, stops, 2.0 * c_bar / a_bar,
               math.sqrt(a_bar * dt), normals, Y, XT, lo_hi)
    # coverage: every visited point must lie on the W grid
    W.require(min(float(lo_hi[0]), float(xs.min())), max(float(lo_hi[1]), float(xs.max())))
    return Y, XT


@dataclass(frozen=True)
class LimitSample:
    t: float
    x: float
    Y: np.ndarray
    value: float
    se: float
    estimator: str


def _mean_se(v: np.ndarray):
    return float(np.mean(v)), float(np.std(v, ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0


def _default_half_range(xs, t, a_bar) -> float:
    return float(np.max(np.abs(xs))) + 8.0 * math.sqrt(a_bar * t) + 1.0


def u_limit(W: WienerPath, t: float, x: float, g: Callable, a_bar: float,
            c_bar: float, n_paths: int, estimator: str = "ito", seed: int = 0,
            w_index: int = 0, dt: float = DEFAULT_DT,
            delta: float = DEFAULT_DELTA) -> LimitSample:
    """``E[g(x + X_t) exp(Y)]`` over paths for the frozen ``W``."""
    if n_paths < 1:
        raise ValueError("need at least one path")
    n = int(round(t / dt))
    if estimator == "ito":
        Z = limit_normals(seed, w_index, n_paths, n)
        Y, XT = ito_exponents(W, [x], [t], a_bar, c_bar, Z, dt)
        Y, XT = Y[0, 0], XT[0]
    elif estimator == "direct":
        Y = np.empty(n_paths)
        XT = np.empty(n_paths)
        for p in range(n_paths):
            tr = limit_path(seed, w_index, p, t, dt, a_bar)
            L = occupation_density(tr.X, dt, delta)
            Y[p] = exponent_direct(L, W, x, c_bar, a_bar)
            XT[p] = tr.X[-1]
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    v = g(x + XT) * np.exp(Y)
    m, se = _mean_se(v)
    return LimitSample(t, x, Y, m, se, estimator)


@dataclass(frozen=True)
class LimitLaw:
    """``values[w, k]`` estimates ``u(points[k])`` for the ``w``-th draw of W."""

    points: tuple
    values: np.ndarray
    se: np.ndarray


def u_limit_law(points: Sequence[tuple], g: Callable, a_bar: float, c_bar: float,
                n_W: int, n_paths: int, seed: int, first_W: int = 0,
                dt: float = DEFAULT_DT, delta_W: float = DEFAULT_DELTA_W) -> LimitLaw:
    """Sample the law of ``(u(t_k, x_k))_k`` over independent draws of W.

    For every W one set of ``n_paths`` paths serves all points: prefixes of
    each path give the earlier times, shifted starts give the other x.
    """
    if n_W < 1:
        raise ValueError("need at least one W draw")
    points = tuple((float(t), float(x)) for t, x in points)
    times = sorted({t for t, _ in points})
    xs = sorted({x for _, x in points})
    n = int(round(times[-1] / dt))
    half = _default_half_range(xs, times[-1], a_bar)
    vals = np.empty((n_W, len(points)))
    ses = np.empty((n_W, len(points)))
    for w in range(n_W):
        wi = first_W + w
        W = keyed_W(seed, wi, half, delta_W)
        Z = limit_normals(seed, wi, n_paths, n)
        Y, XT = ito_exponents(W, xs, times, a_bar, c_bar, Z, dt)
        for k, (t, x) in enumerate(points):
            i, j = xs.index(x), times.index(t)
            v = g(x + XT[j]) * np.exp(Y[i, j])
            vals[w, k], ses[w, k] = _mean_se(v)
    return LimitLaw(points, vals, ses)
