"""Quenched and limit diffusion paths, occupation densities and exponents.

The quenched diffusion generated by ``1/2 (a(x/eps) u')'`` is simulated in its
martingale coordinate ``Z = psi(X)`` with ``psi(x) = x + eps chi(x/eps) =
eps a_bar A(x/eps)`` and ``A = int_0 1/a``.  ``Z`` has no drift and diffusion
coefficient ``a_bar / sqrt(a(X/eps))``, so an Euler step on ``Z`` followed by
the inversion ``X = psi^{-1}(Z)`` never differentiates ``a``.  Because ``A`` is
known in closed form on every segment of the field table, the inversion is
exact rather than iterative.

The step loop is compiled with numba; each path owns a keyed normal stream,
so results do not depend on how paths are batched or distributed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numba as nb
import numpy as np

from . import rng as _rng
from .fields import FieldRealization

C_DT = 0.01
LIMIT_DT_MAX = 1e-3

_OK = 0
_LEFT_TABLE = 1


@dataclass(frozen=True)
class PathConfig:
    """``eps == 0`` requests a path of the limit Brownian motion."""

    eps: float
    x0: float
    T: float
    dt: float
    seed: int = 0
    realization: int = 0
    path: int = 0

    @property
    def n_steps(self) -> int:
        n = int(round(self.T / self.dt))
        if abs(n * self.dt - self.T) > 1e-9 * self.T:
            raise ValueError("T must be an integer multiple of dt")
        return n


def dt_max(eps: float, a_hi: float, c_dt: float = C_DT) -> float:
    """Largest admissible step: ``c_dt eps^2 / a_hi`` (``1e-3`` in the limit)."""
    if eps == 0:
        return LIMIT_DT_MAX
    return c_dt * eps * eps / a_hi


def check_config(cfg: PathConfig, a_hi: float, c_dt: float = C_DT):
    if not (cfg.T > 0 and cfg.dt > 0):
        raise ValueError("T and dt must be positive")
    if cfg.eps < 0:
        raise ValueError("eps must be >= 0")
    bound = dt_max(cfg.eps, a_hi, c_dt)
    if cfg.dt > bound * (1 + 1e-12):
        raise ValueError(f"dt={cfg.dt:g} exceeds the step bound {bound:g}")
    cfg.n_steps


@dataclass
class Trajectory:
    t: np.ndarray
    X: np.ndarray
    Z: Optional[np.ndarray]
    dB: np.ndarray
    eps: float
    # running functionals accumulated during the simulation (quenched only)
    y_direct: float = float("nan")
    stoch_sum: float = float("nan")
    h: Optional[np.ndarray] = None

    @property
    def T(self) -> float:
        return float(self.t[-1])

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def to_csv(self, path):
        """Debug dump with columns ``step,time,X,Z``."""
        Z = self.Z if self.Z is not None else np.full_like(self.X, np.nan)
        data = np.column_stack([np.arange(len(self.t)), self.t, self.X, Z])
        np.savetxt(path, data, delimiter=",", header="step,time,X,Z",
                   comments="", fmt=["%d", "%.17g", "%.17g", "%.17g"])


# --------------------------------------------------------------------------
# compiled kernels
# --------------------------------------------------------------------------

@nb.njit(cache=True, inline="always")
def _inv_int(a0, da, tau):
    r = da * tau / a0
    if abs(r) < 1e-9:
        return tau / a0 * (1.0 - 0.5 * r)
    return math.log1p(r) / da


@nb.njit(cache=True)
def _quenched_kernel(xb, a0, da, c0, dc, A, C, k, u, eps, a_bar, dt, normals,
                     X_out, Z_out, h_out, want_record):
    """Advance one path; returns (status, step, u, y_sum, stoch, h, dev, excursion)."""
    n = normals.shape[0]
    nseg = a0.shape[0]
    sq_dt = math.sqrt(dt)
    sq_eps = math.sqrt(eps)
    scale = eps * a_bar
    tau = u - xb[k]
    Au = A[k] + _inv_int(a0[k], da[k], tau)
    Z = scale * Au
    u0 = u
    y_sum = 0.0
    stoch = 0.0
    h = 0.0
    dev = 0.0
    exc = 0.0
    if want_record:
        X_out[0] = eps * u
        Z_out[0] = Z
        h_out[0] = 0.0
    for i in range(n):
        tau = u - xb[k]
        a_cur = a0[k] + da[k] * tau
        c_cur = c0[k] + dc[k] * tau
        C_cur = C[k] + tau * (c0[k] + 0.5 * dc[k] * tau)
        y_sum += c_cur
        h += dt / a_cur
        dZ = a_bar / math.sqrt(a_cur) * sq_dt * normals[i]
        # W_eps(X) dZ with the c_bar factor removed
        stoch += sq_eps * C_cur * dZ
        Z += dZ
        target = Z / scale
        while target >= A[k + 1]:
            k += 1
            if k >= nseg:
                return _LEFT_TABLE, i, u, y_sum, stoch, h, dev, exc
        while target < A[k]:
            k -= 1
            if k < 0:
                return _LEFT_TABLE, i, u, y_sum, stoch, h, dev, exc
        dA = target - A[k]
        if da[k] == 0.0:
            tau = a0[k] * dA
        else:
            tau = a0[k] / da[k] * math.expm1(da[k] * dA)
        L = xb[k + 1] - xb[k]
        if tau < 0.0:
            tau = 0.0
        elif tau > L:
            tau = L
        u = xb[k] + tau
        d = abs(h - (i + 1) * dt / a_bar)
        if d > dev:
            dev = d
        e = abs(u - u0)
        if e > exc:
            exc = e
        if want_record:
            X_out[i + 1] = eps * u
            Z_out[i + 1] = Z
            h_out[i + 1] = h
    return _OK, n, u, y_sum, stoch, h, dev, exc * eps


@nb.njit(cache=True)
def _occupation_kernel(X, dt, delta, jlo, nbins):
    """Exact time spent in each bin by the piecewise-linear interpolant of X."""
    out = np.zeros(nbins)
    for i in range(X.shape[0] - 1):
        xa = X[i]
        xb = X[i + 1]
        if xa == xb:
            j = int(math.floor(xa / delta)) - jlo
            out[j] += dt
            continue
        lo = min(xa, xb)
        hi = max(xa, xb)
        rate = dt / (hi - lo)
        j0 = int(math.floor(lo / delta))
        j1 = int(math.floor(hi / delta))
        if j0 == j1:
            out[j0 - jlo] += dt
            continue
        out[j0 - jlo] += ((j0 + 1) * delta - lo) * rate
        for j in range(j0 + 1, j1):
            out[j - jlo] += delta * rate
        out[j1 - jlo] += (hi - j1 * delta) * rate
    return out


# --------------------------------------------------------------------------
# martingale coordinate
# --------------------------------------------------------------------------

def psi(f: FieldRealization, eps: float, a_bar: float, x):
    """``psi(x) = x + eps chi(x/eps) = eps a_bar int_0^{x/eps} 1/a``."""
    return eps * a_bar * f.int_inv_a(np.asarray(x, dtype=float) / eps)


def psi_inverse(f: FieldRealization, eps: float, a_bar: float, z):
    """Exact inverse of :func:`psi`, segment by segment of the field table."""
    z = np.asarray(z, dtype=float)
    target = z / (eps * a_bar)
    # A is increasing with slope >= 1/a_hi, so |u| <= a_hi |target|
    reach = f.spec.a_hi * float(np.max(np.abs(target), initial=0.0)) + 2.0
    t = f.table(-reach, reach)
    k = np.clip(np.searchsorted(t.A, target, side="right") - 1, 0, len(t.a0) - 1)
    dA = target - t.A[k]
    lin = t.da[k] == 0.0
    safe = np.where(lin, 1.0, t.da[k])
    tau = np.where(lin, t.a0[k] * dA, t.a0[k] / safe * np.expm1(safe * dA))
    return eps * (t.x[k] + tau)


# --------------------------------------------------------------------------
# quenched paths
# --------------------------------------------------------------------------

def path_normals(cfg: PathConfig) -> np.ndarray:
    purpose = _rng.LIMIT_PATH if cfg.eps == 0 else _rng.QUENCHED_PATH
    g = _rng.stream(cfg.seed, purpose, cfg.realization, cfg.path)
    return g.standard_normal(cfg.n_steps)


@dataclass(frozen=True)
class PathSummary:
    """Running functionals of one quenched path (no trajectory stored)."""

    X_T: float
    y_direct: float
    y_identity: float
    h_T: float
    h_sup_dev: float
    sup_excursion: float


def _table_radius(f: FieldRealization, eps: float, T: float) -> float:
    # in field units; eight standard deviations of the fastest diffusion
    return (8.0 * math.sqrt(f.spec.a_hi * T) + 1.0) / eps


def _run(f: FieldRealization, eps: float, x0: float, a_bar: float, dt: float,
         normals: np.ndarray, record: bool, T: float):
    n = normals.shape[0]
    u0 = x0 / eps
    radius = _table_radius(f, eps, T)
    X_out = np.empty(n + 1 if record else 0)
    Z_out = np.empty(n + 1 if record else 0)
    h_out = np.empty(n + 1 if record else 0)
    while True:
        t = f.table(u0 - radius, u0 + radius)
        k = int(t.locate(u0))
        status, _, u, y_sum, stoch, h, dev, exc = _quenched_kernel(
            t.x, t.a0, t.da, t.c0, t.dc, t.A, t.C, k, u0, eps, a_bar, dt,
            normals, X_out, Z_out, h_out, record)
        if status == _OK:
            return u, y_sum, stoch, h, dev, exc, X_out, Z_out, h_out
        radius *= 2.0


def _summary(f, eps, x0, a_bar, dt, u, y_sum, stoch, h, dev, exc) -> PathSummary:
    y_direct = y_sum * dt / math.sqrt(eps)
    F = eps ** 1.5 * (f.phi(np.array([u, x0 / eps])))
    y_identity = 2.0 * (F[0] - F[1]) - 2.0 / a_bar * stoch
    return PathSummary(eps * u, y_direct, float(y_identity), h, dev, exc)


def simulate_quenched(f: FieldRealization, cfg: PathConfig, a_bar: float,
                      normals: Optional[np.ndarray] = None,
                      c_dt: float = C_DT) -> Trajectory:
    """Record one quenched trajectory (Euler on ``Z``, exact inversion to ``X``)."""
    if not cfg.eps > 0:
        raise ValueError("quenched paths need eps > 0")
    check_config(cfg, f.spec.a_hi, c_dt)
    if normals is None:
        normals = path_normals(cfg)
    u, y_sum, stoch, h, dev, exc, X, Z, H = _run(
        f, cfg.eps, cfg.x0, a_bar, cfg.dt, normals, True, cfg.T)
    t = cfg.dt * np.arange(cfg.n_steps + 1)
    traj = Trajectory(t, X, Z, normals * math.sqrt(cfg.dt), cfg.eps,
                      y_sum * cfg.dt / math.sqrt(cfg.eps), stoch, H)
    return traj


def quenched_summary(f: FieldRealization, cfg: PathConfig, a_bar: float,
                     normals: Optional[np.ndarray] = None,
                     c_dt: float = C_DT) -> PathSummary:
    """Functionals of one quenched path without storing it."""
    if not cfg.eps > 0:
        raise ValueError("quenched paths need eps > 0")
    check_config(cfg, f.spec.a_hi, c_dt)
    if normals is None:
        normals = path_normals(cfg)
    u, y_sum, stoch, h, dev, exc, *_ = _run(
        f, cfg.eps, cfg.x0, a_bar, cfg.dt, normals, False, cfg.T)
    return _summary(f, cfg.eps, cfg.x0, a_bar, cfg.dt, u, y_sum, stoch, h, dev, exc)


def quenched_batch(f: FieldRealization, eps: float, x0: float, T: float, dt: float,
                   a_bar: float, n_paths: int, seed: int, realization: int = 0,
                   first_path: int = 0, c_dt: float = C_DT) -> dict:
    """Summaries of paths ``first_path .. first_path + n_paths - 1`` as arrays."""
    keys = ("X_T", "y_direct", "y_identity", "h_T", "h_sup_dev", "sup_excursion")
    out = {k: np.empty(n_paths) for k in keys}
    for i in range(n_paths):
        cfg = PathConfig(eps, x0, T, dt, seed, realization, first_path + i)
        s = quenched_summary(f, cfg, a_bar, c_dt=c_dt)
        for k in keys:
            out[k][i] = getattr(s, k)
    return out


# --------------------------------------------------------------------------
# limit paths
# --------------------------------------------------------------------------

def simulate_limit_path(cfg: PathConfig, a_bar: float,
                        normals: Optional[np.ndarray] = None) -> Trajectory:
    """``x0 + sqrt(a_bar) B`` on the time grid (exact in law at grid times)."""
    if cfg.eps != 0:
        raise ValueError("limit paths are requested with eps = 0")
    if not a_bar > 0:
        raise ValueError("a_bar must be positive")
    check_config(cfg, 1.0)
    if normals is None:
        normals = path_normals(cfg)
    dB = normals * math.sqrt(cfg.dt)
    X = np.empty(len(dB) + 1)
    X[0] = cfg.x0
    np.cumsum(math.sqrt(a_bar) * dB, out=X[1:])
    X[1:] += cfg.x0
    t = cfg.dt * np.arange(len(X))
    return Trajectory(t, X, None, dB, 0.0)


# --------------------------------------------------------------------------
# functionals of a recorded trajectory
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LocalTimeProfile:
    """Time-occupation density on bins ``[j delta, (j+1) delta)``."""

    centers: np.ndarray
    values: np.ndarray
    delta: float
    convention: str = "time_occupation_density"

    @property
    def mass(self) -> float:
        return float(np.sum(self.values) * self.delta)

    @property
    def edges(self) -> np.ndarray:
        return np.append(self.centers - 0.5 * self.delta,
                         self.centers[-1] + 0.5 * self.delta)


def occupation_density(X: np.ndarray, dt: float, delta: float) -> LocalTimeProfile:
    """Occupation density of the linear interpolant of samples ``X``.

    Each step spends its ``dt`` uniformly along the segment joining its end
    points, so the total mass is exactly ``(len(X) - 1) dt``.
    """
    if not delta > 0:
        raise ValueError("bin width must be positive")
    X = np.ascontiguousarray(X, dtype=float)
    jlo = int(math.floor(X.min() / delta))
    jhi = int(math.floor(X.max() / delta))
    vals = _occupation_kernel(X, float(dt), float(delta), jlo, jhi - jlo + 1) / delta
    centers = (np.arange(jlo, jhi + 1) + 0.5) * delta
    return LocalTimeProfile(centers, vals, float(delta))


def local_time(traj: Trajectory, delta: float) -> LocalTimeProfile:
    return occupation_density(traj.X, traj.dt, delta)


def h_eps(traj: Trajectory, f: FieldRealization, eps: float) -> np.ndarray:
    """``h_eps(t_k) = int_0^{t_k} ds / a(X_s/eps)`` by left-endpoint sums."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    inv = 1.0 / f.a(traj.X[:-1] / eps)
    return np.concatenate([[0.0], np.cumsum(inv) * traj.dt])


def y_eps_direct(traj: Trajectory, f: FieldRealization, eps: float) -> float:
    """``eps^{-1/2} int_0^t c(X_s/eps) ds`` by left-endpoint sums."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return float(np.sum(f.c(traj.X[:-1] / eps)) * traj.dt / math.sqrt(eps))


def y_eps_identity(traj: Trajectory, f: FieldRealization, eps: float,
                   a_bar: float, c_bar: float) -> float:
    """``2 c_bar (int_x^{X_t} W_eps/a(./eps) dy - (1/a_bar) sum W_eps(X_k) dZ_k)``.

    The spatial integral equals ``F_eps(X_t) - F_eps(x)`` and is evaluated
    exactly; the stochastic integral uses left points.
    """
    if traj.Z is None:
        raise ValueError("trajectory carries no martingale coordinate")
    if c_bar == 0:
        return 0.0
    from .fields import f_eps, w_eps
    X = traj.X
    F = f_eps(f, eps, np.array([X[-1], X[0]]))
    W = w_eps(f, c_bar, eps, X[:-1])
    stoch = float(np.sum(W * np.diff(traj.Z)))
    return float(2.0 * (F[0] - F[1]) - 2.0 * c_bar / a_bar * stoch)


# --------------------------------------------------------------------------
# Feynman-Kac
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MCEstimate:
    value: float
    se: float
    max_share: float
    n: int


def mc_mean(samples: np.ndarray) -> MCEstimate:
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    total = float(np.sum(samples))
    se = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    share = float(np.max(np.abs(samples)) / np.sum(np.abs(samples))) if total != 0 else 0.0
    return MCEstimate(total / n, se, share, n)


def feynman_kac_u_eps(f: FieldRealization, eps: float, t: float, x: float,
                      g: Callable, n_paths: int, seed: int, a_bar: float,
                      realization: int = 0, dt: Optional[float] = None,
                      c_dt: float = C_DT) -> MCEstimate:
    """``E[g(X_t) exp(Y_t)]`` over quenched paths started at ``x``.

    ``max_share`` is the largest single summand over the total, a warning
    sign for the heavy right tail of the exponential weight.
    """
    if not (t > 0 and eps > 0):
        raise ValueError("t and eps must be positive")
    if dt is None:
        n = math.ceil(t / dt_max(eps, f.spec.a_hi, c_dt))
        dt = t / n
    b = quenched_batch(f, eps, x, t, dt, a_bar, n_paths, seed, realization, c_dt=c_dt)
    return mc_mean(g(b["X_T"]) * np.exp(b["y_direct"]))
