"""Named experiments.  Each returns an :class:`ExperimentReport` whose verdicts
carry the id of the acceptance criterion they decide (``C1`` ... ``C12``).

Randomness follows the product structure of the problem: an outer index over
field realizations (or Wiener draws) and an inner index over paths, each
keyed separately from the master seed, so results do not depend on the worker
count or the order in which work items finish.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import fields as F
from . import limit as Lm
from . import paths as P
from . import pde
from . import rng as _rng
from . import stats as S
from .config import ExperimentConfig, default_config


@dataclass(frozen=True)
class Row:
    experiment: str
    epsilon: Optional[float]
    t: Optional[float]
    x: Optional[float]
    statistic_name: str
    value: float
    se: Optional[float] = None


@dataclass(frozen=True)
class Verdict:
    criterion_id: str
    measured: float
    threshold: float
    passed: bool


@dataclass(frozen=True)
class Curve:
    """One convergence curve (statistic against eps) for the SVG plots."""

    name: str
    eps: tuple
    values: tuple
    ylabel: str
    reference: Optional[float] = None


@dataclass
class ExperimentReport:
    experiment: str
    rows: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    curves: list = field(default_factory=list)
    runtime: float = 0.0
    provenance: dict = field(default_factory=dict)

    def add(self, *args, **kw):
        self.rows.append(Row(self.experiment, *args, **kw))

    def judge(self, cid: str, measured: float, threshold: float, passed: bool):
        self.verdicts.append(Verdict(cid, float(measured), float(threshold), bool(passed)))

    def verdict(self, cid: str) -> Verdict:
        for v in self.verdicts:
            if v.criterion_id == cid:
                return v
        raise KeyError(cid)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)


MIN_BUDGET = {"n_fields": 2, "n_W": 2, "n_paths": 2, "n_seeds": 2, "n_cells": 1}


def _budget(cfg: ExperimentConfig, key: str, default: int) -> int:
    v = int(cfg.get(key, default))
    if v < MIN_BUDGET[key]:
        raise ValueError(f"budget {key}={v} below the minimum {MIN_BUDGET[key]}")
    return v


def pmap(fn: Callable, items: list, workers: int = 1) -> list:
    """Ordered map; a process pool when ``workers > 1``.  Worker errors propagate."""
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def _chunks(n: int, size: int):
    return [(i, min(size, n - i)) for i in range(0, n, size)]


def _field_seed(seed: int, i: int) -> int:
    return _rng.derive_seed(seed, _rng.FIELD_SEED, i)


def _coeffs(cfg: ExperimentConfig) -> F.EffectiveCoefficients:
    return F.effective_coefficients(cfg.field_spec)


def _eps(cfg, default) -> tuple:
    return tuple(cfg.get("eps", default))


def _decreasing(vals, tol: float = 0.0) -> bool:
    return all(b <= a + tol for a, b in zip(vals, vals[1:]))


# --------------------------------------------------------------------------
# C1  corrector identity
# --------------------------------------------------------------------------

def exp_corrector(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport("corrector")
    spec = cfg.field_spec
    n_cells = _budget(cfg, "n_cells", 100_000)
    a_bar = F.effective_a(spec) if spec.kernel == "box" else _coeffs(cfg).a_bar
    f = F.make_field(spec, _field_seed(cfg.seed, 0))
    t0 = time.perf_counter()
    # cells of a: chi is exactly linear on each, so the chord slope is chi'
    b = f.breakpoints("a", 0.0, (n_cells + 2) * spec.spacing)[: n_cells + 1]
    chi = F.corrector_chi(f, a_bar, b)
    slope = np.diff(chi) / np.diff(b)
    mid = 0.5 * (b[1:] + b[:-1])
    err = float(np.max(np.abs(f.a(mid) * (1.0 + slope) - a_bar)) / a_bar)
    elapsed = time.perf_counter() - t0
    rep.add(None, None, None, "max_rel_error_a_one_plus_chi_prime", err)
    rep.add(None, None, None, "runtime_seconds", elapsed)
    rep.add(None, None, None, "a_bar", a_bar)
    R = 1000.0
    xs = np.linspace(-R, R, 20001)
    rep.add(None, None, None, "max_abs_chi_over_R_at_R_1000",
            float(np.max(np.abs(F.corrector_chi(f, a_bar, xs))) / R))
    if spec.kernel == "box":
        rep.judge("C1", err, 1e-10, err <= 1e-10)
        rep.judge("C1-runtime", elapsed, 1.0, elapsed < 1.0)
    return rep


# --------------------------------------------------------------------------
# C2  field CLT
# --------------------------------------------------------------------------

CLT_POINTS = (0.5, 1.0, 2.0)


def _w_values(args):
    spec, seed, i0, n, eps_list, c_bar = args
    out = np.empty((n, len(eps_list), len(CLT_POINTS)))
    xs = np.array(CLT_POINTS)
    for k in range(n):
        f = F.make_field(spec, _field_seed(seed, i0 + k))
        for j, e in enumerate(eps_list):
            out[k, j] = F.w_eps(f, c_bar, e, xs)
    return out


def exp_field_clt(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport("field_clt")
    spec = cfg.field_spec
    eps = _eps(cfg, (0.2, 0.05))
    n = _budget(cfg, "n_seeds", 5000)
    c_bar = math.sqrt(F.effective_c_sq(spec))
    parts = pmap(_w_values, [(spec, cfg.seed, i, m, eps, c_bar) for i, m in _chunks(n, 250)],
                 cfg.workers)
    W = np.concatenate(parts)
    for j, e in enumerate(eps):
        for k, x in enumerate(CLT_POINTS):
            v, se = S.variance_se(W[:, j, k])
            exact = F.w_eps_variance(spec, e, x)
            rep.add(e, None, x, "var_W_eps", v, se)
            rep.add(e, None, x, "exact_var_W_eps", exact)
            if x == 1.0:
                rep.judge(f"C2@eps={e:g}", abs(v - exact) / se, 3.0, abs(v - exact) <= 3.0 * se)
                rep.judge(f"C2-gap@eps={e:g}", abs(exact - 1.0), e, abs(exact - 1.0) <= e)
    rep.curves.append(Curve("var_W_eps_at_1", eps,
                            tuple(float(np.var(W[:, j, 1], ddof=1)) for j in range(len(eps))),
                            "Var W_eps(1)", 1.0))
    return rep


# --------------------------------------------------------------------------
# quenched path experiments (C3, C4, C5)
# --------------------------------------------------------------------------

def _quenched_chunk(args):
    spec, fseed, eps, x0, T, dt, a_bar, seed, real, first, n, c_dt = args
    f = F.make_field(spec, fseed)
    return P.quenched_batch(f, eps, x0, T, dt, a_bar, n, seed, real, first, c_dt)


def quenched_samples(cfg: ExperimentConfig, eps: float, T: float, dt: float,
                     n_paths: int, realization: int = 0, chunk: int = 250) -> dict:
    """Path summaries for one field realization, split into keyed chunks."""
    spec = cfg.field_spec
    a_bar = _coeffs(cfg).a_bar
    c_dt = cfg.get("c_dt", P.C_DT)
    items = [(spec, _field_seed(cfg.seed, realization), eps, cfg.get("x0", 0.0), T, dt,
              a_bar, cfg.seed, realization, i, m, c_dt) for i, m in _chunks(n_paths, chunk)]
    parts = pmap(_quenched_chunk, items, cfg.workers)
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def _dt_for(cfg, eps: float, T: float, divisor: float = 1.0) -> float:
    bound = P.dt_max(eps, cfg.field_spec.a_hi, cfg.get("c_dt", P.C_DT)) / divisor
    n = math.ceil(T / bound - 1e-9)
    return T / n


def exp_diffusion_homog(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport("diffusion_homog")
    eps = _eps(cfg, (0.2, 0.05))
    T = cfg.get("t", 1.0)
    x0 = cfg.get("x0", 0.0)
    n = _budget(cfg, "n_paths", 10_000)
    a_bar = _coeffs(cfg).a_bar
    var_err, ks = [], []
    for e in eps:
        dt = _dt_for(cfg, e, T, cfg.get("dt_divisor", 1.0))
        s = quenched_samples(cfg, e, T, dt, n)
        X = s["X_T"]
        v, se = S.variance_se(X)
        var_err.append(abs(v - a_bar * T) / (a_bar * T))
        ks.append(S.gaussian_fit_ks(X, x0, a_bar * T).statistic)
        rep.add(e, T, x0, "var_X", v, se)
        rep.add(e, T, x0, "rel_var_error", var_err[-1])
        rep.add(e, T, x0, "ks_vs_normal", ks[-1])
        rep.add(e, T, x0, "dt", dt)
        # Gaussian-type tail: log exceedance against r^2 has a negative slope
        exc = s["sup_excursion"]
        r = np.quantile(exc, [0.5, 0.75, 0.9, 0.97, 0.99])
        p = np.array([np.mean(exc > ri) for ri in r])
        slope = float(np.polyfit(r ** 2, np.log(p), 1)[0])
        rep.add(e, T, x0, "tail_log_exceedance_slope_vs_r2", slope)
    rep.judge("C3-var", var_err[-1], 0.05, var_err[-1] <= 0.05)
    rep.judge("C3-ks", ks[-1], 0.03, ks[-1] <= 0.03)
    rep.judge("C3-var-decrease", var_err[-1] - var_err[0], 0.0, var_err[-1] < var_err[0])
    rep.judge("C3-ks-decrease", ks[-1] - ks[0], 0.0, ks[-1] < ks[0])
    rep.curves.append(Curve("rel_var_error", eps, tuple(var_err), "|Var X_t - a_bar t| / a_bar t", 0.05))
    rep.curves.append(Curve("ks_vs_normal", eps, tuple(ks), "KS to N(x, a_bar t)", 0.03))
    return rep


def exp_h_eps(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport("h_eps")
    eps = _eps(cfg, (0.4, 0.2, 0.1, 0.05))
    T = cfg.get("t", 1.0)
    n = _budget(cfg, "n_paths", 100)
    a_bar = _coeffs(cfg).a_bar
    med = []
    for e in eps:
        s = quenched_samples(cfg, e, T, _dt_for(cfg, e, T, cfg.get("dt_divisor", 1.0)), n)
        med.append(float(np.median(s["h_sup_dev"])))
        rep.add(e, T, None, "median_sup_h_deviation", med[-1])
        rep.add(e, T, None, "mean_h_T_times_a_bar", float(np.mean(s["h_T"]) * a_bar))
    thr = 0.05 / a_bar
    rep.judge("C4-monotone", max(b - a for a, b in zip(med, med[1:])), 0.0,
              all(b < a for a, b in zip(med, med[1:])))
    rep.judge("C4-final", med[-1], thr, med[-1] <= thr)
    rep.curves.append(Curve("median_sup_h_deviation", eps, tuple(med),
                            "median sup |h_eps(t) - t/a_bar|", thr))
    return rep


def exp_exponent_identity(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport("exponent_identity")
    e = _eps(cfg, (0.1,))[-1]
    T = cfg.get("t", 0.5)
    n = _budget(cfg, "n_paths", 1000)
    div = cfg.get("dt_divisor", 4.0)
    gaps = []
    for level in (1, 2):
        dt = _dt_for(cfg, e, T, div * level)
        s = quenched_samples(cfg, e, T, dt, n, realization=0)
        gaps.append(S.rms_relative_gap(s["y_identity"], s["y_direct"]))
        rep.add(e, T, None, f"rms_relative_gap_dt_over_{int(div * level)}", gaps[-1])
        rep.add(e, T, None, f"rms_abs_gap_dt_over_{int(div * level)}",
                float(np.sqrt(np.mean((s["y_identity"] - s["y_direct"]) ** 2))))
        rep.add(e, T, None, f"rms_y_direct_dt_over_{int(div * level)}",
                float(np.sqrt(np.mean(s["y_direct"] ** 2))))
    ratio = gaps[0] / gaps[1]
    rep.judge("C5-gap", gaps[0], 0.02, gaps[0] <= 0.02)
    rep.judge("C5-ratio", ratio, 1.3, ratio >= 1.3)
    return rep


# --------------------------------------------------------------------------
# limit exponent experiments (C6, C7)
# --------------------------------------------------------------------------

def _limit_pair_chunk(args):
    seed, first, n, T, dt, delta, delta_W, a_bar, c_bar, half = args
    out = np.empty((n, 3))
    for k in range(n):
        p = first + k
        W = Lm.keyed_W(seed, p, half, delta_W)
        tr = Lm.limit_path(seed, p, 0, T, dt, a_bar)
        L = P.occupation_density(tr.X, dt, delta)
        out[k, 0] = Lm.exponent_direct(L, W, 0.0, c_bar, a_bar)
        out[k, 1] = Lm.exponent_ito(tr, W, 0.0, c_bar, a_bar)
        # increment of W just beyond the visited range: independent of Y
        hi = float(tr.X.max()) + 0.5
        out[k, 2] = float(W(hi + 0.5) - W(hi))
    return out


def limit_pairs(cfg, T, dt, delta, delta_W, n) -> np.ndarray:
    co = _coeffs(cfg)
    half = 8.0 * math.sqrt(co.a_bar * T) + 2.0
    items = [(cfg.seed, i, m, T, dt, delta, delta_W, co.a_bar, co.c_bar, half)
             for i, m in _chunks(n, 100)]
    return np.concatenate(pmap(_limit_pair_chunk, items, cfg.workers))


def exp_joint_xy(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport("joint_xy")
    T = cfg.get("t", 0.5)
    n = _budget(cfg, "n_paths", 1000)
    dt = cfg.get("dt", 1e-3)
    delta = cfg.get("delta", 0.02)
    delta_W = cfg.get("delta_W", 0.01)
    gaps = []
    for level in (1, 2):
        Y = limit_pairs(cfg, T, dt / level, delta / level, delta_W / level, n)
        gaps.append(S.rms_relative_gap(Y[:, 0], Y[:, 1]))
        rep.add(None, T, 0.0, f"rms_relative_gap_level_{level}", gaps[-1])
        rep.add(None, T, 0.0, f"regression_slope_direct_on_ito_level_{level}",
                float(np.sum(Y[:, 0] * Y[:, 1]) / np.sum(Y[:, 1] ** 2)))
        rep.add(None, T, 0.0, f"corr_Y_with_outside_increment_level_{level}",
                float(np.corrcoef(Y[:, 1], Y[:, 2])[0, 1]), 1.0 / math.sqrt(n))
    ratio = gaps[0] / gaps[1]
    rep.judge("C6-gap", gaps[0], 0.02, gaps[0] <= 0.02)
    rep.judge("C6-ratio", ratio, 1.3, ratio >= 1.3)
    return rep


def occupation_errors(seed: int, a_bar: float, T: float, dt: float, delta: float,
                      levels: int = 3) -> list:
    """Relative occupation-formula errors for one path at successive coarsenings."""
    tr = Lm.limit_path(seed, 0, 0, T, dt, a_bar)
    g = pde.gaussian_bump
    out = []
    for k in range(levels):
        step = 2 ** k
        X = tr.X[::step]
        d = dt * step
        ref = float(np.sum(0.5 * (g(X[1:]) + g(X[:-1]))) * d)
        L = P.occupation_density(X, d, delta * step)
        est = float(np.sum(g(L.centers) * L.values) * L.delta)
        out.append(abs(est - ref) / abs(ref))
    return out


def exp_occupation(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport("occupation")
    T = cfg.get("t", 1.0)
    dt = cfg.get("dt", 1e-5)
    delta = cfg.get("delta", 5e-3)
    errs = occupation_errors(cfg.seed, _coeffs(cfg).a_bar, T, dt, delta,
                             int(cfg.get("levels", 3)))
    for k, e in enumerate(errs):
        rep.add(None, T, 0.0, f"occupation_rel_error_coarsening_{2 ** k}", e)
    rep.judge("C7", errs[0], 0.01, errs[0] <= 0.01)
    rep.judge("C7-refinement", errs[0] - errs[-1], 0.0, errs[0] < errs[-1])
    return rep


# --------------------------------------------------------------------------
# C8 / C9  laws of u_eps and u
# --------------------------------------------------------------------------

MAIN_POINTS = ((0.25, 0.0), (0.5, 0.0), (0.5, 0.5))


def _pde_chunk(args):
    spec, seed, first, n, eps_list, points, g_name, tol, h_div, pde_dt, scheme, interface = args
    g = pde.initial_data(g_name)
    times = sorted({t for t, _ in points})
    T = times[-1]
    M = pde.truncation_radius(T, tol, spec.a_hi)
    out = np.empty((n, len(eps_list), len(points)))
    save = [int(round(t / pde_dt)) for t in times]
    every = math.gcd(*save) if len(save) > 1 else save[0]
    for k in range(n):
        f = F.make_field(spec, _field_seed(seed, first + k))
        for j, e in enumerate(eps_list):
            grid = pde.Grid1D.covering(M, e / h_div)
            sol = pde.solve_eps_pde(f, e, g, T, grid, pde.SolverConfig(pde_dt, scheme),
                                    interface=interface, save_every=every)
            for q, (t, x) in enumerate(points):
                ti = int(np.argmin(np.abs(sol.times - t)))
                out[k, j, q] = sol.at(x, ti)
    return out


def _limit_chunk(args):
    points, g_name, a_bar, c_bar, first, n, n_paths, seed, dt, delta_W = args
    law = Lm.u_limit_law(points, pde.initial_data(g_name), a_bar, c_bar, n, n_paths,
                         seed, first_W=first, dt=dt, delta_W=delta_W)
    return law.values, law.se


@dataclass(frozen=True)
class LawData:
    eps: tuple
    points: tuple
    u_eps: np.ndarray        # (n_fields, n_eps, n_points)
    u_lim: np.ndarray        # (n_W, n_points)
    se_lim: np.ndarray
    u_lim_b: np.ndarray      # second, independent set of W draws
    se_lim_b: np.ndarray


def _law_key(cfg: ExperimentConfig):
    keys = ("eps", "points", "g", "n_fields", "n_W", "n_paths", "tol", "h_divisor",
            "pde_dt", "dt", "delta_W", "scheme", "interface")
    return (cfg.seed, cfg.field_spec) + tuple(cfg.get(k) for k in keys)


_LAW_CACHE: dict = {}


def law_data(cfg: ExperimentConfig) -> LawData:
    """PDE laws of ``u_eps`` on the eps ladder and two independent limit laws."""
    key = _law_key(cfg)
    if key in _LAW_CACHE:
        return _LAW_CACHE[key]
    spec = cfg.field_spec
    co = _coeffs(cfg)
    eps = _eps(cfg, (0.4, 0.2, 0.1, 0.05))
    points = tuple(cfg.get("points", MAIN_POINTS))
    g_name = cfg.get("g", "gaussian_bump")
    n_f = _budget(cfg, "n_fields", 2000)
    n_W = _budget(cfg, "n_W", 500)
    n_p = _budget(cfg, "n_paths", 2000)
    items = [(spec, cfg.seed, i, m, eps, points, g_name, cfg.get("tol", 1e-6),
              cfg.get("h_divisor", 16.0), cfg.get("pde_dt", 2.5e-3),
              cfg.get("scheme", "implicit_euler"), cfg.get("interface", "exact"))
             for i, m in _chunks(n_f, 50)]
    u_eps = np.concatenate(pmap(_pde_chunk, items, cfg.workers))
    lim = []
    for base in (0, n_W):
        items = [(points, g_name, co.a_bar, co.c_bar, base + i, m, n_p, cfg.seed,
                  cfg.get("dt", Lm.DEFAULT_DT), cfg.get("delta_W", Lm.DEFAULT_DELTA_W))
                 for i, m in _chunks(n_W, 25)]
        parts = pmap(_limit_chunk, items, cfg.workers)
        lim.append((np.concatenate([p[0] for p in parts]),
                    np.concatenate([p[1] for p in parts])))
    data = LawData(eps, points, u_eps, lim[0][0], lim[0][1], lim[1][0], lim[1][1])
    _LAW_CACHE[key] = data
    return data


def exp_main(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport("main")
    d = law_data(cfg)
    n_f, n_W = d.u_eps.shape[0], d.u_lim.shape[0]
    for q, (t, x) in enumerate(d.points):
        med_se = float(np.median(d.se_lim[:, q]))
        thr = S.ks_threshold(n_f, n_W, med_se)
        ks = [S.ks_two_sample(d.u_eps[:, j, q], d.u_lim[:, q]).statistic
              for j in range(len(d.eps))]
        for j, e in enumerate(d.eps):
            rep.add(e, t, x, "ks_u_eps_vs_u", ks[j])
            rep.add(e, t, x, "mean_u_eps", float(np.mean(d.u_eps[:, j, q])),
                    float(np.std(d.u_eps[:, j, q], ddof=1) / math.sqrt(n_f)))
        rep.add(None, t, x, "mean_u_limit", float(np.mean(d.u_lim[:, q])),
                float(np.std(d.u_lim[:, q], ddof=1) / math.sqrt(n_W)))
        rep.add(None, t, x, "ks_threshold", thr)
        rep.add(None, t, x, "ks_limit_self", S.ks_two_sample(d.u_lim[:, q], d.u_lim_b[:, q]).statistic)
        rep.curves.append(Curve(f"ks_t{t:g}_x{x:g}", d.eps, tuple(ks), "KS(law u_eps, law u)", 0.10))
        if (t, x) == (0.5, 0.0):
            worst = max(b - a for a, b in zip(ks, ks[1:]))
            rep.judge("C8-monotone", worst, thr, _decreasing(ks, thr))
            rep.judge("C8-final", ks[-1], 0.10, ks[-1] <= 0.10)
    return rep


def exp_fdd(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport("fdd")
    d = law_data(cfg)
    floor = S.energy_distance(d.u_lim, d.u_lim_b).statistic
    ed = [S.energy_distance(d.u_eps[:, j, :], d.u_lim).statistic for j in range(len(d.eps))]
    for j, e in enumerate(d.eps):
        rep.add(e, None, None, "energy_distance_fdd", ed[j])
    rep.add(None, None, None, "energy_distance_limit_self", floor)
    worst = max(b - a for a, b in zip(ed, ed[1:]))
    rep.judge("C9-decrease", worst, floor, _decreasing(ed, floor))
    rep.judge("C9-final", ed[-1], 1.5 * floor, ed[-1] <= 1.5 * floor)
    rep.curves.append(Curve("energy_distance_fdd", d.eps, tuple(ed), "energy distance", 1.5 * floor))
    return rep


# --------------------------------------------------------------------------
# C10  limit PDE against limit Monte Carlo
# --------------------------------------------------------------------------

def _spde_item(args):
    (seed, w, xs, T, n_moll, tol, a_hi, a_bar, c_bar, n_paths, dt, delta_W,
     pde_dt, g_name) = args
    g = pde.initial_data(g_name)
    M = pde.truncation_radius(T, tol, a_hi)
    W = Lm.keyed_W(seed, w, M + 1.0, delta_W)

    def solve(n, h, step):
        grid = pde.Grid1D.covering(M, h)
        return pde.solve_limit_pde(W, n, g, T, grid, pde.SolverConfig(step), a_bar, c_bar).at(xs)

    h = 1.0 / (4.0 * n_moll)
    base = solve(n_moll, h, pde_dt)
    fine = solve(n_moll, h / 2, pde_dt / 2)
    sharper = solve(2 * n_moll, h / 2, pde_dt / 2)
    Z = Lm.limit_normals(seed, w, n_paths, int(round(T / dt)))
    Y, XT = Lm.ito_exponents(W, xs, [T], a_bar, c_bar, Z, dt)
    mc, se, mc_ratio = [], [], []
    for i, x in enumerate(xs):
        v = g(x + XT[0]) * np.exp(Y[i, 0])
        m, s = Lm._mean_se(v)
        mc.append(m)
        se.append(s)
        mc_ratio.append(float(np.mean(g(x + XT[0]) * np.exp(Y[i, 0] / a_bar))))
    budget = np.abs(base - fine) + np.abs(fine - sharper) + tol
    return base, np.array(mc), np.array(se), budget, np.array(mc_ratio)


def exp_spde(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport("spde")
    co = _coeffs(cfg)
    T = cfg.get("t", 0.5)
    xs = np.array(sorted({x for _, x in cfg.get("points", ((T, -1.0), (T, 0.0), (T, 1.0)))}))
    n_W = _budget(cfg, "n_W", 20)
    n_p = _budget(cfg, "n_paths", 2000)
    items = [(cfg.seed, w, xs, T, cfg.get("n_mollify", 64.0), cfg.get("tol", 1e-6),
              cfg.field_spec.a_hi, co.a_bar, co.c_bar, n_p, cfg.get("dt", Lm.DEFAULT_DT),
              cfg.get("delta_W", 0.005), cfg.get("pde_dt", 1e-3), cfg.get("g", "gaussian_bump"))
             for w in range(n_W)]
    res = pmap(_spde_item, items, cfg.workers)
    worst, worst_ratio, n_fail = 0.0, 0.0, 0
    for w, (u_pde, u_mc, se, budget, mc_ratio) in enumerate(res):
        for i, x in enumerate(xs):
            allowed = 3.0 * se[i] + budget[i]
            r = abs(u_pde[i] - u_mc[i]) / allowed
            worst = max(worst, r)
            n_fail += r > 1.0
            worst_ratio = max(worst_ratio, abs(u_pde[i] - mc_ratio[i]) / allowed)
            rep.add(None, T, float(x), f"u_pde_W{w}", float(u_pde[i]))
            rep.add(None, T, float(x), f"u_mc_W{w}", float(u_mc[i]), float(se[i]))
            rep.add(None, T, float(x), f"budget_W{w}", float(budget[i]))
    rep.add(None, T, None, "max_gap_over_allowance", worst)
    rep.add(None, T, None, "max_gap_over_allowance_ratio_convention", worst_ratio)
    rep.add(None, T, None, "n_exceeding", float(n_fail))
    rep.judge("C10", worst, 1.0, worst <= 1.0)
    return rep


# --------------------------------------------------------------------------
# C11  heat-kernel regression, C12  xi diagnostic
# --------------------------------------------------------------------------

def heat_errors(levels: int = 3, h0: float = 0.05, dt0: float = 0.02, L: float = 8.0,
                T: float = 0.5, scheme: str = "crank_nicolson") -> list:
    spec = F.FieldSpec(a=F.TwoPoint(1.0, 1.0, 0.5), c=F.Rademacher(0.0))
    f = F.make_field(spec, 0)
    errs = []
    for k in range(levels):
        grid = pde.Grid1D.covering(L, h0 / 2 ** k)
        sol = pde.solve_eps_pde(f, 1.0, pde.gaussian_bump, T, grid,
                                pde.SolverConfig(dt0 / 2 ** k, scheme))
        errs.append(float(np.max(np.abs(sol.final - pde.heat_solution(T, grid.x)))))
    return errs


def exp_heat_kernel(cfg: ExperimentConfig) -> ExperimentReport:
    import warnings
    rep = ExperimentReport("heat_kernel")
    with warnings.catch_warnings():
        # the large-dt CN positivity flag is expected for this smooth datum
        warnings.simplefilter("ignore")
        errs = heat_errors(int(cfg.get("levels", 3)))
    for k, e in enumerate(errs):
        rep.add(None, 0.5, None, f"max_error_level_{k}", e)
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    for k, r in enumerate(ratios):
        rep.add(None, 0.5, None, f"error_ratio_{k}", r)
        rep.judge(f"C11-ratio-{k}", r, 4.0, 3.0 <= r <= 5.0)
    return rep


def _xi_chunk(args):
    spec, seed, first, n, eps_list, gamma, R, c_bar = args
    out = np.empty((n, len(eps_list)))
    for k in range(n):
        f = F.make_field(spec, _field_seed(seed, first + k))
        for j, e in enumerate(eps_list):
            out[k, j] = F.xi_gamma_eps(f, c_bar, e, gamma, R)
    return out


def exp_xi_diag(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport("xi_diag")
    eps = _eps(cfg, (0.2, 0.1, 0.05))
    n = _budget(cfg, "n_seeds", 2000)
    gamma, R = cfg.get("gamma", 0.25), cfg.get("R", 1000.0)
    c_bar = math.sqrt(F.effective_c_sq(cfg.field_spec))
    items = [(cfg.field_spec, cfg.seed, i, m, eps, gamma, R, c_bar) for i, m in _chunks(n, 100)]
    xi = np.concatenate(pmap(_xi_chunk, items, cfg.workers))
    p95 = [float(np.quantile(xi[:, j], 0.95)) for j in range(len(eps))]
    for e, p in zip(eps, p95):
        rep.add(e, None, None, "xi_p95", p)
    spread = max(p95) / min(p95) - 1.0
    rep.judge("C12", spread, 0.20, spread <= 0.20)
    rep.curves.append(Curve("xi_p95", eps, tuple(p95), "95th percentile of xi"))
    return rep


EXPERIMENTS: dict[str, tuple[Callable, str]] = {
    "corrector": (exp_corrector, "C1 corrector identity a(1+chi') = a_bar"),
    "field_clt": (exp_field_clt, "C2 variance of W_eps against the covariance integral"),
    "diffusion_homog": (exp_diffusion_homog, "C3 quenched X_t approaches N(x, a_bar t)"),
    "h_eps": (exp_h_eps, "C4 h_eps(t) flattens to t / a_bar"),
    "exponent_identity": (exp_exponent_identity, "C5 direct and corrector forms of Y_eps agree"),
    "joint_xy": (exp_joint_xy, "C6 local-time and Ito forms of the limit exponent agree"),
    "occupation": (exp_occupation, "C7 occupation-time formula"),
    "main": (exp_main, "C8 law of u_eps(t, x) approaches the law of u(t, x)"),
    "fdd": (exp_fdd, "C9 joint law at three space-time points"),
    "spde": (exp_spde, "C10 limit PDE agrees with limit Monte Carlo"),
    "heat_kernel": (exp_heat_kernel, "C11 second-order heat-kernel regression"),
    "xi_diag": (exp_xi_diag, "C12 tightness diagnostic xi stays stable"),
}


def resolve(name: str) -> str:
    key = name[4:] if name.startswith("exp_") else name
    if key not in EXPERIMENTS:
        raise KeyError(f"unknown experiment {name!r}; known: {', '.join(EXPERIMENTS)}")
    return key


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    from . import __version__
    key = resolve(cfg.name)
    t0 = time.perf_counter()
    rep = EXPERIMENTS[key][0](cfg)
    rep.runtime = time.perf_counter() - t0
    rep.provenance = {"experiment": key, "config_digest": cfg.digest(), "seed": cfg.seed,
                      "version": __version__, "workers": cfg.workers}
    return rep


def run(name: str, **overrides) -> ExperimentReport:
    """Run ``name`` with default settings and keyword overrides."""
    return run_experiment(default_config(resolve(name), **overrides))
