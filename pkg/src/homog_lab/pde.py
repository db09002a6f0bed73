"""Finite-volume solvers for the oscillating problem and its mollified limit.

Both problems have the form ``u_t = D u + V u`` with a symmetric divergence
operator ``D`` and a stiff multiplicative potential ``V``.  One time step is a
Strang splitting: half a step of the exact multiplier ``exp(dt V / 2)``, a
theta-scheme step of the diffusion (implicit Euler or Crank-Nicolson) solved
with a banded Cholesky factorization computed once, and another half step of
the multiplier.  On a uniform node-centred grid the diffusion matrix is an
M-matrix, so implicit Euler preserves positivity.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .fields import FieldRealization, k_eps


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if self.n < 3 or not self.x_max > self.x_min:
            raise ValueError("grid needs x_max > x_min and at least 3 nodes")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n)

    @classmethod
    def covering(cls, half_width: float, h_max: float) -> "Grid1D":
        """Symmetric grid on ``[-half_width, half_width]`` with spacing <= h_max."""
        cells = int(math.ceil(2.0 * half_width / h_max))
        return cls(-half_width, half_width, cells + 1)


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    scheme: str = "implicit_euler"
    splitting: str = "strang_exact_potential"
    boundary: str = "dirichlet_zero"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scheme not in ("implicit_euler", "crank_nicolson"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.splitting != "strang_exact_potential":
            raise ValueError(f"unknown splitting {self.splitting!r}")
        if self.boundary not in ("dirichlet_zero", "dirichlet_data", "reflecting"):
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @property
    def theta(self) -> float:
        return 1.0 if self.scheme == "implicit_euler" else 0.5


@dataclass
class GridSolution:
    grid: Grid1D
    times: np.ndarray
    values: np.ndarray  # (len(times), n)
    mass: np.ndarray
    min_value: np.ndarray
    flags: list = field(default_factory=list)

    def at(self, x, k: int = -1):
        """Linear interpolation of the solution at time index ``k``."""
        return np.interp(x, self.grid.x, self.values[k])

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def to_csv(self, path):
        tt, xx = np.meshgrid(self.times, self.grid.x, indexing="ij")
        data = np.column_stack([tt.ravel(), xx.ravel(), self.values.ravel()])
        np.savetxt(path, data, delimiter=",", header="t,x,u", comments="", fmt="%.17g")


@dataclass(frozen=True)
class TridiagonalOperator:
    """``(D u)_i = lower_i u_{i-1} + diag_i u_i + upper_i u_{i+1}`` on all nodes.

    ``conductance[i]`` is the interface coefficient between nodes ``i`` and
    ``i+1`` divided by ``2 h^2`` (or by the diffusivity scale for the limit).
    """

    conductance: np.ndarray
    h: float

    @property
    def n(self) -> int:
        return len(self.conductance) + 1

    @property
    def lower(self) -> np.ndarray:
        return np.concatenate([[0.0], self.conductance])

    @property
    def upper(self) -> np.ndarray:
        return np.concatenate([self.conductance, [0.0]])

    @property
    def diag(self) -> np.ndarray:
        d = np.zeros(self.n)
        d[:-1] -= self.conductance
        d[1:] -= self.conductance
        return d

    def apply(self, u):
        u = np.asarray(u, dtype=float)
        out = self.diag * u
        out[1:] += self.conductance * u[:-1]
        out[:-1] += self.conductance * u[1:]
        return out


def assemble_divergence(coef: Union[FieldRealization, Callable], eps: Optional[float],
                        grid: Grid1D, interface: str = "exact",
                        check_resolution: bool = True) -> TridiagonalOperator:
    """Finite-volume stencil of ``1/2 (a(x/eps) u')'`` on ``grid``.

    ``coef`` is either a field realization (evaluated at ``x/eps``) or a
    callable ``a(x)`` already in physical units (``eps`` is then only used for
    the resolution check).  The interface coefficient between two nodes is a
    harmonic mean: ``interface="exact"`` uses the harmonic mean of ``a`` over
    the whole interval, ``h / int 1/a`` (available for field realizations),
    ``"two_point"`` uses ``2 a_i a_{i+1} / (a_i + a_{i+1})``.
    """
    h = grid.h
    if check_resolution and eps is not None and h > eps / 16.0 * (1 + 1e-12):
        raise ValueError(f"grid spacing {h:g} does not resolve eps={eps:g}: "
                         f"need h <= eps/16 = {eps / 16:g}")
    x = grid.x
    if interface == "exact":
        if not isinstance(coef, FieldRealization):
            raise ValueError("exact interface averaging needs a field realization")
        a_face = h / np.diff(k_eps(coef, eps, x))
    elif interface == "two_point":
        if isinstance(coef, FieldRealization):
            a = coef.a(x / eps)
        else:
            a = np.asarray(coef(x), dtype=float) * np.ones_like(x)
        a_face = 2.0 * a[:-1] * a[1:] / (a[:-1] + a[1:])
    else:
        raise ValueError(f"unknown interface rule {interface!r}")
    return TridiagonalOperator(0.5 * a_face / h ** 2, h)


def truncation_radius(t: float, tol: float, a_hi: float) -> float:
    """``sqrt(2 a_hi t ln(1/tol)) + 2``: a Gaussian-tail radius with margin."""
    if not 0.0 < tol <= 1.0:
        raise ValueError("tol must lie in (0, 1]")
    return math.sqrt(2.0 * a_hi * t * math.log(1.0 / tol)) + 2.0


# --------------------------------------------------------------------------
# time stepping
# --------------------------------------------------------------------------

def _as_values(g, x):
    if callable(g):
        return np.asarray(g(x), dtype=float) * np.ones_like(x)
    g = np.asarray(g, dtype=float)
    if g.shape != x.shape:
        raise ValueError("sampled initial data must match the grid")
    return g.copy()


def _weights(n: int, h: float, boundary: str) -> np.ndarray:
    w = np.full(n, h)
    if boundary == "reflecting":
        w[0] = w[-1] = 0.5 * h
    return w


def _run(op: TridiagonalOperator, potential: np.ndarray, u0: np.ndarray, T: float,
         cfg: SolverConfig, grid: Grid1D, boundary_data: Optional[Callable],
         save_every: Optional[int]) -> GridSolution:
    n_steps = int(round(T / cfg.dt))
    if n_steps < 1 or abs(n_steps * cfg.dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError("T must be a positive integer multiple of dt")
    dt, theta = cfg.dt, cfg.theta
    n = grid.n
    flags = []
    if cfg.boundary == "dirichlet_data" and boundary_data is None:
        raise ValueError("dirichlet_data needs boundary_data(t) -> (left, right)")

    # symmetric form: M u_t = -K u with M = diag(w) and K = -M D
    w = _weights(n, grid.h, cfg.boundary)
    off = op.conductance * grid.h
    Kdiag = np.zeros(n)
    Kdiag[:-1] += off
    Kdiag[1:] += off
    Koff = -off
    # reflecting ends keep the boundary nodes (half cells) as unknowns
    sl = slice(0, n) if cfg.boundary == "reflecting" else slice(1, n - 1)
    idx = np.arange(n)[sl]
    Md = w[idx]
    Kd = Kdiag[idx]
    Ko = Koff[idx[:-1]]
    ab = np.zeros((2, len(idx)))
    ab[1] = Md + theta * dt * Kd
    ab[0, 1:] = theta * dt * Ko
    if theta < 1.0 and np.max(Kd / Md) * dt * (1.0 - theta) > 1.0:
        flags.append("crank_nicolson_positivity_bound_violated")
        warnings.warn("Crank-Nicolson step exceeds its positivity bound", stacklevel=3)
    try:
        factor = cholesky_banded(ab, lower=False)
    except np.linalg.LinAlgError as err:  # pragma: no cover - indicates a bug
        raise RuntimeError("diffusion matrix is not positive definite") from err

    half = np.exp(0.5 * dt * potential)
    u = u0.copy()
    if cfg.boundary == "dirichlet_zero":
        u[0] = u[-1] = 0.0
    elif cfg.boundary == "dirichlet_data":
        u[0], u[-1] = boundary_data(0.0)
    save_every = save_every or n_steps
    times, frames = [0.0], [u.copy()]

    def explicit_part(v):
        # (M - (1 - theta) dt K) v on the unknowns, K acting on all nodes
        Kv = Kdiag * v
        Kv[1:] += Koff * v[:-1]
        Kv[:-1] += Koff * v[1:]
        return w[idx] * v[idx] - (1.0 - theta) * dt * Kv[idx]

    for s in range(n_steps):
        t1 = (s + 1) * dt
        u = half * u
        if cfg.boundary == "dirichlet_data":
            u[0], u[-1] = boundary_data(s * dt)
        rhs = explicit_part(u)
        if cfg.boundary == "dirichlet_data":
            b1 = np.asarray(boundary_data(t1), dtype=float)
            # couple the new boundary values into the first and last rows
            rhs[0] -= theta * dt * Koff[0] * b1[0]
            rhs[-1] -= theta * dt * Koff[-1] * b1[1]
        u_new = np.empty(n)
        u_new[sl] = cho_solve_banded((factor, False), rhs)
        if cfg.boundary == "dirichlet_zero":
            u_new[0] = u_new[-1] = 0.0
        elif cfg.boundary == "dirichlet_data":
            u_new[0], u_new[-1] = b1
        u = half * u_new
        if cfg.boundary == "dirichlet_data":
            u[0], u[-1] = b1
        if (s + 1) % save_every == 0 or s + 1 == n_steps:
            if times[-1] != t1:
                times.append(t1)
                frames.append(u.copy())
    V = np.array(frames)
    mass = V @ w
    return GridSolution(grid, np.array(times), V, mass, V.min(axis=1), flags)


def eps_potential(f: FieldRealization, eps: float, grid: Grid1D) -> np.ndarray:
    """Cell averages of ``eps^{-1/2} c(x/eps)`` over ``[x_i - h/2, x_i + h/2]``."""
    x, h = grid.x, grid.h
    C = f.int_c(np.concatenate([x - 0.5 * h, [x[-1] + 0.5 * h]]) / eps)
    return math.sqrt(eps) * np.diff(C) / h


def solve_eps_pde(f: FieldRealization, eps: float, g, T: float, grid: Grid1D,
                  cfg: SolverConfig, boundary_data: Optional[Callable] = None,
                  interface: str = "exact", save_every: Optional[int] = None,
                  potential: bool = True) -> GridSolution:
    """``u_t = 1/2 (a(x/eps) u_x)_x + eps^{-1/2} c(x/eps) u`` on ``grid``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    op = assemble_divergence(f, eps, grid, interface)
    V = eps_potential(f, eps, grid) if potential else np.zeros(grid.n)
    return _run(op, V, _as_values(g, grid.x), T, cfg, grid, boundary_data, save_every)


def solve_limit_pde(W, n_mollify: float, g, T: float, grid: Grid1D,
                    cfg: SolverConfig, a_bar: float, c_bar: float,
                    boundary_data: Optional[Callable] = None,
                    save_every: Optional[int] = None, clip: bool = True) -> GridSolution:
    """``u_t = (a_bar/2) u'' + c_bar W_n'(x) u`` on ``grid``.

    ``W_n'`` is the exact derivative of the clipped mollification of the
    piecewise-linear ``W``.  The grid must resolve the mollifier (``h <=
    1/(4n)``).
    """
    from .limit import mollify
    if grid.h > 1.0 / (4.0 * n_mollify) * (1 + 1e-12):
        raise ValueError("grid too coarse for the mollification width: "
                         f"need h <= 1/(4n) = {1 / (4 * n_mollify):g}")
    op = assemble_divergence(lambda x: a_bar, None, grid, "two_point")
    _, dWn = mollify(W, n_mollify, grid.x, clip=clip)
    return _run(op, c_bar * dWn, _as_values(g, grid.x), T, cfg, grid,
                boundary_data, save_every)


def solve_constant_pde(a: float, V: float, g, T: float, grid: Grid1D,
                       cfg: SolverConfig, boundary_data=None) -> GridSolution:
    """Constant coefficients ``u_t = a/2 u'' + V u`` (regression checks)."""
    op = assemble_divergence(lambda x: a, None, grid, "two_point")
    return _run(op, np.full(grid.n, float(V)), _as_values(g, grid.x), T, cfg,
                grid, boundary_data, None)


# --------------------------------------------------------------------------
# initial data
# --------------------------------------------------------------------------

def gaussian_bump(x):
    return np.exp(-np.asarray(x, dtype=float) ** 2)


def compact_bump(x):
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1.0
    return np.where(inside, np.exp(1.0 - 1.0 / np.where(inside, 1.0 - x * x, 1.0)), 0.0)


def indicator_smoothed(x, width: float = 0.1):
    """Smoothed indicator of ``[-1, 1]`` (logistic edges of the given width)."""
    x = np.asarray(x, dtype=float)
    return 0.5 * (np.tanh((1.0 - x) / width) + np.tanh((1.0 + x) / width))


INITIAL_DATA = {"gaussian_bump": gaussian_bump, "compact_bump": compact_bump,
                "indicator_smoothed": indicator_smoothed}


def initial_data(name_or_path: str) -> Callable:
    """A named profile, or a sampled CSV profile ``x,g`` interpolated linearly."""
    if name_or_path in INITIAL_DATA:
        return INITIAL_DATA[name_or_path]
    data = np.loadtxt(name_or_path, delimiter=",", skiprows=1, ndmin=2)
    xs, gs = data[:, 0], data[:, 1]
    if np.any(np.diff(xs) <= 0):
        raise ValueError("profile x values must be increasing")
    return lambda x: np.interp(x, xs, gs, left=0.0, right=0.0)


def heat_solution(t: float, x, a: float = 1.0):
    """Closed form for ``u_t = a/2 u''`` with ``u(0) = exp(-x^2)``."""
    s = 1.0 + 2.0 * a * t
    return np.exp(-np.asarray(x, dtype=float) ** 2 / s) / math.sqrt(s)
