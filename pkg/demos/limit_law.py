"""The limiting solution is random through W.  Each draw of W gives one value
u(t, x); the limiting PDE and limiting Monte Carlo agree draw by draw.

Run with ``python demos/limit_law.py``.
"""

import numpy as np

from homog_lab import fields as F
from homog_lab import limit as Lm
from homog_lab import pde

coef = F.effective_coefficients(F.FieldSpec())
t, x = 0.5, 0.0
L = pde.truncation_radius(t, 1e-6, coef.a_bar)
grid = pde.Grid1D.covering(L, 1 / 256)  # resolves the n = 64 mollifier

for w in range(4):
    W = Lm.keyed_W(seed=5, w_index=w, half_range=L + 1, delta=0.005)
    mc = Lm.u_limit(W, t, x, pde.gaussian_bump, coef.a_bar, coef.c_bar, n_paths=4000,
                    seed=5, w_index=w)
    sol = pde.solve_limit_pde(W, 64, pde.gaussian_bump, t, grid, pde.SolverConfig(dt=1e-3),
                              a_bar=coef.a_bar, c_bar=coef.c_bar)
    print(f"W draw {w}:  PDE {float(sol.at(x)):.4f}   MC {mc.value:.4f} +- {mc.se:.4f}")

print(f"heat value without potential: {float(pde.heat_solution(t, x, coef.a_bar)):.4f}")
