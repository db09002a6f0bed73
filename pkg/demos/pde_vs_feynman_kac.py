"""One realization, one eps: the finite-volume solution and the Feynman-Kac
average over quenched paths give the same value of u_eps(t, x).

Run with ``python demos/pde_vs_feynman_kac.py``.
"""

from homog_lab import fields as F
from homog_lab import pde
from homog_lab.paths import feynman_kac_u_eps

spec = F.FieldSpec()
a_bar = F.effective_a(spec)
f = F.make_field(spec, seed=7)
eps, t, x = 0.2, 0.5, 0.0

L = pde.truncation_radius(t, 1e-6, spec.a_hi)
grid = pde.Grid1D.covering(L, eps / 16)
sol = pde.solve_eps_pde(f, eps, pde.gaussian_bump, t, grid, pde.SolverConfig(dt=1e-3))
fk = feynman_kac_u_eps(f, eps, t, x, pde.gaussian_bump, n_paths=4000, seed=2, a_bar=a_bar)

print(f"PDE          u_eps({t}, {x}) = {float(sol.at(x)):.4f}")
print(f"Feynman-Kac  u_eps({t}, {x}) = {fk.value:.4f} +- {fk.se:.4f}")
print(f"heat value without potential  = {float(pde.heat_solution(t, x, a_bar)):.4f}")
