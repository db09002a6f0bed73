"""The rescaled potential W_eps(x) = sqrt(eps) int_0^{x/eps} c / c_bar behaves
like a Brownian motion: its variance at x = 1 tends to 1.

Run with ``python demos/potential_clt.py``.
"""

import numpy as np

from homog_lab import fields as F

spec = F.FieldSpec()
c_bar = F.effective_coefficients(spec).c_bar
print(f"c_bar^2 = {c_bar ** 2:.4f}")

for eps in (0.5, 0.2, 0.05):
    w = np.array([F.w_eps(F.make_field(spec, s), c_bar, eps, 1.0) for s in range(2000)])
    exact = F.w_eps_variance(spec, eps, 1.0)
    print(f"eps={eps:<4}  empirical Var {w.var(ddof=1):.3f}   exact {exact:.4f}")
