"""Quenched diffusions spread like Brownian motion with the harmonic-mean
diffusivity a_bar, not the arithmetic mean.  In one fixed medium the variance
of X_1 fluctuates by O(sqrt(eps)) around a_bar.  The average over media keeps
a small positive bias from the finite eps and from the Euler step at the
jumps of a.

Run with ``python demos/homogenized_paths.py``.
"""

import numpy as np

from homog_lab import fields as F
from homog_lab import paths as P

spec = F.FieldSpec()  # two-point diffusivity on {1, 4}, box kernel
a_bar = F.effective_a(spec)
print(f"arithmetic mean of a: {0.5 * (1 + 4):.3f}, harmonic mean a_bar: {a_bar:.3f}")

for eps in (0.4, 0.2, 0.1, 0.05):
    dt = 1.0 / np.ceil(1.0 / P.dt_max(eps, spec.a_hi))
    v = []
    for seed in range(24):
        f = F.make_field(spec, seed)
        X = P.quenched_batch(f, eps, 0.0, 1.0, dt, a_bar, n_paths=250, seed=1,
                             realization=seed)["X_T"]
        v.append(X.var(ddof=1))
    print(f"eps={eps:<4}  Var(X_1) per medium {np.min(v):.2f} .. {np.max(v):.2f}, "
          f"average {np.mean(v):.3f} +- {np.std(v, ddof=1) / np.sqrt(len(v)):.3f}"
          f"  (target {a_bar:.3f})")
