"""Conjugating a Hamiltonian numerically and checking the growth bounds.

Run: python demos/01_conjugate.py
"""
import numpy as np

from dualaction import Growth, check_gradient_bound, check_growth_bounds, conjugate_batch, grad_conjugate
from dualaction.hamiltonians import quadratic, quartic_radial

rng = np.random.default_rng(0)

# A diagonal quadratic: the conjugate is known in closed form, so this is a
# direct check of the Newton solver.
A = np.array([1.0, 2.0, 4.0])
H = quadratic(n=1, p=2, A=A)
t = np.zeros((1000, 2))
v = rng.uniform(-3, 3, (1000, 3))
res = conjugate_batch(H, t, v)
print("quadratic: max |H* - v.A^-1 v/2| =", np.max(np.abs(res.value - 0.5 * np.sum(v * v / A, 1))))
print("           Newton iterations used:", np.bincount(res.iterations))

# grad H* inverts grad H
u = rng.uniform(-3, 3, (1000, 3))
print("inverse identity error:", np.max(np.abs(grad_conjugate(H, t, H.grad(t, u)) - u)))

# Growth: delta |u|^2/2 <= H <= alpha |u|^2/2 with delta = 1, alpha = 4 (the extreme eigenvalues).
good = check_growth_bounds(H, t, v, Growth(1.0, 4.0))
print("growth bounds with (1, 4):", good.ok, "| min margins",
      round(good.details["min_lower_margin"], 4), round(good.details["min_upper_margin"], 4))
bad = check_growth_bounds(H, t, v, Growth(2.0, 4.0))
print("growth bounds with (2, 4):", bad.ok, "| first witness:", bad.violations[0]["check"],
      "at", np.round(bad.violations[0]["point"], 3))

# Affine bound on grad H*; the fit shows how much slack C1 = 1/delta leaves.
gb = check_gradient_bound(H, t, v, C1=1.0, C2=0.0, growth=Growth(1.0, 4.0))
print("gradient bound:", gb.ok, "| fitted C1 =", round(gb.details["fitted_C1"], 3))

# A genuinely nonlinear model: a quartic radial H has a cubic inverse gradient.
Hq = quartic_radial(1, 2, a=1.0, b=1.0)
rq = conjugate_batch(Hq, t, 5 * v)
print("quartic: max Fenchel-Young gap", np.max(np.abs(rq.fenchel_young_gap(Hq, t, 5 * v))),
      "| iterations up to", rq.iterations.max())
