"""Periodic orbits of single-time systems from the dual action.

For p = 1 the equations reduce to the classical x' = dH/dp, p' = -dH/dx.
Critical points of the dual action give T-periodic orbits; the search starts
from random smooth data and the orbit found depends on the start.

Run: python demos/02_single_time_orbits.py
"""
import numpy as np

from dualaction import ActionProblem, MultiTimeGrid, SolveConfig, solve_periodic
from dualaction.hamiltonians import quadratic, saturating_radial, time_scaled

grid = MultiTimeGrid((2 * np.pi,), (64,))
cfg = SolveConfig(grad_tol=1e-10, seed=7)

# Harmonic oscillator, T = 2 pi: every orbit is a circle and every circle is 2 pi-periodic.
prob = ActionProblem(grid, quadratic(1, 1), "fourier", conj_tol=1e-12)
rep = solve_periodic(prob, cfg)
r = np.hypot(*rep.w.values.T)
print(f"oscillator: {rep.message} in {rep.iterations} iterations")
print(f"  radius {r.mean():.6f} (spread {np.ptp(r):.1e}), residual {rep.hamilton_residual_norm:.1e}")
print(f"  v = c - w holds to {rep.mean_shift.max_deviation:.1e}")

# The radius is free for the oscillator; different seeds land on different circles.
for seed in (1, 2, 3):
    w = solve_periodic(prob, SolveConfig(grad_tol=1e-10, seed=seed)).w
    print(f"  seed {seed}: radius {np.hypot(*w.values[0]):.4f}")

# A saturating H turns faster on small orbits and slower on large ones,
# so only the circle |u|^2 = 2 s0 closes after 2 pi.
prob = ActionProblem(grid, saturating_radial(1, 1, eps=0.3, s0=0.5), "fourier", conj_tol=1e-12)
for seed in (1, 2, 3):
    w = solve_periodic(prob, SolveConfig(grad_tol=1e-10, seed=seed)).w
    print(f"saturating, seed {seed}: |u|^2 in [{np.min(np.sum(w.values**2, 1)):.8f}, "
          f"{np.max(np.sum(w.values**2, 1)):.8f}]")

# A non-autonomous H = s(t)|u|^2/2 with s = 1 + sin(t)/2: still a circle, but
# traversed with angular speed s(t); it closes because s averages to 1.
prob = ActionProblem(grid, time_scaled(quadratic(1, 1), "one_plus_half_sin_t1"), "fourier", conj_tol=1e-12)
rep = solve_periodic(prob, cfg)
x, p = rep.w.values.T
t = grid.coordinates[..., 0]
omega = np.gradient(np.unwrap(np.arctan2(-p, x)), t)
print(f"time-scaled: {rep.message}; radius spread {np.ptp(np.hypot(x, p)):.1e}, "
      f"max |angular speed - s(t)| = {np.max(np.abs(omega - (1 + 0.5 * np.sin(t)))[2:-2]):.1e} (finite differences)")
