"""Energy-moment tensor and first integrals.

For an autonomous Lagrangian the tensor T^a_b = x_b dL/dx_a - delta^a_b L is
divergence free along solutions.  For p = 1 it is the energy and it is
conserved; for p > 1 the Hamiltonian itself is not.

Run: python demos/04_conservation.py
"""
import numpy as np

from dualaction import MultiTimeGrid, TrajectoryField, divergence_check, energy_moment_tensor, harmonic_oscillator, helmholtz
from dualaction.classical import first_integral_check, hamiltonian_along

# single time: circle orbit of the oscillator on a spectral grid
g = MultiTimeGrid((2 * np.pi,), (64,))
orbit = TrajectoryField(g, 1.3 * np.cos(g.coordinates[..., 0]))
L = harmonic_oscillator(1)
T = energy_moment_tensor(L, orbit, "fourier")
fi = first_integral_check(L, orbit, "fourier")
print(f"p=1: T^1_1 - H = {np.max(np.abs(T[..., 0, 0] - hamiltonian_along(L, orbit, 'fourier')))}, "
      f"energy {fi.values['H0']:.6f}, drift {fi.values['drift']:.1e}")

# two times: standing wave cos(t1/sqrt 2) cos(t2/sqrt 2) solves Helmholtz
L = helmholtz(1, 2)
Tp = 2 * np.pi * np.sqrt(2)
for N in (32, 64, 128):
    g = MultiTimeGrid((Tp, Tp), (N, N))
    t = g.coordinates
    wave = TrajectoryField(g, np.cos(t[..., 0] / np.sqrt(2)) * np.cos(t[..., 1] / np.sqrt(2)))
    div = divergence_check(L, wave, "central2").values["divergence_sup"]
    H = hamiltonian_along(L, wave, "central2")
    print(f"p=2, N={N:3d}: sup |div T| = {div:.2e}, H ranges over [{H.min():.3f}, {H.max():.3f}]")
