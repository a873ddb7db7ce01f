"""The two-time Helmholtz field and what the dual action does with it.

H = (x^2 + (p^1)^2 + (p^2)^2)/2 gives the de Donder-Weyl equations
dp^1/dt^1 + dp^2/dt^2 = -x, dx/dt^a = p^a, i.e. the Helmholtz equation
Laplace(x) + x = 0.  With periods 2 pi sqrt 2 the plane wave
cos((t1 + t2)/sqrt 2) is an exact periodic solution.

Run: python demos/03_multi_time_helmholtz.py
"""
import numpy as np

from pathlib import Path

from dualaction import ActionProblem, MultiTimeGrid, PeriodicField, SolveConfig, eval_phi, solve_periodic, verify_hamilton
from dualaction.core import derivative_symbols
from dualaction.scenario import load_scenario

sc = load_scenario(Path(__file__).resolve().parent.parent / "scenarios" / "helmholtz.toml")
T = sc.grid.periods[0]

# 1. The exact solution sampled on central-difference grids: second-order residual.
print("analytic plane wave, central differences")
prev = None
for N in (32, 64, 128):
    g = MultiTimeGrid((T, T), (N, N))
    r = verify_hamilton(sc.problem(g), sc.reference_field(g))
    rate = "" if prev is None else f"  rate {np.log2(prev / r.l2):.2f}"
    print(f"  N={N:4d}  L2 residual {r.l2:.3e}  sup {r.sup:.3e}{rate}")
    prev = r.l2

# 2. The dual action is indefinite here.  Its Hessian acts mode by mode with
# eigenvalues lam + lam^2, lam = +-|s(k)|, which is negative when |s| < 1.
for scheme in ("fourier", "central2"):
    g = MultiTimeGrid((T, T), (64, 64))
    s = np.stack(np.meshgrid(*[derivative_symbols(g, a, scheme) for a in range(2)], indexing="ij"), -1)
    lam = np.sqrt(np.sum(s**2, -1))
    lam = lam[lam > 1e-12]
    ev = np.concatenate([lam + lam**2, -lam + lam**2])
    print(f"{scheme:9s}: Hessian eigenvalues in [{ev.min():.4f}, {ev.max():.1f}], "
          f"closest to zero {np.abs(ev).min():.2e}")
print("  fourier has an exact zero (the plane waves); central2 does not, so its only critical point is v = 0")

# 3. Along a negative direction Phi decreases without bound.
g = MultiTimeGrid((T, T), (32, 32))
prob = ActionProblem(g, sc.hamiltonian, "fourier")
t = g.coordinates
th = t[..., 0] / np.sqrt(2)
# the (1, 0) mode v = (cos, -sin, 0) satisfies K v = -v / sqrt 2
d = PeriodicField(g, 1, np.stack([np.cos(th), -np.sin(th), np.zeros_like(th)], -1))
print("Phi(a * d) for a = 1, 10, 100:", [round(eval_phi(prob, a * d), 3) for a in (1, 10, 100)])

# 4. Descent from random data therefore runs away; the solver says so.
rep = solve_periodic(sc.problem(), SolveConfig(seed=3, grad_tol=1e-6))
print("solver on 64^2 central2:", rep.message)
