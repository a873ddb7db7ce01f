"""Lagrangian side: Legendre transform L -> H, Euler-Lagrange and Hamilton
residuals, the first integral for p = 1 and the energy-moment tensor.

Trajectories store positions only; velocities x^i_alpha are always taken with
the configured derivative scheme, so every residual here is consistent with a
single discretisation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .conjugate import HamiltonianModel
from .core import MultiTimeGrid, PeriodicField, Scheme, derivative_array, partial
from .action import ActionProblem
from .solver import verify_hamilton

__all__ = [
    "LagrangianModel",
    "TrajectoryField",
    "DegenerateLagrangianError",
    "harmonic_oscillator",
    "helmholtz",
    "free_field",
    "quartic_field",
    "modulated_helmholtz",
    "legendre_L_to_H",
    "velocities_from_momenta",
    "hamiltonian_from_lagrangian",
    "euler_lagrange_residual",
    "hamilton_equivalence_check",
    "first_integral_check",
    "energy_moment_tensor",
    "divergence_check",
    "hamiltonian_along",
    "phase_field",
]


class DegenerateLagrangianError(ArithmeticError):
    pass


@dataclass(frozen=True)
class LagrangianModel:
    """L(t, x, x_dot) with x of shape ``(M, n)`` and x_dot of shape ``(M, n, p)``.

    ``dx``, ``dxd``, ``dt`` are the partials dL/dx^i, dL/dx^i_alpha, dL/dt^alpha;
    ``hess_xd`` is d^2 L / dx^i_alpha dx^k_beta with shape ``(M, n, p, n, p)``.
    """

    n: int
    p: int
    value: Callable
    dx: Callable
    dxd: Callable
    dt: Callable
    hess_xd: Callable
    autonomous: bool = True
    name: str = "L"


@dataclass(frozen=True)
class TrajectoryField:
    grid: MultiTimeGrid
    x: np.ndarray  # (*grid.shape, n)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == self.grid.p:
            x = x[..., None]
        if x.shape[:-1] != self.grid.shape:
            raise ValueError(f"trajectory shape {x.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.x.shape[-1]

    @classmethod
    def from_function(cls, grid: MultiTimeGrid, fn) -> "TrajectoryField":
        return cls(grid, fn(grid.coordinates))


# ------------------------------------------------------------------ built-ins

def _quadratic_velocity_lagrangian(n, p, potential, dpotential, dpot_dt=None, name="L"):
    """L = 1/2 sum (x^i_alpha)^2 - V(t, x)."""

    def value(t, x, xd):
        return 0.5 * np.sum(xd * xd, axis=(-2, -1)) - potential(t, x)

    def dx(t, x, xd):
        return -dpotential(t, x)

    def dxd(t, x, xd):
        return xd

    def dt(t, x, xd):
        if dpot_dt is None:
            return np.zeros((x.shape[0], p))
        return -dpot_dt(t, x)

    def hess_xd(t, x, xd):
        eye = np.eye(n * p).reshape(n, p, n, p)
        return np.broadcast_to(eye, (x.shape[0], n, p, n, p))

    return LagrangianModel(n, p, value, dx, dxd, dt, hess_xd, autonomous=dpot_dt is None, name=name)


def harmonic_oscillator(n: int = 1, omega: float = 1.0) -> LagrangianModel:
    """Single-time L = 1/2 |x_dot|^2 - 1/2 omega^2 |x|^2."""
    w2 = omega**2
    return _quadratic_velocity_lagrangian(
        n, 1, lambda t, x: 0.5 * w2 * np.sum(x * x, axis=-1), lambda t, x: w2 * x, name="harmonic_oscillator")


def helmholtz(n: int = 1, p: int = 2, k2: float = 1.0) -> LagrangianModel:
    """L = 1/2 sum_alpha (x_alpha)^2 - 1/2 k2 |x|^2; Euler-Lagrange: Laplace(x) + k2 x = 0."""
    return _quadratic_velocity_lagrangian(
        n, p, lambda t, x: 0.5 * k2 * np.sum(x * x, axis=-1), lambda t, x: k2 * x, name="helmholtz")


def free_field(n: int = 1, p: int = 1) -> LagrangianModel:
    return _quadratic_velocity_lagrangian(
        n, p, lambda t, x: np.zeros(x.shape[0]), lambda t, x: np.zeros_like(x), name="free_field")


def modulated_helmholtz(n: int = 1, p: int = 2, eps: float = 0.3) -> LagrangianModel:
    """Non-autonomous L = 1/2 sum (x_alpha)^2 - 1/2 (1 + eps sin t^1) |x|^2."""

    def V(t, x):
        return 0.5 * (1 + eps * np.sin(t[:, 0])) * np.sum(x * x, axis=-1)

    def dV(t, x):
        return (1 + eps * np.sin(t[:, 0]))[:, None] * x

    def dV_dt(t, x):
        out = np.zeros((x.shape[0], p))
        out[:, 0] = 0.5 * eps * np.cos(t[:, 0]) * np.sum(x * x, axis=-1)
        return out

    return _quadratic_velocity_lagrangian(n, p, V, dV, dV_dt, name="modulated_helmholtz")


def quartic_field(n: int = 1, p: int = 1, eps: float = 0.5) -> LagrangianModel:
    """L = sum [1/2 (x^i_alpha)^2 + eps/4 (x^i_alpha)^4] - 1/2 |x|^2; non-linear Legendre map."""
    if eps < 0:
        raise ValueError("quartic_field needs eps >= 0")

    def value(t, x, xd):
        return np.sum(0.5 * xd**2 + 0.25 * eps * xd**4, axis=(-2, -1)) - 0.5 * np.sum(x * x, axis=-1)

    def dx(t, x, xd):
        return -x

    def dxd(t, x, xd):
        return xd + eps * xd**3

    def dt(t, x, xd):
        return np.zeros((x.shape[0], p))

    def hess_xd(t, x, xd):
        diag = (1 + 3 * eps * xd**2).reshape(x.shape[0], n * p)
        return (diag[:, :, None] * np.eye(n * p)).reshape(x.shape[0], n, p, n, p)

    return LagrangianModel(n, p, value, dx, dxd, dt, hess_xd, autonomous=True, name="quartic_field")


# ------------------------------------------------------------------ Legendre

def legendre_L_to_H(L: LagrangianModel, t, x, xd):
    """Momenta p_k^alpha = dL/dx^k_alpha and H = p_k^alpha x^k_alpha - L, batched."""
    P = L.dxd(t, x, xd)
    H = np.sum(P * xd, axis=(-2, -1)) - L.value(t, x, xd)
    return P, H


def velocities_from_momenta(L: LagrangianModel, t, x, P, guess=None, tol: float = 1e-13, max_iter: int = 50):
    """Invert the Legendre map x_dot -> dL/dx_dot by Newton's method."""
    M, n, p = P.shape
    xd = np.array(P if guess is None else guess, dtype=float)
    for _ in range(max_iter):
        r = (L.dxd(t, x, xd) - P).reshape(M, n * p)
        if np.max(np.abs(r), initial=0.0) <= tol * (1 + np.max(np.abs(P), initial=0.0)):
            return xd
        A = L.hess_xd(t, x, xd).reshape(M, n * p, n * p)
        try:
            step = np.linalg.solve(A, r[..., None])[..., 0]
        except np.linalg.LinAlgError:
            raise DegenerateLagrangianError(
                f"velocity Hessian of {L.name} is singular; the Legendre map is not invertible") from None
        xd = xd - step.reshape(M, n, p)
    r = np.abs(L.dxd(t, x, xd) - P).max()
    if r > 1e-8 * (1 + np.abs(P).max()):
        raise DegenerateLagrangianError(f"Legendre inversion for {L.name} did not converge (residual {r:.3e})")
    return xd


def hamiltonian_from_lagrangian(L: LagrangianModel, fd_step: float = 1e-6) -> HamiltonianModel:
    """H(t, x, p) as a HamiltonianModel on u = (x, p).

    The gradient uses dH/dp = x_dot(p) and dH/dx = -dL/dx; the Hessian is a
    central difference of that gradient.
    """
    n, p = L.n, L.p

    def split(u):
        return u[:, :n], u[:, n:].reshape(-1, n, p)

    def value(t, u):
        x, P = split(u)
        xd = velocities_from_momenta(L, t, x, P)
        return np.sum(P * xd, axis=(-2, -1)) - L.value(t, x, xd)

    def grad(t, u):
        x, P = split(u)
        xd = velocities_from_momenta(L, t, x, P)
        return np.concatenate([-L.dx(t, x, xd), xd.reshape(-1, n * p)], axis=-1)

    def hess(t, u):
        d = u.shape[1]
        out = np.empty((u.shape[0], d, d))
        for j in range(d):
            e = np.zeros(d)
            e[j] = fd_step
            out[:, :, j] = (grad(t, u + e) - grad(t, u - e)) / (2 * fd_step)
        return 0.5 * (out + np.swapaxes(out, 1, 2))

    return HamiltonianModel(n, p, value, grad, hess, name=f"legendre({L.name})")


# ------------------------------------------------------------------ residuals

def _along(L: LagrangianModel, traj: TrajectoryField, scheme):
    grid = traj.grid
    if traj.n != L.n or grid.p != L.p:
        raise ValueError(f"trajectory (n={traj.n}, p={grid.p}) does not match Lagrangian (n={L.n}, p={L.p})")
    xd = derivative_array(traj.x, grid, scheme)  # (*shape, n, p)
    t = grid.flat_coordinates
    x = traj.x.reshape(-1, L.n)
    return t, x, xd.reshape(-1, L.n, L.p)


def _l2(values, grid):
    return float(np.sqrt(np.sum(values * values) * grid.cell_volume))


def euler_lagrange_residual(L: LagrangianModel, traj: TrajectoryField, scheme) -> np.ndarray:
    """sum_alpha D_alpha (dL/dx^i_alpha) - dL/dx^i at every node, shape ``(*shape, n)``."""
    grid = traj.grid
    t, x, xd = _along(L, traj, scheme)
    P = L.dxd(t, x, xd).reshape(*grid.shape, L.n, L.p)
    div = sum(partial(P[..., a], grid, a, scheme) for a in range(grid.p))
    return div - L.dx(t, x, xd).reshape(*grid.shape, L.n)


def phase_field(L: LagrangianModel, traj: TrajectoryField, scheme) -> PeriodicField:
    """u = (x, p) with p from the Legendre map along the trajectory."""
    t, x, xd = _along(L, traj, scheme)
    P = L.dxd(t, x, xd)
    return PeriodicField.from_blocks(traj.grid, traj.x, P.reshape(*traj.grid.shape, L.n, L.p))


@dataclass
class ClassicalReport:
    ok: bool
    values: dict = field(default_factory=dict)

    def to_dict(self):
        return {"ok": self.ok, **self.values}


def hamilton_equivalence_check(L: LagrangianModel, traj: TrajectoryField, scheme,
                               ratio_bounds=(0.1, 10.0)) -> ClassicalReport:
    """Euler-Lagrange vs Hamilton residual of the same trajectory."""
    el = _l2(euler_lagrange_residual(L, traj, scheme), traj.grid)
    u = phase_field(L, traj, scheme)
    prob = ActionProblem(traj.grid, hamiltonian_from_lagrangian(L), scheme)
    ham = verify_hamilton(prob, u).l2
    if el == 0.0 and ham == 0.0:
        ratio = 1.0
    else:
        ratio = ham / el if el > 0 else float("inf")
    ok = ratio_bounds[0] <= ratio <= ratio_bounds[1]
    return ClassicalReport(ok, {"euler_lagrange_l2": el, "hamilton_l2": ham, "ratio": ratio})


def hamiltonian_along(L: LagrangianModel, traj: TrajectoryField, scheme) -> np.ndarray:
    """H = p_k^alpha x^k_alpha - L at every node, shape ``grid.shape``."""
    t, x, xd = _along(L, traj, scheme)
    return legendre_L_to_H(L, t, x, xd)[1].reshape(traj.grid.shape)


def first_integral_check(L: LagrangianModel, traj: TrajectoryField, scheme, tol: float = 1e-10) -> ClassicalReport:
    """max |H(t) - H(0)| along a single-time trajectory of an autonomous Lagrangian."""
    if traj.grid.p != 1:
        raise ValueError("first_integral_check is for single-time trajectories (p = 1)")
    if not L.autonomous:
        raise ValueError(f"{L.name} depends explicitly on t; H is not a first integral")
    H = hamiltonian_along(L, traj, scheme)
    drift = float(np.max(np.abs(H - H[0])))
    return ClassicalReport(drift <= tol, {"drift": drift, "H0": float(H[0]), "tol": tol})


def energy_moment_tensor(L: LagrangianModel, traj: TrajectoryField, scheme) -> np.ndarray:
    """T[..., alpha, beta] = x^i_beta dL/dx^i_alpha - delta^alpha_beta L."""
    t, x, xd = _along(L, traj, scheme)
    P = L.dxd(t, x, xd)
    T = np.einsum("mib,mia->mab", xd, P) - L.value(t, x, xd)[:, None, None] * np.eye(L.p)
    return T.reshape(*traj.grid.shape, L.p, L.p)


def divergence_check(L: LagrangianModel, traj: TrajectoryField, scheme, tol: float = np.inf) -> ClassicalReport:
    """sup over nodes of |sum_alpha D_alpha T^alpha_beta + dL/dt^beta|."""
    grid = traj.grid
    T = energy_moment_tensor(L, traj, scheme)
    div = sum(partial(T[..., a, :], grid, a, scheme) for a in range(grid.p))
    t, x, xd = _along(L, traj, scheme)
    defect = div + L.dt(t, x, xd).reshape(*grid.shape, L.p)
    sup = float(np.max(np.abs(defect)))
    return ClassicalReport(sup <= tol, {"divergence_sup": sup, "divergence_l2": _l2(defect, grid), "tol": tol})
