"""Built-in Hamiltonian families.

All callables are vectorised: ``t`` is ``(M, p)``, ``u`` is ``(M, n+np)``.
"""

from __future__ import annotations

import numpy as np

from .conjugate import Growth, HamiltonianModel, conjugate_batch
from .core import state_dim

__all__ = ["quadratic", "time_scaled", "quartic_radial", "saturating_radial", "conjugate_model",
           "TIME_SCALINGS"]


def quadratic(n: int, p: int, A=None, b=None, growth: Growth = None) -> HamiltonianModel:
    """H(u) = 1/2 u^T A u + b.u; ``A`` may be a matrix, a diagonal vector or None (identity)."""
    d = state_dim(n, p)
    if A is None:
        A = np.eye(d)
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = np.diag(A)
    if A.shape != (d, d):
        raise ValueError(f"A has shape {A.shape}, expected {(d, d)} for n={n}, p={p}")
    if not np.allclose(A, A.T):
        raise ValueError("A must be symmetric")
    b = np.zeros(d) if b is None else np.asarray(b, dtype=float)
    if b.shape != (d,):
        raise ValueError(f"b has shape {b.shape}, expected {(d,)}")

    def value(t, u):
        return 0.5 * np.einsum("...i,ij,...j->...", u, A, u) + u @ b

    def grad(t, u):
        return u @ A + b

    def hess(t, u):
        return np.broadcast_to(A, (u.shape[0], d, d))

    return HamiltonianModel(n, p, value, grad, hess, growth=growth, name="quadratic")


# scaling functions s(t) > 0 of the first time coordinate
TIME_SCALINGS = {
    "one": lambda t: np.ones(t.shape[:-1]),
    "one_plus_t1": lambda t: 1.0 + t[..., 0],
    "two_plus_sin_t1": lambda t: 2.0 + np.sin(t[..., 0]),
    "two_plus_cos_t1": lambda t: 2.0 + np.cos(t[..., 0]),
    "one_plus_half_sin_t1": lambda t: 1.0 + 0.5 * np.sin(t[..., 0]),
}


def time_scaled(base: HamiltonianModel, scaling="one_plus_t1", growth: Growth = None) -> HamiltonianModel:
    """H(t, u) = s(t) * base(t, u) for a positive scaling s (a name from TIME_SCALINGS or a callable)."""
    s = TIME_SCALINGS[scaling] if isinstance(scaling, str) else scaling
    if isinstance(scaling, str) and scaling not in TIME_SCALINGS:
        raise ValueError(f"unknown time scaling {scaling!r}; known: {sorted(TIME_SCALINGS)}")

    def value(t, u):
        return s(t) * base.value(t, u)

    def grad(t, u):
        return s(t)[:, None] * base.grad(t, u)

    def hess(t, u):
        return s(t)[:, None, None] * base.hess(t, u)

    return HamiltonianModel(base.n, base.p, value, grad, hess, growth=growth,
                            name=f"time_scaled({base.name})")


def quartic_radial(n: int, p: int, a: float = 1.0, b: float = 1.0, growth: Growth = None) -> HamiltonianModel:
    """H(u) = (a/4)|u|^4 + (b/2)|u|^2, strictly convex for a >= 0, b > 0."""
    if a < 0 or b <= 0:
        raise ValueError(f"quartic_radial needs a >= 0 and b > 0, got a={a}, b={b}")
    d = state_dim(n, p)

    def value(t, u):
        r2 = np.sum(u * u, axis=-1)
        return 0.25 * a * r2**2 + 0.5 * b * r2

    def grad(t, u):
        r2 = np.sum(u * u, axis=-1, keepdims=True)
        return (a * r2 + b) * u

    def hess(t, u):
        r2 = np.sum(u * u, axis=-1)
        return (a * r2 + b)[:, None, None] * np.eye(d) + 2 * a * u[:, :, None] * u[:, None, :]

    return HamiltonianModel(n, p, value, grad, hess, growth=growth, name="quartic_radial")


def saturating_radial(n: int, p: int, eps: float = 0.3, s0: float = 0.5, growth: Growth = None) -> HamiltonianModel:
    """H(u) = f(|u|^2 / 2) with f(s) = s - eps * (sqrt(1 + (s - s0)^2) - sqrt(1 + s0^2)).

    f' decreases through 1 at s = s0, so for p = 1 the circles |u|^2 = 2 s0
    are the 2 pi-periodic orbits while smaller (larger) orbits turn faster
    (slower).  Strict convexity needs eps < 1 and 1 - eps - 2 s0 eps > 0.
    """
    if not (0 <= eps < 1) or 1 - eps - 2 * s0 * eps <= 0:
        raise ValueError(f"saturating_radial is not strictly convex for eps={eps}, s0={s0}")
    d = state_dim(n, p)
    c0 = np.sqrt(1 + s0**2)

    def parts(u):
        s = 0.5 * np.sum(u * u, axis=-1)
        r = np.sqrt(1 + (s - s0) ** 2)
        return s, r, 1 - eps * (s - s0) / r, -eps / r**3

    def value(t, u):
        s, r, _, _ = parts(u)
        return s - eps * (r - c0)

    def grad(t, u):
        _, _, f1, _ = parts(u)
        return f1[:, None] * u

    def hess(t, u):
        _, _, f1, f2 = parts(u)
        return f1[:, None, None] * np.eye(d) + f2[:, None, None] * u[:, :, None] * u[:, None, :]

    return HamiltonianModel(n, p, value, grad, hess, growth=growth, name="saturating_radial")


def conjugate_model(H: HamiltonianModel, fd_step: float = 1e-5) -> HamiltonianModel:
    """Wrap v -> H*(t, v) as a Hamiltonian in its own right.

    The gradient is the conjugate maximiser; the Hessian is taken by central
    differences of that gradient, so conjugating the result again exercises
    the Newton solver on a model it did not build analytically.
    """
    d = H.dim

    def value(t, v):
        return conjugate_batch(H, t, v, tol=1e-13).value

    def grad(t, v):
        return conjugate_batch(H, t, v, tol=1e-13).argmax

    def hess(t, v):
        out = np.empty((v.shape[0], d, d))
        for j in range(d):
            e = np.zeros(d)
            e[j] = fd_step
            out[:, :, j] = (grad(t, v + e) - grad(t, v - e)) / (2 * fd_step)
        return 0.5 * (out + np.swapaxes(out, 1, 2))

    return HamiltonianModel(H.n, H.p, value, grad, hess, name=f"conjugate({H.name})")
