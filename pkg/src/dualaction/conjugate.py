"""Legendre-Fenchel conjugation of strictly convex Hamiltonians.

H*(t, v) = max_u [ G(u, v) - H(t, u) ], attained at the unique u with
grad_u H(t, u) = v.  The maximiser is found by damped Newton on the concave
inner objective; all routines are vectorised over a batch of points, which
is how the action module sweeps a whole grid at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

__all__ = [
    "Growth",
    "HamiltonianModel",
    "ConjugateResult",
    "ConvexityError",
    "ConjugationError",
    "conjugate",
    "conjugate_batch",
    "grad_conjugate",
    "check_growth_bounds",
    "check_gradient_bound",
    "BoundReport",
]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100


class ConvexityError(ArithmeticError):
    """Hessian of H is not positive definite at a queried point."""

    def __init__(self, t, u, detail=""):
        self.t = np.asarray(t)
        self.u = np.asarray(u)
        msg = f"convexity violation: Hessian of H not SPD at t={self.t.tolist()}, u={self.u.tolist()}"
        super().__init__(msg + (f" ({detail})" if detail else ""))


class ConjugationError(ArithmeticError):
    """Newton iteration for the conjugate did not reach the tolerance."""

    def __init__(self, t, v, residual, iterations):
        self.t = np.asarray(t)
        self.v = np.asarray(v)
        self.residual = float(residual)
        self.iterations = int(iterations)
        super().__init__(
            f"no convergence after {iterations} Newton iterations at t={self.t.tolist()}, "
            f"v={self.v.tolist()}: best residual {self.residual:.3e}"
        )


def _as_time_fn(value) -> Callable:
    if callable(value):
        return value
    c = float(value)
    return lambda t: np.full(np.asarray(t).shape[:-1], c)


@dataclass(frozen=True)
class Growth:
    """Constants of the two-sided quadratic growth hypothesis

        (delta/2)|u|^2 - beta(t) <= H(t, u) <= (alpha/2)|u|^2 + gamma(t).

    ``beta`` and ``gamma`` may be floats or vectorised callables of t.
    """

    delta: float
    alpha: float
    beta: object = 0.0
    gamma: object = 0.0

    def __post_init__(self):
        if not (self.delta > 0 and self.alpha > 0):
            raise ValueError(f"growth constants need delta > 0 and alpha > 0, got {self.delta}, {self.alpha}")

    def beta_at(self, t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(_as_time_fn(self.beta)(t), t.shape[:-1]).astype(float)

    def gamma_at(self, t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(_as_time_fn(self.gamma)(t), t.shape[:-1]).astype(float)


@dataclass(frozen=True)
class HamiltonianModel:
    """Evaluator bundle for H(t, u).

    The three callables take ``t`` of shape ``(M, p)`` and ``u`` of shape
    ``(M, n+np)`` and return arrays of shape ``(M,)``, ``(M, n+np)`` and
    ``(M, n+np, n+np)`` respectively.
    """

    n: int
    p: int
    value: Callable
    grad: Callable
    hess: Callable
    growth: Optional[Growth] = None
    name: str = "H"

    @property
    def dim(self) -> int:
        return self.n + self.n * self.p


@dataclass
class ConjugateResult:
    value: np.ndarray
    argmax: np.ndarray
    iterations: np.ndarray
    residual: np.ndarray

    def fenchel_young_gap(self, H: HamiltonianModel, t, v):
        """H(t, u) + H*(t, v) - G(u, v); zero at an exact result."""
        t, v = _batch(H, t, v)
        return H.value(t, self.argmax.reshape(v.shape)) + np.ravel(self.value) - np.sum(
            self.argmax.reshape(v.shape) * v, axis=-1)


def _batch(H: HamiltonianModel, t, v):
    v = np.atleast_2d(np.asarray(v, dtype=float))
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        t = np.full((v.shape[0], H.p), float(t))
    t = np.atleast_2d(t)
    if t.shape[0] == 1 and v.shape[0] > 1:
        t = np.broadcast_to(t, (v.shape[0], t.shape[1]))
    if v.shape[-1] != H.dim:
        raise ValueError(f"v has dimension {v.shape[-1]}, Hamiltonian expects n+np = {H.dim}")
    if t.shape != (v.shape[0], H.p):
        raise ValueError(f"t has shape {t.shape}, expected {(v.shape[0], H.p)}")
    return t, v


def _newton_directions(H, t, u, r):
    A = H.hess(t, u)
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        for k in range(A.shape[0]):
            try:
                np.linalg.cholesky(A[k])
            except np.linalg.LinAlgError:
                raise ConvexityError(t[k], u[k]) from None
        raise
    y = np.linalg.solve(L, r[..., None])
    return np.linalg.solve(np.swapaxes(L, -1, -2), y)[..., 0]


def conjugate_batch(H: HamiltonianModel, t, v, guess=None, tol: float = DEFAULT_TOL,
                    max_iter: int = DEFAULT_MAX_ITER) -> ConjugateResult:
    """Conjugate at M points at once; ``t`` is ``(M, p)``, ``v`` is ``(M, n+np)``."""
    if tol <= 0:
        raise ValueError("tol must be > 0")
    t, v = _batch(H, t, v)
    u = v.copy() if guess is None else np.array(np.broadcast_to(guess, v.shape), dtype=float)
    iters = np.zeros(v.shape[0], dtype=int)

    def inner(tt, uu, vv):
        return np.sum(uu * vv, axis=-1) - H.value(tt, uu)

    g = H.grad(t, u)
    res = np.linalg.norm(v - g, axis=-1)
    for it in range(max_iter):
        active = np.flatnonzero(res > tol)
        if active.size == 0:
            break
        ta, ua, va = t[active], u[active], v[active]
        r = va - g[active]
        d = _newton_directions(H, ta, ua, r)
        f0 = inner(ta, ua, va)
        slope = np.sum(r * d, axis=-1)
        step = np.ones(active.size)
        trial = ua + d
        todo = np.arange(active.size)
        for _ in range(60):
            f1 = inner(ta[todo], trial[todo], va[todo])
            ok = f1 >= f0[todo] + 1e-4 * step[todo] * slope[todo]
            # roundoff plateau near the optimum: accept the full Newton step
            ok |= np.abs(f1 - f0[todo]) <= 1e-14 * (1.0 + np.abs(f0[todo]))
            todo = todo[~ok]
            if todo.size == 0:
                break
            step[todo] *= 0.5
            trial[todo] = ua[todo] + step[todo, None] * d[todo]
        u[active] = trial
        iters[active] += 1
        g[active] = H.grad(ta, trial)
        res[active] = np.linalg.norm(va - g[active], axis=-1)
    else:
        bad = np.flatnonzero(res > tol)
        if bad.size:
            k = bad[np.argmax(res[bad])]
            raise ConjugationError(t[k], v[k], res[k], max_iter)
    value = np.sum(u * v, axis=-1) - H.value(t, u)
    return ConjugateResult(value=value, argmax=u, iterations=iters, residual=res)


def conjugate(H: HamiltonianModel, t, v, guess=None, tol: float = DEFAULT_TOL,
              max_iter: int = DEFAULT_MAX_ITER) -> ConjugateResult:
    """H*(t, v) at a single point; fields of the result are scalars / 1-D vectors."""
    v = np.asarray(v, dtype=float)
    t = np.zeros(H.p) if t is None else np.atleast_1d(np.asarray(t, dtype=float))
    if t.size == 1 and H.p > 1:
        t = np.full(H.p, float(t[0]))
    res = conjugate_batch(H, t[None, :], v[None, :], None if guess is None else np.asarray(guess)[None, :],
                          tol=tol, max_iter=max_iter)
    return ConjugateResult(value=float(res.value[0]), argmax=res.argmax[0],
                           iterations=int(res.iterations[0]), residual=float(res.residual[0]))


def grad_conjugate(H: HamiltonianModel, t, v, guess=None, tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_MAX_ITER) -> np.ndarray:
    """grad_v H*(t, v) = (grad_u H(t, .))^{-1}(v).  Batched when ``v`` is 2-D."""
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        return conjugate(H, t, v, guess, tol, max_iter).argmax
    return conjugate_batch(H, t, v, guess, tol, max_iter).argmax


# ---------------------------------------------------------------- bound checks

@dataclass
class BoundReport:
    ok: bool
    checked: int
    violations: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {"ok": self.ok, "checked": self.checked, "violations": self.violations, **self.details}


def _slack(*vals):
    return 1e-9 * (1.0 + sum(np.abs(v) for v in vals))


def _witness(kind, t, v, lhs, mid, rhs):
    return {"check": kind, "t": np.asarray(t).tolist(), "point": np.asarray(v).tolist(),
            "lower": float(lhs), "value": float(mid), "upper": float(rhs)}


def check_growth_bounds(H: HamiltonianModel, t, v, growth: Optional[Growth] = None,
                        tol: float = DEFAULT_TOL, max_identity_samples: int = 8, max_witnesses: int = 20) -> BoundReport:
    """Test the growth hypothesis and its conjugate consequence on samples.

    At every sample (t_k, v_k) this checks

    * the conjugate bounds |v|^2/(2 alpha) - gamma <= H*(t,v) <= |v|^2/(2 delta) + beta,
    * the hypothesis itself, using v_k as a sample point u,
    * on ``max_identity_samples`` samples, that maximising G(v,u) - (alpha/2)|u|^2 - gamma over u
      numerically gives the closed form |v|^2/(2 alpha) - gamma.

    Violations are collected as witnesses; nothing is raised.
    """
    growth = growth or H.growth
    if growth is None:
        raise ValueError("check_growth_bounds needs growth metadata (delta, alpha, beta, gamma)")
    t, v = _batch(H, t, v)
    beta = growth.beta_at(t)
    gamma = growth.gamma_at(t)
    sq = np.sum(v * v, axis=-1)
    hstar = conjugate_batch(H, t, v, tol=tol).value
    lo_conj = sq / (2 * growth.alpha) - gamma
    hi_conj = sq / (2 * growth.delta) + beta
    hval = H.value(t, v)
    lo_h = 0.5 * growth.delta * sq - beta
    hi_h = 0.5 * growth.alpha * sq + gamma

    violations = []
    bad_conj = (hstar < lo_conj - _slack(hstar, lo_conj)) | (hstar > hi_conj + _slack(hstar, hi_conj))
    bad_h = (hval < lo_h - _slack(hval, lo_h)) | (hval > hi_h + _slack(hval, hi_h))
    for k in np.flatnonzero(bad_conj)[:max_witnesses]:
        violations.append(_witness("conjugate_bounds", t[k], v[k], lo_conj[k], hstar[k], hi_conj[k]))
    for k in np.flatnonzero(bad_h)[:max_witnesses]:
        violations.append(_witness("growth_hypothesis", t[k], v[k], lo_h[k], hval[k], hi_h[k]))

    max_identity_err = 0.0
    for k in range(min(max_identity_samples, v.shape[0])):
        vk, gk = v[k], gamma[k]

        def neg(u):
            return -(u @ vk - 0.5 * growth.alpha * (u @ u) - gk)

        def neg_grad(u):
            return -(vk - growth.alpha * u)

        opt = optimize.minimize(neg, np.zeros_like(vk), jac=neg_grad, method="BFGS",
                                options={"gtol": 1e-12})
        closed = 0.5 * (vk @ vk) / growth.alpha - gk
        err = abs(-opt.fun - closed)
        max_identity_err = max(max_identity_err, err)
        if err > 1e-8 * (1 + abs(closed)):
            violations.append(_witness("quadratic_max_identity", t[k], vk, closed, -opt.fun, closed))

    details = {
        "conjugate_bounds_ok": bool(not bad_conj.any()),
        "growth_hypothesis_ok": bool(not bad_h.any()),
        "quadratic_max_identity_max_error": float(max_identity_err),
        "min_lower_margin": float(np.min(hstar - lo_conj)),
        "min_upper_margin": float(np.min(hi_conj - hstar)),
        "violation_count": int(bad_conj.sum() + bad_h.sum()),
    }
    return BoundReport(ok=not violations, checked=int(v.shape[0]), violations=violations, details=details)


def check_gradient_bound(H: HamiltonianModel, t, v, C1: float, C2: float, growth: Optional[Growth] = None,
                         tol: float = DEFAULT_TOL, max_witnesses: int = 20) -> BoundReport:
    """Check |grad H*(t,v)| <= C1 |v| + C2 (beta(t) + gamma(t) + 1) on samples.

    Also reports an empirical fit: non-negative least squares of the
    gradient norms on (|v|, beta+gamma+1), and the smallest C2 that makes
    the fitted C1 feasible on the samples.
    """
    growth = growth or H.growth
    if growth is None:
        raise ValueError("check_gradient_bound needs growth metadata (beta, gamma)")
    t, v = _batch(H, t, v)
    weight = growth.beta_at(t) + growth.gamma_at(t) + 1.0
    gnorm = np.linalg.norm(conjugate_batch(H, t, v, tol=tol).argmax, axis=-1)
    vnorm = np.linalg.norm(v, axis=-1)
    bound = C1 * vnorm + C2 * weight
    bad = gnorm > bound + _slack(gnorm, bound)
    violations = [_witness("gradient_bound", t[k], v[k], 0.0, gnorm[k], bound[k])
                  for k in np.flatnonzero(bad)[:max_witnesses]]
    (c1_fit, c2_fit), _ = optimize.nnls(np.column_stack([vnorm, weight]), gnorm)
    c2_feasible = float(max(0.0, np.max((gnorm - c1_fit * vnorm) / weight)))
    details = {
        "C1": float(C1), "C2": float(C2),
        "fitted_C1": float(c1_fit), "fitted_C2": float(c2_fit),
        "feasible_C2_for_fitted_C1": c2_feasible,
        "max_ratio_to_bound": float(np.max(gnorm / np.maximum(bound, 1e-300))),
        "violation_count": int(bad.sum()),
    }
    return BoundReport(ok=not violations, checked=int(v.shape[0]), violations=violations, details=details)
