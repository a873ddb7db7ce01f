"""Search for periodic critical points of the discrete dual action.

The search runs on fields with zero mean (more precisely, on the range of
the v* map, which also strips divergence-free momenta when p > 1; the dual
action is blind to both).  At a critical point v the field

    w = grad H*(t, v*)           (v* = (delta x J) dv/dt)

solves the multi-time Hamilton equations (delta x J) dw/dt + grad H(t, w) = 0
and the two fields are tied by v = c - w with c the mean of w.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .action import ActionProblem, PhiEvaluation, phi_and_grad
from .conjugate import ConjugationError, ConvexityError, conjugate_batch
from .core import PeriodicField, apply_K, mean, project_off_kernel, state_dim

__all__ = [
    "SolveConfig",
    "SolveReport",
    "SolveError",
    "HamiltonResidual",
    "MeanShiftReport",
    "random_smooth_field",
    "solve_periodic",
    "recover_w",
    "mean_shift_check",
    "verify_hamilton",
    "hamilton_residual_field",
]

log = logging.getLogger(__name__)

OPTIMIZERS = ("gd", "lbfgs")


@dataclass
class SolveConfig:
    """Optimizer settings.  ``init`` is ``"zero"``, ``"random_smooth"`` or a PeriodicField."""

    max_iters: int = 1000
    grad_tol: float = 1e-8
    optimizer: str = "lbfgs"
    lbfgs_memory: int = 10
    seed: int = 0
    init: Union[str, PeriodicField] = "random_smooth"
    k_max: int = 3
    amplitude: float = 1.0
    trivial_tol: float = 1e-10
    mean_shift_tol: float = 1e-8
    divergence_limit: float = 1e8

    def __post_init__(self):
        if self.grad_tol <= 0:
            raise ValueError(f"grad_tol must be > 0, got {self.grad_tol}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")
        aliases = {"gradientdescentarmijo": "gd", "gradient_descent": "gd", "l-bfgs": "lbfgs"}
        opt = aliases.get(str(self.optimizer).lower(), str(self.optimizer).lower())
        if opt not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}; expected one of {OPTIMIZERS}")
        self.optimizer = opt
        if self.lbfgs_memory < 1:
            raise ValueError("lbfgs_memory must be >= 1")
        if isinstance(self.init, str) and self.init not in ("zero", "random_smooth"):
            raise ValueError(f"unknown init {self.init!r}; expected 'zero', 'random_smooth' or a field")


@dataclass
class HamiltonResidual:
    l2: float
    sup: float


@dataclass
class MeanShiftReport:
    ok: bool
    max_deviation: float
    worst_node: tuple
    c: np.ndarray
    tol: float

    def to_dict(self):
        return {"ok": self.ok, "max_deviation": self.max_deviation, "worst_node": list(self.worst_node),
                "c": self.c.tolist(), "tol": self.tol}


@dataclass
class SolveReport:
    v: PeriodicField
    w: Optional[PeriodicField]
    c: Optional[np.ndarray]
    converged: bool
    iterations: int
    final_grad_norm: float
    final_phi: float
    hamilton_residual_norm: Optional[float]
    hamilton_residual_sup: Optional[float]
    mean_shift: Optional[MeanShiftReport]
    trivial: Optional[bool]
    message: str
    history: list = field(default_factory=list)

    def to_dict(self):
        return {
            "converged": self.converged,
            "message": self.message,
            "iterations": self.iterations,
            "final_grad_norm": self.final_grad_norm,
            "final_phi": self.final_phi,
            "hamilton_residual_norm": self.hamilton_residual_norm,
            "hamilton_residual_sup": self.hamilton_residual_sup,
            "c": None if self.c is None else self.c.tolist(),
            "mean_v": mean(self.v).tolist(),
            "max_abs_w": None if self.w is None else float(np.max(np.abs(self.w.values))),
            "trivial": self.trivial,
            "mean_shift": None if self.mean_shift is None else self.mean_shift.to_dict(),
        }


class SolveError(RuntimeError):
    """Conjugation failed during the search; ``iterate`` is the field being evaluated."""

    def __init__(self, msg, iterate: PeriodicField, iteration: int):
        super().__init__(msg)
        self.iterate = iterate
        self.iteration = iteration


def random_smooth_field(grid, n: int, k_max: int, amplitude: float, rng: np.random.Generator) -> np.ndarray:
    """Band-limited random values, shape ``(*grid.shape, n+np)``; modes with |m_alpha| <= k_max."""
    d = state_dim(n, grid.p)
    t = grid.coordinates
    out = np.zeros((*grid.shape, d))
    modes = np.array(np.meshgrid(*[np.arange(-k_max, k_max + 1)] * grid.p, indexing="ij")).reshape(grid.p, -1).T
    for m in modes:
        nz = np.flatnonzero(m)
        if nz.size == 0 or m[nz[0]] < 0:  # one representative of each +-m pair, no constant
            continue
        phase = sum(2 * np.pi * m[a] * t[..., a] / grid.periods[a] for a in range(grid.p))
        a, b = rng.standard_normal((2, d))
        out += np.cos(phase)[..., None] * a + np.sin(phase)[..., None] * b
    peak = np.max(np.abs(out))
    return out * (amplitude / peak) if peak > 0 else out


def _initial_field(prob: ActionProblem, cfg: SolveConfig) -> PeriodicField:
    if isinstance(cfg.init, PeriodicField):
        return cfg.init
    if cfg.init == "zero":
        return PeriodicField.zeros(prob.grid, prob.n)
    rng = np.random.default_rng(cfg.seed)
    return PeriodicField(prob.grid, prob.n, random_smooth_field(prob.grid, prob.n, cfg.k_max, cfg.amplitude, rng))


def _evaluate(prob, v, guess, iteration) -> PhiEvaluation:
    try:
        return phi_and_grad(prob, v, guess=guess)
    except (ConjugationError, ConvexityError) as exc:
        raise SolveError(f"conjugation failed at iteration {iteration}: {exc}", v, iteration) from exc


def _sup(f: PeriodicField) -> float:
    return float(np.max(np.abs(f.values)))


def solve_periodic(prob: ActionProblem, cfg: Optional[SolveConfig] = None) -> SolveReport:
    """Drive the sup-norm of grad Phi below ``cfg.grad_tol`` on the gauge-fixed subspace.

    Critical points, not minima, are the target; the line searches still
    require decrease of Phi, so on a dual action that is unbounded below the
    iterates run away and the report says so (converged=False).
    """
    cfg = cfg or SolveConfig()
    scheme = prob.scheme
    v = _initial_field(prob, cfg)
    if cfg.max_iters == 0:
        return _finish(prob, cfg, v, None, 0, False, "max_iters=0: no iterations performed", [])
    v = project_off_kernel(v, scheme)
    ev = _evaluate(prob, v, None, 0)
    gnorm = _sup(ev.grad)
    history = [(0, ev.value, gnorm)]
    dV = prob.cell_volume
    converged = gnorm <= cfg.grad_tol
    message = "initial iterate is critical" if converged else ""
    step = 1.0
    s_list, y_list = [], []
    it = 0
    while not converged and it < cfg.max_iters:
        it += 1
        g = ev.grad.values
        if cfg.optimizer == "lbfgs":
            d = _lbfgs_direction(g, s_list, y_list, dV)
            if np.sum(d * g) >= 0:
                s_list.clear(), y_list.clear()
                d = -g / dV
            step = 1.0
        else:
            d = -g / dV
            if s_list:
                # Barzilai-Borwein trial step, still safeguarded by Armijo backtracking
                sy = float(np.sum(s_list[-1] * y_list[-1]))
                step = float(np.sum(s_list[-1] ** 2)) * dV / sy if sy > 0 else 2.0 * step
        accepted = _line_search(prob, v, ev, gnorm, d, step, it)
        if accepted is None and (s_list or step != 1.0):
            # stale curvature pairs or a bad BB step: restart from steepest descent
            s_list.clear(), y_list.clear()
            d = -g / dV
            accepted = _line_search(prob, v, ev, gnorm, d, 1.0, it)
        if accepted is None:
            message = "line search failed to find a decrease"
            break
        trial, ev_t, step = accepted
        s_vec = trial.values - v.values
        y_vec = ev_t.grad.values - ev.grad.values
        if cfg.optimizer == "lbfgs":
            sy = float(np.sum(s_vec * y_vec))
            if sy > 1e-12 * np.linalg.norm(s_vec) * np.linalg.norm(y_vec):
                s_list.append(s_vec), y_list.append(y_vec)
                if len(s_list) > cfg.lbfgs_memory:
                    s_list.pop(0), y_list.pop(0)
        else:
            s_list[:], y_list[:] = [s_vec], [y_vec]
        v, ev = trial, ev_t
        gnorm = _sup(ev.grad)
        history.append((it, ev.value, gnorm))
        if gnorm <= cfg.grad_tol:
            converged = True
            message = "gradient tolerance reached"
        elif _sup(v) > cfg.divergence_limit or ev.value < -cfg.divergence_limit:
            message = (f"iterates diverge (|v|_inf={_sup(v):.3e}, Phi={ev.value:.3e}): "
                       "the dual action is unbounded below along the search")
            break
    if not converged and not message:
        message = f"max_iters={cfg.max_iters} reached with |grad Phi|_inf={gnorm:.3e}"
    log.info("solve_periodic: %s after %d iterations", message, it)
    return _finish(prob, cfg, v, ev, it, converged, message, history)


def _line_search(prob, v, ev, gnorm, d, step, it):
    slope = float(np.sum(ev.grad.values * d))
    for _ in range(60):
        trial = project_off_kernel(v.with_values(v.values + step * d), prob.scheme)
        ev_t = _evaluate(prob, trial, ev.argmax, it)
        if np.isfinite(ev_t.value) and ev_t.value <= ev.value + 1e-4 * step * slope:
            return trial, ev_t, step
        # at the roundoff floor of Phi, fall back on a decrease of |grad Phi|
        if abs(ev_t.value - ev.value) <= 1e-13 * (1.0 + abs(ev.value)) and _sup(ev_t.grad) < gnorm:
            return trial, ev_t, step
        step *= 0.5
    return None


def _lbfgs_direction(g, s_list, y_list, dV):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_list), reversed(y_list)):
        rho = 1.0 / np.sum(y * s)
        a = rho * np.sum(s * q)
        alphas.append((rho, a))
        q -= a * y
    if s_list:
        s, y = s_list[-1], y_list[-1]
        q *= np.sum(s * y) / np.sum(y * y)
    else:
        q /= dV
    for (s, y), (rho, a) in zip(zip(s_list, y_list), reversed(alphas)):
        b = rho * np.sum(y * q)
        q += (a - b) * s
    return -q


def _finish(prob, cfg, v, ev, iterations, converged, message, history) -> SolveReport:
    finite = bool(np.all(np.isfinite(v.values)))
    w = res = shift = trivial = c = None
    if finite:
        try:
            w = recover_w(prob, v, guess=None if ev is None else ev.argmax)
        except (ConjugationError, ConvexityError) as exc:
            message += f"; recovery failed: {exc}"
    if w is not None:
        res = verify_hamilton(prob, w)
        shift = mean_shift_check(v, w, tol=cfg.mean_shift_tol)
        c = shift.c
        trivial = bool(np.max(np.abs(w.values)) < cfg.trivial_tol)
        if trivial and converged:
            message += " (trivial solution: |w|_inf below threshold)"
    if ev is None:
        phi, gnorm = float("nan"), float("nan")
    else:
        phi, gnorm = ev.value, _sup(ev.grad)
    return SolveReport(
        v=v, w=w, c=c, converged=converged, iterations=iterations, final_grad_norm=gnorm, final_phi=phi,
        hamilton_residual_norm=None if res is None else res.l2,
        hamilton_residual_sup=None if res is None else res.sup,
        mean_shift=shift, trivial=trivial, message=message, history=history,
    )


def recover_w(prob: ActionProblem, v: PeriodicField, guess=None) -> PeriodicField:
    """w(t) = grad H*(t, v*(t)) node by node."""
    vstar = apply_K(v, prob.scheme)
    conj = conjugate_batch(prob.H, prob.grid.flat_coordinates, vstar.flat, guess=guess, tol=prob.conj_tol)
    return v.with_values(conj.argmax)


def mean_shift_check(v: PeriodicField, w: PeriodicField, tol: float = 1e-8) -> MeanShiftReport:
    """Check v = c - w with c = mean(w), the sign that follows from v = -u."""
    c = mean(w)
    dev = np.abs(v.values - (c - w.values)).max(axis=-1)
    worst = np.unravel_index(int(np.argmax(dev)), dev.shape)
    max_dev = float(dev[worst])
    return MeanShiftReport(ok=max_dev <= tol, max_deviation=max_dev, worst_node=tuple(int(i) for i in worst),
                           c=c, tol=tol)


def hamilton_residual_field(prob: ActionProblem, w: PeriodicField) -> PeriodicField:
    """R(w) = (delta x J) dw/dt + grad H(t, w)."""
    Kw = apply_K(w, prob.scheme)
    return Kw.with_values(Kw.flat + prob.H.grad(prob.grid.flat_coordinates, w.flat))


def verify_hamilton(prob: ActionProblem, w: PeriodicField) -> HamiltonResidual:
    R = hamilton_residual_field(prob, w).flat
    l2 = float(np.sqrt(np.sum(R * R) * prob.cell_volume))
    return HamiltonResidual(l2=l2, sup=float(np.max(np.abs(R))))
