"""Discrete Hamiltonian action Psi and dual action Phi on a periodic grid.

Both are rectangle-rule sums over the nodes with weight equal to the cell
volume.  With K = (delta x J) D, the v* map,

    Psi(u) = sum [ -1/2 G(K u, u) - H(t, u) ] * dV
    Phi(v) = sum [  1/2 G(K v, v) + H*(t, K v) ] * dV

and the gradient of Phi with respect to the nodal values is exact for the
discrete sum (no finite differences involved).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .conjugate import DEFAULT_TOL, HamiltonianModel, conjugate_batch
from .core import (MultiTimeGrid, PeriodicField, Scheme, apply_K, apply_K_adjoint,
                   metric_inner)

__all__ = ["ActionProblem", "PhiEvaluation", "eval_psi", "psi_dual_form", "eval_phi", "phi_and_grad",
           "grad_phi"]


@dataclass(frozen=True)
class ActionProblem:
    grid: MultiTimeGrid
    H: HamiltonianModel
    scheme: Scheme = Scheme.FOURIER
    conj_tol: float = DEFAULT_TOL

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.coerce(self.scheme))
        if self.H.p != self.grid.p:
            raise ValueError(f"Hamiltonian has p={self.H.p} but the grid has p={self.grid.p}")

    @property
    def n(self) -> int:
        return self.H.n

    @property
    def cell_volume(self) -> float:
        return self.grid.cell_volume

    def _check(self, field: PeriodicField):
        if field.grid != self.grid or field.n != self.n:
            raise ValueError("field does not live on this problem's grid / dimension")


@dataclass
class PhiEvaluation:
    value: float
    grad: PeriodicField
    vstar: PeriodicField
    argmax: np.ndarray  # grad H*(t, v*) per node, flat (M, n+np)


def eval_psi(prob: ActionProblem, u: PeriodicField) -> float:
    prob._check(u)
    Ku = apply_K(u, prob.scheme)
    t = prob.grid.flat_coordinates
    density = -0.5 * metric_inner(Ku.flat, u.flat) - prob.H.value(t, u.flat)
    return float(np.sum(density) * prob.cell_volume)


def psi_dual_form(prob: ActionProblem, u: PeriodicField) -> float:
    """Psi(u) rewritten in terms of v = -u: sum [1/2 G(Kv, v) + G(Kv, u) - H(t, u)] dV."""
    prob._check(u)
    v = -u
    Kv = apply_K(v, prob.scheme)
    t = prob.grid.flat_coordinates
    density = 0.5 * metric_inner(Kv.flat, v.flat) + metric_inner(Kv.flat, u.flat) - prob.H.value(t, u.flat)
    return float(np.sum(density) * prob.cell_volume)


def phi_and_grad(prob: ActionProblem, v: PeriodicField, guess: Optional[np.ndarray] = None,
                 need_grad: bool = True) -> PhiEvaluation:
    """Value of Phi and its nodal gradient from a single conjugation sweep.

    ``guess`` warm-starts the node-wise Newton solves (e.g. with the argmax
    of a previous evaluation).  Conjugation errors carry the node time.
    """
    prob._check(v)
    vstar = apply_K(v, prob.scheme)
    t = prob.grid.flat_coordinates
    conj = conjugate_batch(prob.H, t, vstar.flat, guess=guess, tol=prob.conj_tol)
    density = 0.5 * metric_inner(vstar.flat, v.flat) + conj.value
    value = float(np.sum(density) * prob.cell_volume)
    grad = None
    if need_grad:
        w = v.with_values(conj.argmax)
        # bilinear part: 1/2 K v + 1/2 K^T v ; conjugate part: K^T grad H*(v*)
        half = apply_K_adjoint(0.5 * v + w, prob.scheme)
        grad = (0.5 * vstar + half) * prob.cell_volume
    return PhiEvaluation(value=value, grad=grad, vstar=vstar, argmax=conj.argmax)


def eval_phi(prob: ActionProblem, v: PeriodicField, guess=None) -> float:
    return phi_and_grad(prob, v, guess=guess, need_grad=False).value


def grad_phi(prob: ActionProblem, v: PeriodicField, guess=None) -> PeriodicField:
    return phi_and_grad(prob, v, guess=guess).grad
