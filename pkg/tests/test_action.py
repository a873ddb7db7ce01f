import numpy as np
import pytest

from dualaction.action import ActionProblem, eval_phi, eval_psi, grad_phi, phi_and_grad, psi_dual_form
from dualaction.core import MultiTimeGrid, PeriodicField, Scheme, apply_K, state_dim
from dualaction.hamiltonians import quadratic, quartic_radial, time_scaled

from conftest import TWO_PI


def _field(rng, grid, n, scale=0.5):
    return PeriodicField(grid, n, scale * rng.standard_normal((*grid.shape, state_dim(n, grid.p))))


def test_problem_validation():
    g = MultiTimeGrid((TWO_PI,), (8,))
    with pytest.raises(ValueError, match="p="):
        ActionProblem(g, quadratic(1, 2))
    prob = ActionProblem(g, quadratic(1, 1), "central2")
    assert prob.scheme is Scheme.CENTRAL2
    other = PeriodicField.zeros(MultiTimeGrid((TWO_PI,), (16,)), 1)
    with pytest.raises(ValueError, match="grid"):
        eval_phi(prob, other)


def test_phi_quadratic_closed_form(rng):
    # H = 1/2 u^T A u: Phi = sum [1/2 (Kv).v + 1/2 (Kv)^T A^{-1} (Kv)] dV
    A = np.diag([1.0, 3.0, 0.5])
    g = MultiTimeGrid((TWO_PI, 5.0), (8, 6))
    prob = ActionProblem(g, quadratic(1, 2, A), "central2")
    v = _field(rng, g, 1)
    Kv = apply_K(v, "central2").flat
    expected = np.sum(0.5 * np.sum(Kv * v.flat, 1) + 0.5 * np.sum(Kv * (Kv / np.diag(A)), 1)) * g.cell_volume
    assert eval_phi(prob, v) == pytest.approx(expected, rel=1e-12)


def test_psi_and_its_dual_form_agree(rng):
    g = MultiTimeGrid((TWO_PI, TWO_PI), (8, 8))
    prob = ActionProblem(g, quartic_radial(2, 2, 0.3, 1.0), "fourier")
    u = _field(rng, g, 2)
    assert psi_dual_form(prob, u) == pytest.approx(eval_psi(prob, u), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("scheme", ["central2", "fourier"])
def test_shift_invariance(rng, scheme):
    g = MultiTimeGrid((TWO_PI, TWO_PI), (16, 16))
    prob = ActionProblem(g, time_scaled(quartic_radial(1, 2, 0.5, 1.0), "two_plus_sin_t1"), scheme)
    v = _field(rng, g, 1)
    c = rng.standard_normal(3)
    assert abs(eval_phi(prob, v + c) - eval_phi(prob, v)) <= 1e-12 * max(1.0, abs(eval_phi(prob, v)))


def test_invariance_under_divergence_free_momenta(rng):
    g = MultiTimeGrid((TWO_PI, TWO_PI), (16, 16))
    prob = ActionProblem(g, quartic_radial(1, 2), "fourier")
    v = _field(rng, g, 1)
    t = g.coordinates
    mom = np.stack([-np.sin(t[..., 1]), np.sin(t[..., 0])], axis=-1)[..., None, :]
    kern = PeriodicField.from_blocks(g, np.zeros((*g.shape, 1)), mom)
    assert eval_phi(prob, v + kern) == pytest.approx(eval_phi(prob, v), abs=1e-12)


@pytest.mark.parametrize("scheme", ["central2", "fourier"])
@pytest.mark.parametrize("model", ["quadratic", "quartic"])
def test_gradient_matches_central_differences(rng, scheme, model):
    g = MultiTimeGrid((TWO_PI, 4.0), (8, 8))
    H = quadratic(1, 2, [1.0, 2.0, 4.0]) if model == "quadratic" else quartic_radial(1, 2, 0.5, 1.0)
    prob = ActionProblem(g, H, scheme, conj_tol=1e-13)
    v = _field(rng, g, 1, 0.3)
    grad = grad_phi(prob, v)
    eps = 1e-5
    for _ in range(5):
        d = _field(rng, g, 1, 1.0)
        fd = (eval_phi(prob, v + eps * d) - eval_phi(prob, v - eps * d)) / (2 * eps)
        ex = float(np.sum(grad.values * d.values))
        assert abs(fd - ex) <= 1e-5 * max(abs(ex), 1e-8)


def test_single_sweep_returns_consistent_parts(rng):
    g = MultiTimeGrid((TWO_PI,), (16,))
    prob = ActionProblem(g, quadratic(1, 1))
    v = _field(rng, g, 1)
    ev = phi_and_grad(prob, v)
    assert np.allclose(ev.vstar.values, apply_K(v, "fourier").values)
    assert np.allclose(ev.argmax, ev.vstar.flat)  # grad H* is the identity for |u|^2/2
    assert phi_and_grad(prob, v, need_grad=False).grad is None
    assert ev.value == pytest.approx(eval_phi(prob, v, guess=ev.argmax))


def test_exact_orbit_is_critical():
    # w = (cos t, -sin t) solves Hamilton for H = |u|^2/2; v = -w is then critical
    g = MultiTimeGrid((TWO_PI,), (32,))
    t = g.coordinates[..., 0]
    w = PeriodicField.from_blocks(g, np.cos(t)[:, None], -np.sin(t)[:, None, None])
    prob = ActionProblem(g, quadratic(1, 1))
    assert np.max(np.abs(grad_phi(prob, -w).values)) < 1e-13
    assert eval_phi(prob, -w) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("scheme", ["central2", "fourier"])
def test_gradient_orthogonal_to_constants(rng, scheme):
    g = MultiTimeGrid((TWO_PI, 3.0), (16, 12))
    prob = ActionProblem(g, time_scaled(quartic_radial(1, 2), "two_plus_cos_t1"), scheme)
    grad = grad_phi(prob, _field(rng, g, 1))
    assert np.all(np.abs(grad.flat.sum(axis=0)) <= 1e-12)
    assert grad_phi(ActionProblem(g, quadratic(1, 2), scheme), PeriodicField.zeros(g, 1)).values.max() == 0.0
