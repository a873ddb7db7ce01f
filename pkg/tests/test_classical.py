import numpy as np
import pytest

from dualaction.action import ActionProblem
from dualaction.classical import (DegenerateLagrangianError, LagrangianModel, TrajectoryField, divergence_check,
                                  energy_moment_tensor, euler_lagrange_residual, first_integral_check, free_field,
                                  hamilton_equivalence_check, hamiltonian_along, hamiltonian_from_lagrangian,
                                  harmonic_oscillator, helmholtz, legendre_L_to_H, modulated_helmholtz, phase_field,
                                  quartic_field, velocities_from_momenta)
from dualaction.conjugate import ConvexityError, conjugate_batch
from dualaction.core import MultiTimeGrid, derivative_array, partial
from dualaction.solver import verify_hamilton

from conftest import HELMHOLTZ_T, TWO_PI


def _fd4(f, u, j, h=1e-3):
    e = np.zeros(u.shape[1])
    e[j] = h
    return (-f(u + 2 * e) + 8 * f(u + e) - 8 * f(u - e) + f(u - 2 * e)) / (12 * h)


def _standing(grid):
    t = grid.coordinates
    return TrajectoryField(grid, np.cos(t[..., 0] / np.sqrt(2)) * np.cos(t[..., 1] / np.sqrt(2)))


def test_oscillator_hamiltonian_closed_form(rng):
    L = harmonic_oscillator(1, omega=2.0)
    H = hamiltonian_from_lagrangian(L)
    u = rng.standard_normal((100, 2))
    t = np.zeros((100, 1))
    assert np.allclose(H.value(t, u), 0.5 * u[:, 1] ** 2 + 2.0 * u[:, 0] ** 2)
    assert np.allclose(H.hess(t, u), np.diag([4.0, 1.0]), atol=1e-7)


def test_quartic_legendre_inversion_against_cubic_roots(rng):
    eps = 0.5
    L = quartic_field(1, 2, eps)
    P = rng.standard_normal((30, 1, 2)) * 3
    xd = velocities_from_momenta(L, np.zeros((30, 2)), np.zeros((30, 1)), P)
    for m in range(30):
        for a in range(2):
            roots = np.roots([eps, 0.0, 1.0, -P[m, 0, a]])
            real = roots[np.abs(roots.imag) < 1e-9].real
            assert xd[m, 0, a] == pytest.approx(real[0], abs=1e-12)


@pytest.mark.parametrize("L", [helmholtz(2, 2), modulated_helmholtz(1, 2), quartic_field(1, 2), harmonic_oscillator(2)])
def test_hamilton_partials_from_lagrangian(rng, L):
    # dH/dp_i^alpha = x^i_alpha and dH/dx^i = -dL/dx^i, with H differentiated numerically
    M = 1000
    t = rng.uniform(0, TWO_PI, (M, L.p))
    x = rng.standard_normal((M, L.n))
    xd = rng.standard_normal((M, L.n, L.p))
    P, _ = legendre_L_to_H(L, t, x, xd)
    H = hamiltonian_from_lagrangian(L)
    u = np.concatenate([x, P.reshape(M, -1)], axis=1)
    f = lambda uu: H.value(t, uu)
    dH = np.stack([_fd4(f, u, j) for j in range(u.shape[1])], axis=1)
    assert np.max(np.abs(dH[:, L.n:] - xd.reshape(M, -1))) <= 1e-8
    assert np.max(np.abs(dH[:, :L.n] + L.dx(t, x, xd))) <= 1e-8
    assert np.allclose(H.grad(t, u), dH, atol=1e-8)


def test_degenerate_lagrangian_rejected():
    L = LagrangianModel(1, 1, value=lambda t, x, xd: xd[:, 0, 0], dx=lambda t, x, xd: np.zeros_like(x),
                        dxd=lambda t, x, xd: np.ones_like(xd), dt=lambda t, x, xd: np.zeros((x.shape[0], 1)),
                        hess_xd=lambda t, x, xd: np.zeros((x.shape[0], 1, 1, 1, 1)), name="linear")
    with pytest.raises(DegenerateLagrangianError, match="singular"):
        velocities_from_momenta(L, np.zeros((1, 1)), np.zeros((1, 1)), np.full((1, 1, 1), 2.0))


def test_free_field_hamiltonian_not_strictly_convex():
    H = hamiltonian_from_lagrangian(free_field(1, 1))
    with pytest.raises(ConvexityError):
        conjugate_batch(H, np.zeros((1, 1)), np.array([[0.5, 0.5]]))


def test_trajectory_validation():
    g = MultiTimeGrid((1.0, 1.0), (4, 4))
    assert TrajectoryField(g, np.zeros((4, 4))).n == 1
    with pytest.raises(ValueError):
        TrajectoryField(g, np.zeros((4, 5, 1)))
    with pytest.raises(ValueError, match="does not match"):
        euler_lagrange_residual(helmholtz(2, 2), TrajectoryField(g, np.zeros((4, 4, 1))), "fourier")


def test_el_and_hamilton_second_order_on_helmholtz():
    L = helmholtz(1, 2)
    el, ham = [], []
    for N in (32, 64, 128):
        g = MultiTimeGrid((HELMHOLTZ_T, HELMHOLTZ_T), (N, N))
        rep = hamilton_equivalence_check(L, _standing(g), "central2")
        assert rep.ok
        el.append(rep.values["euler_lagrange_l2"])
        ham.append(rep.values["hamilton_l2"])
    for seq in (el, ham):
        rates = np.log2(np.array(seq[:-1]) / np.array(seq[1:]))
        assert np.all(np.abs(rates - 2.0) < 0.1)


def test_spectral_residuals_vanish():
    L = helmholtz(1, 2)
    g = MultiTimeGrid((HELMHOLTZ_T, HELMHOLTZ_T), (16, 16))
    traj = _standing(g)
    assert np.max(np.abs(euler_lagrange_residual(L, traj, "fourier"))) < 1e-12
    u = phase_field(L, traj, "fourier")
    prob = ActionProblem(g, hamiltonian_from_lagrangian(L), "fourier")
    assert verify_hamilton(prob, u).sup < 1e-12
    assert divergence_check(L, traj, "fourier", tol=1e-12).ok


def test_single_time_collapse_and_first_integral():
    L = harmonic_oscillator(1)
    g = MultiTimeGrid((TWO_PI,), (64,))
    t = g.coordinates[..., 0]
    traj = TrajectoryField(g, 1.5 * np.cos(t + 0.3))
    T = energy_moment_tensor(L, traj, "fourier")
    assert np.array_equal(T[..., 0, 0], hamiltonian_along(L, traj, "fourier"))
    fi = first_integral_check(L, traj, "fourier")
    assert fi.ok and fi.values["H0"] == pytest.approx(1.125)
    # a non-solution has a drifting H
    bad = TrajectoryField(g, np.cos(t) + 0.2 * np.cos(2 * t))
    assert not first_integral_check(L, bad, "fourier").ok


def test_first_integral_preconditions():
    g2 = MultiTimeGrid((1.0, 1.0), (4, 4))
    with pytest.raises(ValueError, match="p = 1"):
        first_integral_check(helmholtz(1, 2), TrajectoryField(g2, np.zeros((4, 4))), "fourier")
    g1 = MultiTimeGrid((1.0,), (4,))
    with pytest.raises(ValueError, match="depends explicitly"):
        first_integral_check(modulated_helmholtz(1, 1), TrajectoryField(g1, np.zeros(4)), "fourier")


def test_multi_time_hamiltonian_not_conserved():
    # along an exact Helmholtz solution the energy-moment tensor is divergence free but H is not constant
    L = helmholtz(1, 2)
    g = MultiTimeGrid((HELMHOLTZ_T, HELMHOLTZ_T), (32, 32))
    traj = _standing(g)
    assert divergence_check(L, traj, "fourier").values["divergence_sup"] < 1e-12
    H = hamiltonian_along(L, traj, "fourier")
    assert np.ptp(H) == pytest.approx(0.5, abs=1e-12)


def test_noether_identity_non_autonomous():
    # for any trajectory: div T_beta + dL/dt^beta = x_beta . (Euler-Lagrange residual)
    L = modulated_helmholtz(1, 2, 0.3)
    g = MultiTimeGrid((TWO_PI, TWO_PI), (32, 32))
    t = g.coordinates
    traj = TrajectoryField(g, 0.3 * np.cos(t[..., 0]) * np.sin(t[..., 1]) + 0.2 * np.sin(2 * t[..., 0]))
    T = energy_moment_tensor(L, traj, "fourier")
    div = sum(partial(T[..., a, :], g, a, "fourier") for a in range(2))
    tt = g.flat_coordinates
    xd = derivative_array(traj.x, g, "fourier")
    defect = div + L.dt(tt, traj.x.reshape(-1, 1), xd.reshape(-1, 1, 2)).reshape(32, 32, 2)
    el = euler_lagrange_residual(L, traj, "fourier")
    expected = np.einsum("...ib,...i->...b", xd, el)
    assert np.max(np.abs(expected)) > 1e-2
    assert np.allclose(defect, expected, atol=1e-11)
