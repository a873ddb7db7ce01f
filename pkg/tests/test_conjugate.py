import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualaction.conjugate import (ConjugationError, ConvexityError, Growth, HamiltonianModel, check_gradient_bound,
                                  check_growth_bounds, conjugate, conjugate_batch, grad_conjugate)
from dualaction.hamiltonians import (conjugate_model, quadratic, quartic_radial, saturating_radial, time_scaled)


def _spd(rng, d):
    Q = rng.standard_normal((d, d))
    return Q @ Q.T + d * np.eye(d)


def test_quadratic_full_matrix(rng):
    A = _spd(rng, 4)
    b = rng.standard_normal(4)
    H = quadratic(1, 3, A, b)
    v = rng.standard_normal((200, 4)) * 3
    res = conjugate_batch(H, np.zeros((200, 3)), v)
    # H*(v) = 1/2 (v - b)^T A^{-1} (v - b), argmax A^{-1}(v - b)
    sol = np.linalg.solve(A, (v - b).T).T
    assert np.allclose(res.argmax, sol, atol=1e-10)
    assert np.allclose(res.value, 0.5 * np.sum((v - b) * sol, axis=1), atol=1e-10)
    assert np.all(res.iterations <= 2)


def test_single_point_interface():
    H = quadratic(1, 1, [2.0, 8.0])
    r = conjugate(H, 0.0, [1.0, 1.0])
    assert isinstance(r.value, float)
    assert r.value == pytest.approx(0.25 + 1 / 16)
    assert np.allclose(grad_conjugate(H, 0.0, [2.0, 4.0]), [1.0, 0.5])
    assert grad_conjugate(H, np.zeros((3, 1)), np.ones((3, 2))).shape == (3, 2)


def _quartic_oracle(a, b, v):
    # grad H(u) = (a |u|^2 + b) u = v gives a r^3 + b r = |v| along v/|v|
    s = np.linalg.norm(v)
    roots = np.roots([a, 0.0, b, -s])
    r = float(np.max(roots[np.abs(roots.imag) < 1e-9].real))
    return r * s - (0.25 * a * r**4 + 0.5 * b * r**2), r * v / s


def test_quartic_radial_against_cubic_roots(rng):
    a, b = 0.7, 1.3
    H = quartic_radial(1, 2, a, b)
    v = rng.standard_normal((50, 3)) * 4
    res = conjugate_batch(H, np.zeros((50, 2)), v)
    for k in range(50):
        val, arg = _quartic_oracle(a, b, v[k])
        assert res.value[k] == pytest.approx(val, abs=1e-10, rel=1e-10)
        assert np.allclose(res.argmax[k], arg, atol=1e-10)


def test_time_dependence_enters_conjugate():
    H = time_scaled(quadratic(1, 1), "one_plus_t1")
    t = np.array([[0.0], [1.0], [3.0]])
    v = np.ones((3, 2))
    # (s/2)|u|^2 has conjugate |v|^2 / (2 s)
    assert np.allclose(conjugate_batch(H, t, v).value, 1.0 / (1.0 + t[:, 0]))


@pytest.mark.parametrize("model", [quadratic(1, 2, [1.0, 2.0, 4.0]), quartic_radial(1, 2, 1.0, 0.5),
                                   saturating_radial(1, 2, 0.3, 0.5)])
def test_inverse_identity_and_fenchel_young(rng, model):
    u = rng.standard_normal((300, 3)) * 2
    t = np.zeros((300, 2))
    back = grad_conjugate(model, t, model.grad(t, u))
    assert np.max(np.abs(back - u)) <= 1e-8
    v = rng.standard_normal((300, 3)) * 2
    res = conjugate_batch(model, t, v)
    assert np.max(np.abs(res.fenchel_young_gap(model, t, v))) < 1e-10
    # Fenchel-Young inequality at arbitrary u
    assert np.all(model.value(t, u) + res.value - np.sum(u * v, axis=1) >= -1e-12)


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(0, 1), seed=st.integers(0, 2**31))
def test_conjugate_convexity(lam, seed):
    rng = np.random.default_rng(seed)
    H = quartic_radial(2, 1, 1.0, 1.0)
    v1, v2 = rng.standard_normal((2, 1, 4)) * 3
    f = lambda v: conjugate_batch(H, np.zeros((1, 1)), v).value[0]
    assert f(lam * v1 + (1 - lam) * v2) <= lam * f(v1) + (1 - lam) * f(v2) + 1e-10


def test_biconjugate_recovers_H(rng):
    H = quartic_radial(1, 1, 0.5, 1.0)
    Hs = conjugate_model(H)
    u = rng.standard_normal((20, 2))
    t = np.zeros((20, 1))
    Hss = conjugate_batch(Hs, t, u, tol=1e-9)
    assert np.allclose(Hss.value, H.value(t, u), atol=1e-8)
    assert np.allclose(Hss.argmax, H.grad(t, u), atol=1e-7)


def _double_well():
    # H = |u|^4/4 - |u|^2/2: Hessian indefinite near the origin
    def value(t, u):
        r2 = np.sum(u * u, -1)
        return 0.25 * r2**2 - 0.5 * r2

    def grad(t, u):
        return (np.sum(u * u, -1, keepdims=True) - 1) * u

    def hess(t, u):
        r2 = np.sum(u * u, -1)
        return (r2 - 1)[:, None, None] * np.eye(2) + 2 * u[:, :, None] * u[:, None, :]

    return HamiltonianModel(1, 1, value, grad, hess, name="double_well")


def test_nonconvex_rejected_with_point():
    H = _double_well()
    v = np.array([[3.0, 0.0], [0.01, 0.0]])
    with pytest.raises(ConvexityError, match="convexity violation") as exc:
        conjugate_batch(H, np.zeros((2, 1)), v, guess=np.array([[2.0, 0.0], [0.1, 0.0]]))
    assert np.allclose(exc.value.u, [0.1, 0.0])


def test_iteration_cap_reports_best_residual():
    H = quartic_radial(1, 1, 1.0, 1e-3)
    with pytest.raises(ConjugationError, match="no convergence") as exc:
        conjugate_batch(H, np.zeros((1, 1)), np.array([[1e6, 0.0]]), max_iter=3)
    assert exc.value.iterations == 3 and exc.value.residual > 0


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        conjugate_batch(quadratic(1, 1), np.zeros((1, 1)), np.zeros((1, 3)))


# ----------------------------------------------------------------- bounds

def test_growth_bounds_hold_and_falsify(rng):
    H = quadratic(1, 2, [1.0, 2.0, 4.0])
    v = rng.uniform(-2, 2, (1000, 3))
    t = np.zeros((1000, 2))
    good = check_growth_bounds(H, t, v, Growth(1.0, 4.0))
    assert good.ok and good.checked == 1000
    assert good.details["quadratic_max_identity_max_error"] < 1e-8
    bad = check_growth_bounds(H, t, v, Growth(2.0, 4.0))
    assert not bad.ok
    assert {w["check"] for w in bad.violations} >= {"conjugate_bounds", "growth_hypothesis"}
    w = bad.violations[0]
    assert set(w) == {"check", "t", "point", "lower", "value", "upper"}


def test_growth_bounds_with_time_dependent_offsets(rng):
    s = lambda t: 1.0 + 0.5 * np.sin(t[..., 0])
    H = time_scaled(quadratic(1, 1, b=[0.3, -0.2]), s)
    # |b.u| <= eps |u|^2 / 2 + |b|^2 / (2 eps) with eps = 1/2 and 1/2 <= s <= 3/2 gives
    # delta = 1/4, alpha = 9/4, beta = gamma = 3/2 * |b|^2 = 0.195
    g = Growth(0.25, 2.25, beta=lambda t: 0.195, gamma=lambda t: np.full(t.shape[:-1], 0.195))
    v = rng.uniform(-3, 3, (500, 2))
    t = rng.uniform(0, 2 * np.pi, (500, 1))
    assert check_growth_bounds(H, t, v, g).ok


def test_growth_requires_metadata():
    with pytest.raises(ValueError, match="growth"):
        check_growth_bounds(quadratic(1, 1), np.zeros((1, 1)), np.ones((1, 2)))
    with pytest.raises(ValueError, match="delta > 0"):
        Growth(0.0, 1.0)


def test_gradient_bound_hold_and_falsify(rng):
    H = quadratic(1, 2, [1.0, 2.0, 4.0], growth=Growth(1.0, 4.0))
    v = rng.uniform(-2, 2, (1000, 3))
    t = np.zeros((1000, 2))
    good = check_gradient_bound(H, t, v, 1.0, 0.0)
    assert good.ok and good.details["max_ratio_to_bound"] <= 1.0 + 1e-9
    assert good.details["fitted_C1"] <= 1.0 + 1e-9
    bad = check_gradient_bound(H, t, v, 0.5, 0.0)
    assert not bad.ok and bad.details["violation_count"] > 0
