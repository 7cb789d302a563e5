import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quantum_bl.errors import NonFiniteObjective, NotPositiveDefinite
from quantum_bl.numerics import (MinimizeConfig, as_symmetric, central_difference, child_seed, cholesky,
                                 eigh, invert_spd, make_rng, minimize_local)


def random_spd(rng, n):
    a = rng.standard_normal((n, n))
    return a @ a.T + n * np.eye(n)


def test_rng_is_reproducible():
    assert np.array_equal(make_rng(5).random(4), make_rng(5).random(4))
    assert child_seed(1, 2) == child_seed(1, 2)
    assert child_seed(1, 2) != child_seed(1, 3)


def test_as_symmetric_rejects_asymmetric():
    with pytest.raises(ValueError):
        as_symmetric([[1.0, 2.0], [0.0, 1.0]])


def test_invert_spd_simple_cases():
    assert np.allclose(invert_spd(np.eye(3)), np.eye(3))
    assert np.allclose(invert_spd(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))


def test_invert_spd_residual_and_involution(rng):
    a = random_spd(rng, 8)
    inv = invert_spd(a)
    assert np.max(np.abs(a @ inv - np.eye(8))) <= 1e-9 * 8
    assert np.allclose(invert_spd(inv), a, rtol=1e-7)
    assert np.array_equal(inv, inv.T)


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        invert_spd([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NotPositiveDefinite):
        cholesky(np.zeros((2, 2)))


def test_eigh_known_cases():
    w, _ = eigh(np.eye(4))
    assert np.allclose(w, 1.0)
    w, v = eigh([[2.0, 1.0], [1.0, 2.0]])
    assert np.allclose(w, [1.0, 3.0], atol=1e-14)
    assert np.allclose(np.abs(v[:, 0]), [2 ** -0.5, 2 ** -0.5])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2 ** 31))
def test_eigh_reconstruction(n, seed):
    a = np.random.default_rng(seed).standard_normal((n, n))
    m = 0.5 * (a + a.T)
    w, v = eigh(m)
    scale = max(1.0, np.max(np.abs(m)))
    assert np.max(np.abs(v @ np.diag(w) @ v.T - m)) <= 1e-8 * scale
    assert np.max(np.abs(v.T @ v - np.eye(n))) <= 1e-9
    assert np.all(np.diff(w) >= 0)
    assert abs(w.sum() - np.trace(m)) <= 1e-9 * n * scale
    # numpy as an independent oracle for the spectrum
    assert np.allclose(w, np.linalg.eigvalsh(m), atol=1e-9 * scale)


def test_minimize_quadratics():
    res = minimize_local(lambda x: float(np.sum(x ** 2)), [1.0, 1.0])
    assert res.fun <= 1e-10
    res = minimize_local(lambda x: float((x[0] - 3.0) ** 2), [0.0])
    assert res.x[0] == pytest.approx(3.0, abs=1e-5)


@pytest.mark.parametrize("method", ["L-BFGS-B", "BFGS", "SLSQP"])
def test_minimize_rosenbrock(method):
    def rosen(x):
        return float(100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2)

    cfg = MinimizeConfig(ftol=1e-14, gtol=1e-9, maxiter=5000, method=method)
    res = minimize_local(rosen, [-1.2, 1.0], cfg)
    assert res.fun <= 1e-6
    assert res.history and res.history[-1] <= res.history[0]


def test_minimize_never_worse_than_start_and_deterministic():
    f = lambda x: float(np.cos(3 * x[0]) + 0.1 * x[0] ** 2)  # noqa: E731
    a = minimize_local(f, [0.4])
    b = minimize_local(f, [0.4])
    assert a.fun <= f(np.array([0.4]))
    assert np.array_equal(a.x, b.x)


def test_minimize_with_gradient_matches_fd():
    f = lambda x: float(np.sum((x - 1.5) ** 2))  # noqa: E731
    g = lambda x: 2 * (x - 1.5)  # noqa: E731
    assert np.allclose(minimize_local(f, np.zeros(3), grad=g).x, 1.5, atol=1e-6)
    assert np.allclose(central_difference(f, np.zeros(3), 1e-6), g(np.zeros(3)), atol=1e-6)


def test_minimize_non_finite():
    with pytest.raises(NonFiniteObjective):
        minimize_local(lambda x: float("nan"), [0.0])
