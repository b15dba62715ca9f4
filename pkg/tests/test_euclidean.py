import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradflow.errors import InputError, NumericalError, PreconditionError
from gradflow.euclidean import (
    CATALOG,
    EuclideanSpace,
    QuadraticFunctional,
    dist,
    double_well,
    exact_flow_quadratic,
    jacobi_eigh,
    make_functional,
    ode_oracle,
    resolvent_quadratic,
    smoothed_abs,
)


def test_dist_examples():
    assert dist([0, 0], [3, 4]) == 5.0
    assert dist([1.5, -2], [1.5, -2]) == 0.0
    assert dist([1.0], [-2.0]) == 3.0
    with pytest.raises(InputError):
        dist([1.0, 2.0], [1.0])
    with pytest.raises(InputError):
        dist([np.nan], [1.0])


def test_exact_flow_examples():
    q = QuadraticFunctional([[1.0]], [0.0])
    assert exact_flow_quadratic(q, [1.0], 1.0)[0] == pytest.approx(math.exp(-1), rel=1e-14)
    q = QuadraticFunctional([[0.0]], [1.0])
    assert exact_flow_quadratic(q, [0.0], 2.0)[0] == pytest.approx(-2.0, rel=1e-14)
    q = QuadraticFunctional(np.diag([1.0, 2.0]), np.zeros(2))
    u = exact_flow_quadratic(q, [1.0, 1.0], 0.5)
    assert np.allclose(u, [math.exp(-0.5), math.exp(-1.0)], rtol=1e-14)
    ref = ode_oracle(q.gradient, [1.0, 1.0], 0.5, 1e-5)
    assert np.allclose(u, ref, atol=1e-12)


def test_exact_flow_kernel_direction_affine():
    # A has a zero eigenvalue along (1,-1)/sqrt2; b has a component there
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    b = np.array([1.0, -1.0])
    q = QuadraticFunctional(A, b)
    u0 = np.array([0.3, 0.1])
    for t in (0.5, 2.0, 5.0):
        assert np.allclose(exact_flow_quadratic(q, u0, t), ode_oracle(q.gradient, u0, t, 1e-3), atol=1e-10)


def test_exact_vs_ode_oracle():
    rng = np.random.default_rng(0)
    B = rng.normal(size=(3, 3))
    q = QuadraticFunctional(B @ B.T + 0.1 * np.eye(3), rng.normal(size=3))
    u0 = rng.normal(size=3)
    for t in (0.0, 1.0, 2.5, 5.0):
        assert np.allclose(exact_flow_quadratic(q, u0, t), ode_oracle(q.gradient, u0, t, 1e-4), atol=1e-8)


def test_ode_oracle_examples():
    q = QuadraticFunctional([[1.0]], [0.0])
    assert ode_oracle(q.gradient, [1.0], 1.0, 1e-3)[0] == pytest.approx(math.exp(-1), abs=1e-10)
    assert ode_oracle(q.gradient, [1.0], 0.0, 1e-3)[0] == 1.0
    dw = double_well(1)
    u = ode_oracle(dw.gradient, [2.0], 20.0, 1e-2)
    assert abs(dw.gradient(u)[0]) < 1e-6 and u[0] == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(NumericalError):
        ode_oracle(lambda x: np.array([np.inf]), [1.0], 1.0, 0.1)


def test_resolvent_examples():
    assert resolvent_quadratic(QuadraticFunctional([[1.0]], [0.0]), 0.5, [1.0])[0] == pytest.approx(2 / 3, rel=1e-15)
    q = QuadraticFunctional(np.diag([1.0, 2.0]), np.zeros(2))
    assert np.allclose(resolvent_quadratic(q, 1.0, [2.0, 3.0]), [1.0, 1.0], rtol=1e-15)
    v = np.array([0.4, -1.0])
    for tau in (1e-3, 1e-4, 1e-5):
        assert dist(resolvent_quadratic(q, tau, v), v) <= 3 * tau * np.linalg.norm(q.gradient(v))
    with pytest.raises(PreconditionError, match="-lambda"):
        resolvent_quadratic(QuadraticFunctional([[-1.0]], [0.0]), 1.0, [1.0])


def test_resolvent_nonexpansive_on_convex():
    rng = np.random.default_rng(4)
    for _ in range(50):
        B = rng.normal(size=(3, 3))
        q = QuadraticFunctional(B @ B.T, rng.normal(size=3))
        x, y = rng.normal(size=3), rng.normal(size=3)
        tau = rng.uniform(0.01, 3)
        assert dist(resolvent_quadratic(q, tau, x), resolvent_quadratic(q, tau, y)) <= dist(x, y) * (1 + 1e-12)


def test_jacobi_matches_numpy():
    rng = np.random.default_rng(5)
    for n in (1, 2, 5, 16):
        B = rng.normal(size=(n, n))
        A = B + B.T
        w, V = jacobi_eigh(A)
        assert np.allclose(w, np.linalg.eigvalsh(A), atol=1e-10)
        assert np.allclose(V @ np.diag(w) @ V.T, A, atol=1e-10)
        assert np.allclose(V.T @ V, np.eye(n), atol=1e-12)


def test_quadratic_lambda_is_min_eig():
    q = QuadraticFunctional(np.array([[2.0, 1.0], [1.0, 2.0]]), np.zeros(2))
    assert q.lam == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(q.minimizer(), 0.0)
    assert QuadraticFunctional(np.zeros((1, 1)), [1.0]).minimizer() is None


CATALOG_CASES = [
    ("quadratic", {"A": [[1.0, 0.2], [0.2, 0.5]], "b": [0.1, -0.3]}),
    ("double_well", {"dim": 2}),
    ("smoothed_abs", {"eps": 0.2, "dim": 2}),
    ("constant", {"c": 1.5, "dim": 2}),
]


@pytest.mark.parametrize("name,params", CATALOG_CASES)
def test_catalog_lambda_monotone_and_convex(name, params):
    f = make_functional(name, **params)
    sp = EuclideanSpace(2)
    rng = np.random.default_rng(6)
    for _ in range(200):
        x, y = rng.normal(size=2) * 2, rng.normal(size=2) * 2
        d2 = float(np.dot(x - y, x - y))
        mono = float(np.dot(f.gradient(x) - f.gradient(y), x - y))
        assert mono >= f.lam * d2 - 1e-10 * max(1.0, d2)
        for s in (0.1, 0.25, 0.5, 0.9):
            lhs = f.value(sp.combine(x, y, s))
            rhs = (1 - s) * f.value(x) + s * f.value(y) - 0.5 * f.lam * s * (1 - s) * d2
            assert lhs <= rhs + 1e-10 * max(1.0, abs(rhs))


def test_catalog_covers_all_branches():
    lams = {make_functional(n, **p).lam for n, p in CATALOG_CASES}
    assert any(l > 0 for l in lams) and 0.0 in lams and -1.0 in lams
    assert set(CATALOG) == {n for n, _ in CATALOG_CASES}
    with pytest.raises(InputError):
        make_functional("nope")


def test_smoothed_abs_hessian_matches_fd():
    f = smoothed_abs(0.3, 2)
    x = np.array([0.2, -0.7])
    h = 1e-6
    H = np.column_stack([(f.gradient(x + h * e) - f.gradient(x - h * e)) / (2 * h) for e in np.eye(2)])
    assert np.allclose(H, f.hessian(x), atol=1e-6)


@settings(max_examples=40)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_dist_symmetric_and_triangle(a, b):
    c = np.zeros(3)
    assert dist(a, b) == dist(b, a)
    assert dist(a, b) <= dist(a, c) + dist(c, b) + 1e-12 * (1 + dist(a, b))
