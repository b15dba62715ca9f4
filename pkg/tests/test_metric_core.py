import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradflow.errors import DomainError, InputError, RangeError, UnsupportedError
from gradflow.euclidean import EuclideanSpace, double_well, quadratic, smoothed_abs
from gradflow.metric_core import (
    PIECEWISE_CONSTANT,
    PIECEWISE_LINEAR,
    DiscreteTrajectory,
    FunctionalDescriptor,
    SampledCurve,
    TimeGrid,
    e_lambda,
    estimate_metric_derivative,
    estimate_slope,
    interpolate,
    metric_axiom_violation,
    quadratic_lower_bound_violation,
)
from gradflow.wasserstein1d import WassersteinSpace, gaussian, uniform

R1 = EuclideanSpace(1)


def test_e_lambda_examples():
    assert e_lambda(0.0, 3.5) == 3.5
    assert e_lambda(1.0, 0.0) == 0.0
    assert e_lambda(1.0, 1.0) == pytest.approx(math.e - 1.0, abs=1e-9)
    assert e_lambda(-2.0, 1.0) == pytest.approx((1 - math.exp(-2.0)) / 2.0, rel=1e-15)


def test_e_lambda_negative_time():
    with pytest.raises(DomainError):
        e_lambda(1.0, -0.1)


def test_e_lambda_continuous_at_zero():
    t = np.linspace(0.0, 5.0, 11)
    for lam in (1e-12, -1e-12, 1e-9, -1e-9, 1e-7, -1e-7):
        vals = np.array([e_lambda(lam, s) for s in t])
        assert np.max(np.abs(vals - t)) <= 10 * abs(lam) * 25


@given(st.floats(-5, 5), st.floats(0, 3), st.floats(0, 3))
def test_e_lambda_monotone_in_t(lam, a, b):
    lo, hi = min(a, b), max(a, b)
    assert e_lambda(lam, lo) <= e_lambda(lam, hi)


def test_time_grid():
    g = TimeGrid(0.25, 4)
    assert g.t(0) == 0.0 and g.end == 1.0
    assert np.allclose(g.times, [0, 0.25, 0.5, 0.75, 1.0])
    assert TimeGrid.from_horizon(0.1, 1.0).n_steps == 10
    with pytest.raises(InputError):
        TimeGrid(0.0, 3)
    with pytest.raises(InputError):
        TimeGrid.from_horizon(0.3, 1.0)


def _traj(mode):
    pts = [np.array([1.0]), np.array([0.5])]
    return DiscreteTrajectory(TimeGrid(1.0, 1), pts, mode, R1)


def test_interpolate_examples():
    assert interpolate(_traj(PIECEWISE_CONSTANT), 0.3)[0] == 0.5
    assert interpolate(_traj(PIECEWISE_LINEAR), 0.5)[0] == 0.75
    for mode in (PIECEWISE_CONSTANT, PIECEWISE_LINEAR):
        assert interpolate(_traj(mode), 0.0)[0] == 1.0


def test_interpolate_nodes_exact():
    pts = [np.array([x]) for x in np.random.default_rng(1).normal(size=6)]
    for mode in (PIECEWISE_CONSTANT, PIECEWISE_LINEAR):
        tr = DiscreteTrajectory(TimeGrid(0.1, 5), pts, mode, R1)
        for n in range(6):
            assert interpolate(tr, tr.grid.t(n))[0] == pts[n][0]


def test_interpolate_errors():
    with pytest.raises(RangeError):
        interpolate(_traj(PIECEWISE_CONSTANT), 1.5)
    with pytest.raises(RangeError):
        interpolate(_traj(PIECEWISE_CONSTANT), -0.1)
    tr = DiscreteTrajectory(TimeGrid(1.0, 1), [1.0, 0.5], PIECEWISE_LINEAR, space=None)
    with pytest.raises(UnsupportedError):
        interpolate(tr, 0.5)


def test_trajectory_length_checked():
    with pytest.raises(InputError):
        DiscreteTrajectory(TimeGrid(1.0, 2), [1.0, 2.0])


def test_sampled_curve_strictly_increasing():
    with pytest.raises(InputError):
        SampledCurve([0.0, 0.0], [1, 2])
    with pytest.raises(InputError):
        SampledCurve([0.0, 1.0], [1])


def test_metric_derivative_examples():
    h = 1e-3
    t = np.arange(5) * h
    c = SampledCurve(t, [np.array([math.exp(-s)]) for s in t])
    assert estimate_metric_derivative(c, R1)[1] == pytest.approx(math.exp(-h), abs=1e-5)
    c = SampledCurve(t, [np.array([2.0])] * 5)
    assert np.all(estimate_metric_derivative(c, R1) == 0.0)
    h = 1e-4
    t = np.arange(6) * h
    c = SampledCurve(t, [np.array([s, 2 * s]) for s in t])
    assert np.allclose(estimate_metric_derivative(c, EuclideanSpace(2)), math.sqrt(5), atol=1e-6)
    with pytest.raises(InputError):
        estimate_metric_derivative(SampledCurve([0.0], [1.0]), R1)


def _probe(f, v, radii=(1e-2, 1e-3, 1e-4)):
    return estimate_slope(f, np.atleast_1d(v), radii, R1.sampler(seed=0, f=f), space=R1)


def test_slope_examples():
    assert _probe(quadratic([[1.0]]), 2.0).value == pytest.approx(2.0, rel=1e-3)
    const = FunctionalDescriptor(value=lambda x: 3.0, lam=0.0)
    assert _probe(const, 0.7).value == 0.0
    # a kink pointing up is a minimum (slope 0); pointing down it has slope 1
    absf = FunctionalDescriptor(value=lambda x: float(abs(x[0])), lam=0.0)
    assert _probe(absf, 0.0).value == 0.0
    negabs = FunctionalDescriptor(value=lambda x: -float(abs(x[0])), lam=0.0)
    assert _probe(negabs, 0.0).value == pytest.approx(1.0, abs=1e-12)


def test_slope_outside_domain_is_inf():
    f = FunctionalDescriptor(value=lambda x: math.inf if x[0] < 0 else float(x[0]), lam=0.0)
    est = _probe(f, -1.0)
    assert est.value == math.inf


def test_slope_radii_validated():
    f = quadratic([[1.0]])
    with pytest.raises(InputError):
        _probe(f, 1.0, radii=(1e-3, 1e-2))
    with pytest.raises(InputError):
        _probe(f, 1.0, radii=())


def test_slope_converges_to_gradient_norm():
    sp = EuclideanSpace(3)
    rng = np.random.default_rng(3)
    for f in (quadratic(np.diag([1.0, 2.0, 3.0]), [0.5, 0.0, -1.0]), smoothed_abs(0.3, 3), double_well(3)):
        for _ in range(5):
            v = rng.normal(size=3)
            est = estimate_slope(f, v, [1e-4], sp.sampler(seed=0, f=f), space=sp)
            exact = f.slope_exact(v)
            assert 0.99 <= est.value / exact <= 1.01
            assert est.value <= exact * (1 + 1e-3)


def test_metric_axioms_on_carriers():
    rng = np.random.default_rng(0)
    pts = [rng.normal(size=3) for _ in range(20)]
    assert metric_axiom_violation(EuclideanSpace(3), pts, rng) <= 1e-12
    W = WassersteinSpace(50)
    meas = [gaussian(rng.normal(), rng.uniform(0.1, 2), 50) for _ in range(10)] + [uniform(-1, 2, 50)]
    assert metric_axiom_violation(W, meas, rng) <= 1e-12


def test_quadratic_lower_bound():
    f = double_well(1)
    pts = [np.array([x]) for x in np.linspace(-5, 5, 101)]
    assert quadratic_lower_bound_violation(f, R1, pts, 0.0, 0.0, np.zeros(1)) <= 0.0


@settings(max_examples=50)
@given(st.floats(0.01, 1.0), st.integers(1, 20), st.floats(0.0, 1.0))
def test_constant_interpolant_cell_rule(tau, n, frac):
    pts = list(range(n + 1))
    tr = DiscreteTrajectory(TimeGrid(tau, n), pts)
    t = frac * tau * n
    k = interpolate(tr, t)
    node = round(t / tau)
    if abs(t - node * tau) <= 1e-12 * max(1.0, t):
        assert k == node
    else:
        assert (k - 1) * tau < t * (1 + 1e-12) and t <= k * tau * (1 + 1e-12) + 1e-15
