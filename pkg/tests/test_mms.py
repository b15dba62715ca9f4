import json
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from gradflow.errors import InputError, PreconditionError, SchemeError
from gradflow.euclidean import (
    EuclideanSpace,
    QuadraticFunctional,
    constant,
    double_well,
    exact_flow_quadratic,
    quadratic,
    resolvent_quadratic,
    smoothed_abs,
)
from gradflow.metric_core import PIECEWISE_CONSTANT, TimeGrid, interpolate
from gradflow.mms import (
    ProximalObjective,
    RelaxedSchemeParams,
    check_feasible,
    exact_trajectory,
    fit_slope,
    mms_run,
    mms_step,
    newton_inner_solver,
    read_trajectory_csv,
    run_manifest,
    sup_error,
    write_trajectory_csv,
)
from gradflow.wasserstein1d import (
    EnergySpec,
    WassersteinSpace,
    dirac,
    energy_descriptor,
    entropy,
    gaussian,
    moments,
    quadratic_potential,
    uniform,
    w2,
)

E1 = EuclideanSpace(1)


def ou(M):
    return energy_descriptor(EnergySpec(alpha1=1.0, alpha2=1.0, U=entropy(), V=quadratic_potential()))


def test_step_examples():
    U, cert = mms_step(ProximalObjective(0.5, np.array([1.0]), quadratic([[1.0]]), E1), RelaxedSchemeParams())
    assert U[0] == pytest.approx(2 / 3, rel=1e-15)
    assert cert.exact and cert.energy_decrease_ok and cert.inner_iters == 0
    a = np.array([0.3, -2.0])
    U, _ = mms_step(ProximalObjective(0.7, a, constant(4.0, dim=2), EuclideanSpace(2)), RelaxedSchemeParams())
    assert np.array_equal(U, a)


def test_objective_value_at_anchor():
    f = double_well()
    a = np.array([0.4])
    assert ProximalObjective(0.1, a, f, E1).value(a) == f.value(a)
    with pytest.raises(InputError):
        ProximalObjective(0.0, a, f, E1)


def test_entropy_step_variance():
    W, tau = WassersteinSpace(100), 1e-2
    f = energy_descriptor(EnergySpec(alpha1=1.0, U=entropy()))
    u0 = uniform(0, 1, 100)
    U, cert = mms_step(ProximalObjective(tau, u0, f, W), RelaxedSchemeParams())
    dvar = moments(U)[1] - moments(u0)[1]
    assert abs(dvar - 2 * tau) <= 0.2 * 2 * tau
    assert cert.energy_decrease_ok and cert.grad_norm_or_residual <= 1e-9


def test_run_examples():
    traj, certs = mms_run(E1, quadratic([[1.0]]), np.array([1.0]), TimeGrid(0.1, 10))
    assert traj.points[-1][0] == pytest.approx(1.1 ** -10, rel=1e-13)
    assert len(traj.points) == 11 and len(certs) == 10
    traj, _ = mms_run(E1, constant(2.0), np.array([5.0]), TimeGrid(0.3, 4))
    assert all(p[0] == 5.0 for p in traj.points)


def test_ou_mean():
    M, tau = 400, 1e-2
    traj, certs = mms_run(WassersteinSpace(M), ou(M), gaussian(2.0, 0.25, M), TimeGrid.from_horizon(tau, 2.0))
    assert moments(traj.points[-1])[0] == pytest.approx(2 * math.exp(-2), abs=0.02)
    assert all(c.energy_decrease_ok for c in certs)


def test_resolvent_consistency_and_newton_agreement():
    rng = np.random.default_rng(1)
    for _ in range(20):
        B = rng.normal(size=(3, 3))
        A = B @ B.T + 0.1 * np.eye(3)
        b = rng.normal(size=3)
        f, q = quadratic(A, b), QuadraticFunctional(A, b, 0.0)
        v, tau = rng.normal(size=3), rng.uniform(0.01, 1.0)
        obj = ProximalObjective(tau, v, f, EuclideanSpace(3))
        U, _ = mms_step(obj, RelaxedSchemeParams())
        assert np.max(np.abs(U - resolvent_quadratic(q, tau, v))) <= 1e-12
        Un, _ = mms_step(obj, RelaxedSchemeParams(inner_tol_abs=1e-12), newton_inner_solver)
        assert np.max(np.abs(Un - U)) <= 1e-10


@pytest.mark.parametrize("f,u0", [
    (quadratic(np.diag([1.0, 4.0]), [0.5, -1.0]), [3.0, 2.0]),
    (smoothed_abs(0.1, dim=2), [2.0, -0.5]),
    (quadratic(np.diag([0.0, 2.0])), [1.0, 1.0]),
])
def test_dissipation_and_step_ratio(f, u0):
    sp, tau = EuclideanSpace(2), 0.05
    traj, certs = mms_run(sp, f, np.array(u0), TimeGrid(tau, 60), RelaxedSchemeParams(inner_tol_abs=1e-12))
    pts = traj.points
    phis = [f.value(p) for p in pts]
    assert all(b <= a + 1e-12 for a, b in zip(phis, phis[1:]))
    diss = sum(sp.dist(a, b) ** 2 for a, b in zip(pts, pts[1:])) / (2 * tau)
    assert diss <= phis[0] - phis[-1] + 1e-12
    ratios = [sp.dist(a, b) / tau for a, b in zip(pts, pts[1:])]
    assert all(r2 <= r1 + 1e-9 for r1, r2 in zip(ratios, ratios[1:]))
    # linear and constant interpolants never drift further than tau times the first ratio
    lin = traj.with_mode("piecewise_linear")
    gap = max(sp.dist(interpolate(lin, t), interpolate(traj, t)) for t in np.linspace(0, traj.grid.end, 397))
    assert gap <= tau * ratios[0] + 1e-12


def test_a_priori_error_bound():
    # the decay factor only enters when it inflates the bound (alpha < 0); for alpha > 0 the
    # error right after t = 0 is about tau*|slope| whatever T is
    q = QuadraticFunctional(np.diag([1.0, 3.0]), np.array([0.2, -0.4]), 0.0)
    f, u0 = q.descriptor(), np.array([1.5, 1.0])
    slope0 = float(np.linalg.norm(q.gradient(u0)))
    sp = EuclideanSpace(2)
    for T in (2.0, 8.0):
        for tau in (0.2, 0.1, 0.05, 0.025):
            traj, _ = mms_run(sp, f, u0, TimeGrid.from_horizon(tau, T))
            alpha = math.log(1 + 2 * q.lam * tau) / (2 * tau)
            bound = math.exp(-min(alpha, 0.0) * T) * math.sqrt(T * tau) * slope0
            ts = np.linspace(0, T, int(400 * T) + 1)
            err = max(sp.dist(exact_flow_quadratic(q, u0, t), interpolate(traj, t)) for t in ts)
            assert err <= bound
            if T == 8.0:
                assert err > math.exp(-alpha * T) * math.sqrt(T * tau) * slope0


def test_a_priori_error_bound_negative_lambda():
    f, u0, T = double_well(), np.array([0.2]), 1.0
    ref, _ = mms_run(E1, f, u0, TimeGrid.from_horizon(1e-4, T), RelaxedSchemeParams(inner_tol_abs=1e-10))
    slope0 = abs(float(f.gradient(u0)[0]))
    for tau in (0.1, 0.05, 0.025):
        traj, _ = mms_run(E1, f, u0, TimeGrid.from_horizon(tau, T), RelaxedSchemeParams(inner_tol_abs=1e-13))
        alpha = math.log(1 - 2 * tau) / (2 * tau)
        bound = math.exp(-alpha * T) * math.sqrt(T * tau) * slope0
        err = max(E1.dist(interpolate(ref, t), interpolate(traj, t)) for t in np.linspace(0, T, 401))
        assert err <= bound


def test_optimal_rate_is_first_order():
    q = QuadraticFunctional(np.diag([1.0, 3.0]), np.zeros(2), 0.0)
    u0, taus = np.array([1.0, 1.0]), [0.1, 0.05, 0.025, 0.0125]
    errs = []
    for tau in taus:
        traj, _ = mms_run(EuclideanSpace(2), q.descriptor(), u0, TimeGrid.from_horizon(tau, 1.0))
        errs.append(sup_error(traj, lambda t: exact_flow_quadratic(q, u0, t)))
    assert 0.9 <= fit_slope(taus, errs) <= 1.1
    with pytest.raises(InputError):
        fit_slope([0.1], [0.2])


def test_feasibility_errors():
    check_feasible(0.5, -1.0)
    with pytest.raises(PreconditionError, match=r"1\+tau\*lambda"):
        check_feasible(1.0, -1.0)
    with pytest.raises(PreconditionError):
        mms_run(E1, double_well(), np.array([0.1]), TimeGrid(1.5, 3))
    check_feasible(0.1, 1.0, eta=5.9)
    with pytest.raises(PreconditionError, match="eta-lambda"):
        check_feasible(0.1, 1.0, eta=6.0)
    with pytest.raises(InputError):
        RelaxedSchemeParams(eta=-1.0)


def test_scheme_error_carries_partial_trajectory():
    calls = []

    def flaky(obj, start, params):
        calls.append(1)
        if len(calls) == 3:
            raise SchemeError("boom")
        return newton_inner_solver(obj, start, params)

    with pytest.raises(SchemeError) as info:
        mms_run(E1, double_well(), np.array([0.3]), TimeGrid(0.1, 10), inner=flaky)
    part = info.value.partial
    assert part.grid.n_steps == 2 and len(part.points) == 3
    with pytest.raises(SchemeError) as info:
        mms_run(E1, double_well(), np.array([2.0]), TimeGrid(0.1, 5),
                RelaxedSchemeParams(inner_max_iter=1, inner_tol_abs=0.0), newton_inner_solver)
    assert info.value.certificate is not None and info.value.partial.grid.n_steps == 0


def test_nonconvex_certificate_note():
    _, certs = mms_run(E1, double_well(), np.array([0.3]), TimeGrid(0.1, 3))
    assert all("necessary" in c.note for c in certs)


def test_relaxed_scheme_stop_rule_and_error():
    f, u0, tau, eta = double_well(), np.array([2.0]), 0.05, 2.0
    traj, certs = mms_run(E1, f, u0, TimeGrid(tau, 20), RelaxedSchemeParams(eta=eta, inner_tol_abs=0.0))
    for c, a, b in zip(certs, traj.points, traj.points[1:]):
        assert c.grad_norm_or_residual <= 0.5 * eta * E1.dist(a, b) and not c.exact
    ref, _ = mms_run(E1, f, u0, TimeGrid(tau, 20), RelaxedSchemeParams(inner_tol_abs=1e-13))
    assert E1.dist(traj.points[-1], ref.points[-1]) < 0.05


def test_inner_tolerance_perturbation():
    M, tau, tol = 60, 0.05, 1e-6
    f, W = ou(M), WassersteinSpace(M)
    obj = ProximalObjective(tau, gaussian(1.0, 0.3, M), f, W)
    a, _ = mms_step(obj, RelaxedSchemeParams(inner_tol_abs=tol))
    b, _ = mms_step(obj, RelaxedSchemeParams(inner_tol_abs=tol / 10))
    assert w2(a, b) <= 2 * tol * tau


def test_pure_potential_step_on_collapsed_measure():
    M, tau = 30, 0.2
    f = energy_descriptor(EnergySpec(alpha2=1.0, V=quadratic_potential()))
    U, _ = mms_step(ProximalObjective(tau, dirac(2.0, M), f, WassersteinSpace(M)), RelaxedSchemeParams())
    assert np.allclose(U.q, 2.0 / (1 + tau), atol=1e-12)
    g = gaussian(-1.0, 2.0, M)
    U, _ = mms_step(ProximalObjective(tau, g, f, WassersteinSpace(M)), RelaxedSchemeParams())
    assert np.allclose(U.q, g.q / (1 + tau), atol=1e-12)


def test_entropy_step_preserves_symmetry():
    M = 50
    f = energy_descriptor(EnergySpec(alpha1=1.0, U=entropy()))
    U, _ = mms_step(ProximalObjective(0.05, uniform(-1, 1, M), f, WassersteinSpace(M)), RelaxedSchemeParams())
    assert np.max(np.abs(U.q + U.q[::-1])) <= 1e-12
    assert U.q[-1] > 1.0


def test_exact_trajectory_and_export(tmp_path):
    q = QuadraticFunctional(np.eye(1), np.zeros(1), 0.0)
    grid = TimeGrid(0.25, 4)
    traj = exact_trajectory(E1, lambda u, t: exact_flow_quadratic(q, u, t), np.array([1.0]), grid)
    assert traj.points[-1][0] == pytest.approx(math.exp(-1.0), rel=1e-14)
    assert traj.mode == PIECEWISE_CONSTANT
    run, certs = mms_run(E1, q.descriptor(), np.array([1.0]), grid)
    write_trajectory_csv(tmp_path / "t.csv", run, q.descriptor(), certs)
    rows = read_trajectory_csv(tmp_path / "t.csv")
    assert [r["n"] for r in rows] == [0, 1, 2, 3, 4]
    assert rows[2]["phi"] == pytest.approx(0.5 / 1.25 ** 4, rel=1e-15)
    man = run_manifest(grid, RelaxedSchemeParams(), q.descriptor(), "euclidean", certs)
    json.dumps(man)
    assert man["lambda"] == 1.0 and len(man["certificates"]) == 4
    (tmp_path / "bad.csv").write_text("n,t\n0,0\n")
    with pytest.raises(InputError):
        read_trajectory_csv(tmp_path / "bad.csv")


def test_concurrent_runs_match_sequential():
    M = 40
    u0s = [gaussian(m, 0.5, M) for m in (-1.0, 0.0, 1.0, 2.0)]

    def job(u0):
        traj, _ = mms_run(WassersteinSpace(M), ou(M), u0, TimeGrid(0.05, 10))
        return np.stack([p.q for p in traj.points])

    seq = [job(u) for u in u0s]
    with ThreadPoolExecutor(4) as ex:
        par = list(ex.map(job, u0s))
    assert all(np.array_equal(a, b) for a, b in zip(seq, par))
