"""Minimizing-movement schemes with pluggable proximal solvers.

One step solves  min_U  d(U, V)^2 / (2 tau) + phi(U)  from the anchor V.
With relaxation eta > 0 an inexact minimizer is accepted once the metric
norm of the objective gradient falls below (eta/2) d(U, V); for a convex
discretized objective this implies the relaxed variational inequality
for every competitor.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import InputError, PreconditionError, SchemeError, UnsupportedError
from .euclidean import EuclideanSpace, quadratic_from_descriptor, resolvent_quadratic
from .metric_core import DiscreteTrajectory, FunctionalDescriptor, TimeGrid

_ROUND = 1e-13


@dataclass(frozen=True)
class ProximalObjective:
    tau: float
    anchor: Any
    f: FunctionalDescriptor
    space: Any

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise InputError(f"tau must be positive, got {self.tau}")

    def value(self, U) -> float:
        return self.space.dist(U, self.anchor) ** 2 / (2.0 * self.tau) + self.f.value(U)


@dataclass(frozen=True)
class RelaxedSchemeParams:
    eta: float = 0.0
    inner_max_iter: int = 100
    inner_tol_abs: float = 1e-9

    def __post_init__(self):
        if self.eta < 0 or not math.isfinite(self.eta):
            raise InputError(f"eta must be a nonnegative real, got {self.eta}")
        if self.inner_max_iter < 1:
            raise InputError("inner_max_iter must be positive")
        if self.inner_tol_abs < 0:
            raise InputError("inner_tol_abs must be nonnegative")


def check_feasible(tau: float, lam: float, eta: float = 0.0) -> None:
    """Raise PreconditionError unless the step is well posed for this modulus."""
    if eta == 0.0:
        if 1.0 + tau * lam <= 0:
            raise PreconditionError(
                f"infeasible step: need 1+tau*lambda > 0, got 1+{tau}*({lam}) = {1.0 + tau * lam}"
            )
    elif eta - lam >= 1.0 / (2.0 * tau):
        raise PreconditionError(
            f"infeasible relaxed step: need eta-lambda < 1/(2 tau), got {eta - lam} >= {1.0 / (2.0 * tau)}"
        )


@dataclass(frozen=True)
class StepCertificate:
    grad_norm_or_residual: float
    energy_decrease_ok: bool
    eta_used: float
    inner_iters: int
    tolerance: float = 0.0
    exact: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


InnerSolver = Callable[[ProximalObjective, Any, RelaxedSchemeParams], "tuple[Any, StepCertificate]"]


def _stop_tol(params: RelaxedSchemeParams, d_anchor: float) -> float:
    return max(params.inner_tol_abs, 0.5 * params.eta * d_anchor)


def _note(f: FunctionalDescriptor) -> str:
    if f.lam < 0:
        return "nonconvex functional: residual test is necessary, not sufficient"
    return ""


def resolvent_inner_solver(obj: ProximalObjective, start, params: RelaxedSchemeParams):
    """Exact step for Euclidean quadratics: (I + tau A) U = V - tau b."""
    q = quadratic_from_descriptor(obj.f)
    if q is None:
        raise UnsupportedError("resolvent solver needs a quadratic functional")
    U = resolvent_quadratic(q, obj.tau, obj.anchor)
    res = float(np.linalg.norm((U - obj.anchor) / obj.tau + q.gradient(U)))
    ok = obj.value(U) <= obj.f.value(obj.anchor) + _ROUND * max(1.0, abs(obj.f.value(obj.anchor)))
    return U, StepCertificate(res, ok, params.eta, 0, _stop_tol(params, obj.space.dist(U, obj.anchor)), True)


def newton_inner_solver(obj: ProximalObjective, start, params: RelaxedSchemeParams):
    """Damped Newton in the carrier's flat chart with Armijo backtracking.

    Works on any carrier providing ``to_vector``/``from_vector`` and a
    functional with chart gradient and Hessian.  Candidates leaving the
    monotone cone are projected back by the carrier when it can (isotonic
    fit for quantile vectors); candidates with infinite energy are rejected,
    which keeps barrier-type costs strictly inside their domain.
    """
    space, f, tau = obj.space, obj.f, obj.tau
    if f.gradient is None or f.hessian is None:
        raise UnsupportedError(f"Newton solver needs gradient and Hessian of {f.name!r}")
    wgt = getattr(space, "weight", 1.0)
    a = space.to_vector(obj.anchor)
    x = space.to_vector(start)
    project = getattr(space, "project", None)

    def point(v):
        return space.from_vector(v)

    def value(v):
        try:
            p = point(v)
        except InputError:
            return math.inf, None
        val = f.value(p)
        if not math.isfinite(val):
            return math.inf, p
        return 0.5 * wgt / tau * float(np.dot(v - a, v - a)) + val, p

    fx, px = value(x)
    if not math.isfinite(fx):
        raise SchemeError("inner solve started outside the domain of the functional")
    note = _note(f)
    it = 0
    while True:
        g = wgt / tau * (x - a) + np.asarray(f.gradient(px), dtype=float)
        res = space.metric_gradient_norm(g) if hasattr(space, "metric_gradient_norm") else float(np.linalg.norm(g))
        d_anchor = math.sqrt(wgt) * float(np.linalg.norm(x - a))
        tol = _stop_tol(params, d_anchor)
        if res <= tol:
            ok = fx <= f.value(obj.anchor) + _ROUND * max(1.0, abs(fx))
            return px, StepCertificate(res, ok, params.eta, it, tol, params.eta == 0.0, note)
        if it >= params.inner_max_iter:
            cert = StepCertificate(res, False, params.eta, it, tol, False, note)
            raise SchemeError(f"inner solver did not converge in {it} iterations (residual {res:.3e})", cert)
        it += 1
        H = wgt / tau * np.eye(x.shape[0]) + np.asarray(f.hessian(px), dtype=float)
        try:
            p = np.linalg.solve(H, -g)
            if not np.all(np.isfinite(p)) or np.dot(p, g) >= 0:
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            p = -g * tau / wgt
        alpha = 1.0
        slack = _ROUND * max(1.0, abs(fx))
        while True:
            cand = x + alpha * p
            if project is not None and np.any(np.diff(cand) < 0):
                cand = project(cand)
            fc, pc = value(cand)
            if math.isfinite(fc) and fc <= fx + 1e-4 * float(np.dot(g, cand - x)) + slack:
                break
            alpha *= 0.5
            if alpha < 1e-14:
                cert = StepCertificate(res, False, params.eta, it, tol, False, note)
                raise SchemeError(f"line search failed at iteration {it} (residual {res:.3e})", cert)
        if np.array_equal(cand, x):
            # no representable progress left above the tolerance
            cert = StepCertificate(res, False, params.eta, it, tol, False, note)
            raise SchemeError(f"inner solver stalled at residual {res:.3e}", cert)
        x, fx, px = cand, fc, pc


def default_inner_solver(space, f: FunctionalDescriptor) -> InnerSolver:
    if isinstance(space, EuclideanSpace) and quadratic_from_descriptor(f) is not None:
        return resolvent_inner_solver
    return newton_inner_solver


def mms_step(obj: ProximalObjective, params: RelaxedSchemeParams, inner: InnerSolver | None = None):
    """One (relaxed) minimizing-movement step from ``obj.anchor``."""
    check_feasible(obj.tau, obj.f.lam, params.eta)
    if not obj.f.in_domain(obj.anchor):
        raise PreconditionError("anchor is outside the domain of the functional")
    inner = inner or default_inner_solver(obj.space, obj.f)
    U, cert = inner(obj, obj.anchor, params)
    if not cert.energy_decrease_ok:
        raise SchemeError("step rejected: proximal value exceeds the previous energy", cert)
    return U, cert


def mms_run(space, f: FunctionalDescriptor, u0, grid: TimeGrid, params: RelaxedSchemeParams | None = None,
            inner: InnerSolver | None = None, progress: Callable[[int], None] | None = None):
    """Iterate ``mms_step``; returns the trajectory and per-step certificates."""
    params = params or RelaxedSchemeParams()
    check_feasible(grid.tau, f.lam, params.eta)
    if not f.in_domain(u0):
        raise PreconditionError("u0 is outside the domain of the functional")
    inner = inner or default_inner_solver(space, f)
    points, certs = [u0], []
    for n in range(1, grid.n_steps + 1):
        try:
            U, cert = mms_step(ProximalObjective(grid.tau, points[-1], f, space), params, inner)
        except SchemeError as exc:
            partial = DiscreteTrajectory(TimeGrid(grid.tau, n - 1), points, space=space)
            raise SchemeError(f"step {n}: {exc}", exc.certificate, partial) from exc
        points.append(U)
        certs.append(cert)
        if progress is not None:
            progress(n)
    return DiscreteTrajectory(grid, points, space=space), certs


def exact_trajectory(space, flow: Callable[[Any, float], Any], u0, grid: TimeGrid) -> DiscreteTrajectory:
    """Sample a closed-form flow ``flow(u0, t)`` on the scheme's grid."""
    return DiscreteTrajectory(grid, [flow(u0, t) for t in grid.times], space=space)


# ----------------------------------------------------------------- export


def trajectory_rows(traj: DiscreteTrajectory, f: FunctionalDescriptor, certs=None) -> list[tuple]:
    rows = []
    space, pts, grid = traj.space, traj.points, traj.grid
    for n, U in enumerate(pts):
        step = 0.0 if n == 0 else space.dist(pts[n - 1], U)
        res = 0.0 if (n == 0 or not certs) else certs[n - 1].grad_norm_or_residual
        rows.append((n, grid.t(n), f.value(U), step, res))
    return rows


def write_trajectory_csv(path, traj: DiscreteTrajectory, f: FunctionalDescriptor, certs=None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "t", "phi", "dist_step", "grad_residual"])
        for n, t, phi, step, res in trajectory_rows(traj, f, certs):
            w.writerow([n, repr(float(t)), repr(float(phi)), repr(float(step)), repr(float(res))])


def read_trajectory_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        if r.fieldnames != ["n", "t", "phi", "dist_step", "grad_residual"]:
            raise InputError(f"{path}: unexpected trajectory header {r.fieldnames}")
        try:
            return [{k: (int(v) if k == "n" else float(v)) for k, v in row.items()} for row in r]
        except (TypeError, ValueError) as exc:
            raise InputError(f"{path}: unreadable row: {exc}") from None


def run_manifest(grid: TimeGrid, params: RelaxedSchemeParams, f: FunctionalDescriptor, carrier: str,
                 certs, extra: dict | None = None) -> dict:
    return {
        "tau": grid.tau,
        "n_steps": grid.n_steps,
        "eta": params.eta,
        "lambda": f.lam,
        "carrier": carrier,
        "functional": {"name": f.name, "params": f.params},
        "certificates": [c.to_dict() for c in certs],
        **(extra or {}),
    }


# ------------------------------------------------------------- rates


def sup_error(traj: DiscreteTrajectory, reference: Callable[[float], Any], sub: int = 32) -> float:
    """sup over [0, T] of dist(reference(t), linear interpolant), sampled ``sub`` times per cell."""
    space, grid = traj.space, traj.grid
    worst = space.dist(reference(0.0), traj.points[0])
    for n in range(1, grid.n_steps + 1):
        a, b = traj.points[n - 1], traj.points[n]
        for k in range(1, sub + 1):
            s = k / sub
            worst = max(worst, space.dist(reference(grid.t(n - 1) + s * grid.tau), space.combine(a, b, s)))
    return worst


def fit_slope(hs, errors) -> float:
    """Least-squares slope of log(error) against log(h)."""
    hs, errors = np.asarray(hs, float), np.asarray(errors, float)
    if hs.shape[0] < 2:
        raise InputError("a rate fit needs at least two sweep points")
    if np.any(errors <= 0):
        raise InputError("errors must be positive for a log-log fit")
    return float(np.polyfit(np.log(hs), np.log(errors), 1)[0])
