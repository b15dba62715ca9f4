"""Metric-space contracts, time grids, interpolants and basic estimators.

Every algorithm in the package is written against :class:`MetricSpace`,
a carrier exposing ``dist`` and, where available, ``combine`` (the
constant-speed geodesic ``s -> (1-s) a + s b`` in a flat chart).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, NamedTuple, Optional, Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import DomainError, InputError, RangeError, UnsupportedError

Point = Any

PIECEWISE_CONSTANT = "piecewise_constant"
PIECEWISE_LINEAR = "piecewise_linear"


@runtime_checkable
class MetricSpace(Protocol):
    name: str

    def dist(self, x: Point, y: Point) -> float: ...


def supports_geodesics(space) -> bool:
    return callable(getattr(space, "combine", None))


@dataclass(frozen=True)
class FunctionalDescriptor:
    """A functional on a carrier together with its convexity modulus.

    ``value`` may return ``math.inf`` outside the proper domain.  ``gradient``
    and ``hessian`` are optional chart-level derivatives used by Newton-type
    inner solvers; ``slope_exact`` is the metric slope when known in closed
    form.
    """

    value: Callable[[Point], float]
    lam: float
    slope_exact: Optional[Callable[[Point], float]] = None
    domain_test: Optional[Callable[[Point], bool]] = None
    gradient: Optional[Callable[[Point], Any]] = None
    hessian: Optional[Callable[[Point], Any]] = None
    name: str = "functional"
    params: dict = field(default_factory=dict)

    def __call__(self, x: Point) -> float:
        return self.value(x)

    def in_domain(self, x: Point) -> bool:
        if self.domain_test is not None:
            return bool(self.domain_test(x))
        return math.isfinite(self.value(x))

    def shifted(self, c: float, name: Optional[str] = None) -> "FunctionalDescriptor":
        """Same functional plus a constant; flows are unchanged."""
        value = self.value
        return FunctionalDescriptor(
            value=lambda x: value(x) + c,
            lam=self.lam,
            slope_exact=self.slope_exact,
            domain_test=self.domain_test,
            gradient=self.gradient,
            hessian=self.hessian,
            name=name or f"{self.name}+{c:g}",
            params=dict(self.params, shift=c),
        )


@dataclass(frozen=True)
class TimeGrid:
    tau: float
    n_steps: int

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise InputError(f"time step must be positive, got {self.tau}")
        if self.n_steps < 0:
            raise InputError(f"n_steps must be nonnegative, got {self.n_steps}")

    @classmethod
    def from_horizon(cls, tau: float, T: float) -> "TimeGrid":
        n = int(round(T / tau))
        if abs(n * tau - T) > 1e-9 * max(1.0, T):
            raise InputError(f"horizon T={T} is not a multiple of tau={tau}")
        return cls(tau, n)

    def t(self, n: int) -> float:
        return n * self.tau

    @property
    def end(self) -> float:
        return self.n_steps * self.tau

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.tau


@dataclass(frozen=True)
class DiscreteTrajectory:
    grid: TimeGrid
    points: tuple
    mode: str = PIECEWISE_CONSTANT
    space: Any = None

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if len(self.points) != self.grid.n_steps + 1:
            raise InputError(
                f"trajectory has {len(self.points)} points for {self.grid.n_steps} steps"
            )
        if self.mode not in (PIECEWISE_CONSTANT, PIECEWISE_LINEAR):
            raise InputError(f"unknown interpolation mode {self.mode!r}")

    def with_mode(self, mode: str) -> "DiscreteTrajectory":
        return DiscreteTrajectory(self.grid, self.points, mode, self.space)

    def as_curve(self) -> "SampledCurve":
        return SampledCurve(self.grid.times, self.points)


@dataclass(frozen=True)
class SampledCurve:
    times: np.ndarray
    points: tuple

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", tuple(self.points))
        if times.ndim != 1 or len(times) != len(self.points):
            raise InputError("times and points must have matching length")
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            raise InputError("sample times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def index_of(self, t: float, atol: float = 1e-12) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > atol * max(1.0, abs(t)):
            raise RangeError(f"time {t} is not a sample of the curve")
        return i


def e_lambda(lam: float, t: float) -> float:
    """Integral of exp(lam*r) over [0, t]."""
    if t < 0:
        raise DomainError(f"E_lambda needs t >= 0, got {t}")
    x = lam * t
    if abs(x) < 1e-8:
        return t * (1.0 + x / 2.0 + x * x / 6.0)
    return math.expm1(x) / lam


def interpolate(traj: DiscreteTrajectory, t: float) -> Point:
    grid = traj.grid
    if t < 0 or t > grid.end * (1 + 1e-14) + 1e-300:
        raise RangeError(f"t={t} outside [0, {grid.end}]")
    if t == 0 or grid.n_steps == 0:
        return traj.points[0]
    k = int(round(t / grid.tau))
    if abs(t - grid.t(k)) <= 1e-12 * max(1.0, t):
        return traj.points[min(k, grid.n_steps)]
    # right-closed cells (t^{n-1}, t^n]
    n = int(math.ceil(t / grid.tau - 1e-12))
    n = min(max(n, 1), grid.n_steps)
    if traj.mode == PIECEWISE_CONSTANT:
        return traj.points[n]
    space = traj.space
    if space is None or not supports_geodesics(space):
        raise UnsupportedError("piecewise-linear interpolation needs a carrier with convex combinations")
    s = (t - grid.t(n - 1)) / grid.tau
    s = min(max(s, 0.0), 1.0)
    return space.combine(traj.points[n - 1], traj.points[n], s)


def estimate_metric_derivative(curve: SampledCurve, space) -> np.ndarray:
    """Difference quotients of the distance: central inside, one-sided at the ends."""
    n = len(curve)
    if n < 2:
        raise InputError("metric derivative needs at least two samples")
    t, p = curve.times, curve.points
    out = np.empty(n)
    out[0] = space.dist(p[0], p[1]) / (t[1] - t[0])
    out[-1] = space.dist(p[-2], p[-1]) / (t[-1] - t[-2])
    for i in range(1, n - 1):
        out[i] = space.dist(p[i - 1], p[i + 1]) / (t[i + 1] - t[i - 1])
    return out


class SlopeEstimate(NamedTuple):
    value: float
    radius: float


def estimate_slope(
    f: FunctionalDescriptor,
    v: Point,
    probe_radii: Sequence[float],
    sampler: Callable[[Point, float], Iterable[Point]],
    space=None,
) -> SlopeEstimate:
    """Finite-radius estimate of the metric slope of ``f`` at ``v``.

    Returns the largest normalized descent (f(v)-f(w))^+/d(v,w) over all
    probes together with the smallest radius attaining it.  This is an
    estimate at that radius, never the limsup itself.
    """
    radii = [float(r) for r in probe_radii]
    if not radii or any(r <= 0 for r in radii):
        raise InputError("probe radii must be positive")
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise InputError("probe radii must be strictly decreasing")
    if not f.in_domain(v):
        return SlopeEstimate(math.inf, radii[-1])
    fv = f.value(v)
    best, best_r = 0.0, radii[-1]
    for r in radii:
        for w in sampler(v, r):
            d = space.dist(v, w) if space is not None else r
            if d <= 0:
                continue
            fw = f.value(w)
            if not math.isfinite(fw):
                continue
            q = max(fv - fw, 0.0) / d
            if q >= best:
                best, best_r = q, r
    return SlopeEstimate(best, best_r)


def metric_axiom_violation(space, points: Sequence[Point], rng: np.random.Generator, n_triples: int = 200) -> float:
    """Largest relative violation of the metric axioms over random triples."""
    worst = 0.0
    k = len(points)
    for _ in range(n_triples):
        i, j, l = rng.integers(0, k, size=3)
        x, y, z = points[i], points[j], points[l]
        dxy, dyx = space.dist(x, y), space.dist(y, x)
        dxz, dyz = space.dist(x, z), space.dist(y, z)
        scale = max(1.0, dxy + dyz)
        worst = max(worst, space.dist(x, x) / scale, abs(dxy - dyx) / scale)
        worst = max(worst, (dxz - dxy - dyz) / scale)
    return worst


def quadratic_lower_bound_violation(f, space, points, kappa: float, phi_o: float, o) -> float:
    """max over points of phi_o - (f(x) + kappa/2 d(x,o)^2); <= 0 when the bound holds."""
    return max(phi_o - (f.value(x) + 0.5 * kappa * space.dist(x, o) ** 2) for x in points)
