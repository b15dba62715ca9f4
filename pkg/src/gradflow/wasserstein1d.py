"""Probability measures on the line in quantile coordinates.

A measure is stored as its quantile function sampled at the midpoints
w_i = (i + 1/2)/M.  Monotone couplings are optimal in one dimension, so
W2 is the scaled Euclidean norm of quantile differences and geodesics are
straight lines between quantile vectors.

Density model used by the internal energy and by density reconstruction:
mass 1/M sits between consecutive quantile nodes and is spread uniformly
there; the remaining 1/(2M) at each end is spread over a half-cell of
width h/2, where h is the mean of the first and last increments.  Under
this model a uniform law is represented exactly and the reconstructed
density has exactly the quantile mean.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .errors import DomainError, InputError, NumericalError, RangeError
from .metric_core import FunctionalDescriptor


def w_grid(M: int) -> np.ndarray:
    return (np.arange(M) + 0.5) / M


@dataclass(frozen=True, eq=False)
class QuantileMeasure:
    q: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.ndim != 1 or q.shape[0] < 2:
            raise InputError("a quantile measure needs a vector of at least 2 nodes")
        if not np.all(np.isfinite(q)):
            raise InputError("quantile values must be finite")
        d = np.diff(q)
        if np.any(d < -1e-12 * max(1.0, float(np.max(np.abs(q))))):
            raise InputError("quantile values must be nondecreasing")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def M(self) -> int:
        return self.q.shape[0]

    @property
    def w(self) -> np.ndarray:
        return w_grid(self.M)

    def increments(self) -> np.ndarray:
        return np.diff(self.q)

    def __repr__(self):
        return f"QuantileMeasure(M={self.M}, range=[{self.q[0]:.4g}, {self.q[-1]:.4g}])"


def gaussian(mean: float, var: float, M: int) -> QuantileMeasure:
    if var <= 0:
        raise InputError("variance must be positive")
    return QuantileMeasure(mean + math.sqrt(var) * stats.norm.ppf(w_grid(M)))


def uniform(a: float, b: float, M: int) -> QuantileMeasure:
    if not b > a:
        raise InputError("uniform law needs a < b")
    return QuantileMeasure(a + (b - a) * w_grid(M))


def dirac(x: float, M: int) -> QuantileMeasure:
    return QuantileMeasure(np.full(M, float(x)))


def _check_pair(a: QuantileMeasure, b: QuantileMeasure):
    if a.M != b.M:
        raise InputError(f"quantile grids differ: M={a.M} vs M={b.M}")


def w2(a: QuantileMeasure, b: QuantileMeasure) -> float:
    _check_pair(a, b)
    return float(np.linalg.norm(a.q - b.q) / math.sqrt(a.M))


def w2_mixed(a: QuantileMeasure, b: QuantileMeasure) -> float:
    """W2 between quantile vectors of different length, read as step functions on [0, 1]."""
    if a.M == b.M:
        return w2(a, b)
    cuts = np.union1d(np.arange(a.M + 1) / a.M, np.arange(b.M + 1) / b.M)
    mid = 0.5 * (cuts[:-1] + cuts[1:])
    ia = np.minimum((mid * a.M).astype(int), a.M - 1)
    ib = np.minimum((mid * b.M).astype(int), b.M - 1)
    return float(math.sqrt(np.sum(np.diff(cuts) * (a.q[ia] - b.q[ib]) ** 2)))


def geodesic(a: QuantileMeasure, b: QuantileMeasure, s: float) -> QuantileMeasure:
    _check_pair(a, b)
    if not 0.0 <= s <= 1.0:
        raise RangeError(f"geodesic parameter must lie in [0, 1], got {s}")
    if s == 0.0:
        return a
    if s == 1.0:
        return b
    return QuantileMeasure((1.0 - s) * a.q + s * b.q)


def generalized_geodesic(base: QuantileMeasure, m2: QuantileMeasure, m3: QuantileMeasure, s: float) -> QuantileMeasure:
    """Interpolation of m2 -> m3 through plans optimal from ``base``.

    On the line both optimal plans are monotone, so the curve does not depend
    on ``base`` and coincides with the geodesic.
    """
    _check_pair(base, m2)
    return geodesic(m2, m3, s)


def moments(m: QuantileMeasure) -> tuple[float, float]:
    mean = float(np.mean(m.q))
    return mean, float(np.mean((m.q - mean) ** 2))


# ----------------------------------------------------------- energy pieces


@dataclass(frozen=True)
class InternalDensity:
    """Density cost U with derivatives; ``barrier`` means U(rho) forbids rho = inf."""

    name: str
    U: Callable[[np.ndarray], np.ndarray]
    dU: Callable[[np.ndarray], np.ndarray]
    d2U: Callable[[np.ndarray], np.ndarray]
    barrier: bool = True
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Potential:
    name: str
    V: Callable[[np.ndarray], np.ndarray]
    dV: Callable[[np.ndarray], np.ndarray]
    d2V: Callable[[np.ndarray], np.ndarray]
    lam: float
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Interaction:
    name: str
    W: Callable[[np.ndarray], np.ndarray]
    dW: Callable[[np.ndarray], np.ndarray]
    d2W: Callable[[np.ndarray], np.ndarray]
    lam: float
    params: dict = field(default_factory=dict)


def entropy() -> InternalDensity:
    def U(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(r > 0, r * np.log(np.where(r > 0, r, 1.0)), 0.0)

    return InternalDensity("entropy", U, lambda r: np.log(r) + 1.0, lambda r: 1.0 / np.asarray(r, dtype=float))


def power(m: float) -> InternalDensity:
    if not m > 1:
        raise InputError("power functional needs m > 1 (sublinear costs are excluded)")
    return InternalDensity(
        f"power(m={m:g})",
        lambda r: np.asarray(r, dtype=float) ** m / (m - 1.0),
        lambda r: m / (m - 1.0) * np.asarray(r, dtype=float) ** (m - 1.0),
        lambda r: m * np.asarray(r, dtype=float) ** (m - 2.0),
        params={"m": m},
    )


def quadratic_potential(k: float = 1.0, center: float = 0.0) -> Potential:
    return Potential(
        "quadratic",
        lambda x: 0.5 * k * (np.asarray(x) - center) ** 2,
        lambda x: k * (np.asarray(x) - center),
        lambda x: np.full(np.shape(x), float(k)),
        lam=float(k),
        params={"k": k, "center": center},
    )


def linear_potential(slope: float = 1.0) -> Potential:
    return Potential(
        "linear",
        lambda x: slope * np.asarray(x, dtype=float),
        lambda x: np.full(np.shape(x), float(slope)),
        lambda x: np.zeros(np.shape(x)),
        lam=0.0,
        params={"slope": slope},
    )


def double_well_potential() -> Potential:
    return Potential(
        "double_well",
        lambda x: (np.asarray(x) ** 2 - 1.0) ** 2 / 4.0,
        lambda x: np.asarray(x) ** 3 - np.asarray(x),
        lambda x: 3.0 * np.asarray(x) ** 2 - 1.0,
        lam=-1.0,
    )


def quadratic_interaction(k: float = 1.0) -> Interaction:
    """W(x) = k x^2 / 2; the modulus is capped at 0 from above."""
    return Interaction(
        "quadratic",
        lambda x: 0.5 * k * np.asarray(x) ** 2,
        lambda x: k * np.asarray(x),
        lambda x: np.full(np.shape(x), float(k)),
        lam=min(float(k), 0.0),
        params={"k": k},
    )


def cubic_interaction(k: float = 1.0) -> Interaction:
    """W(x) = k |x|^3 / 3, convex and even."""
    return Interaction(
        "cubic",
        lambda x: k * np.abs(x) ** 3 / 3.0,
        lambda x: k * np.abs(x) * np.asarray(x),
        lambda x: 2.0 * k * np.abs(x),
        lam=0.0,
        params={"k": k},
    )


INTERNAL = {"entropy": entropy, "power": power}
POTENTIALS = {"quadratic": quadratic_potential, "linear": linear_potential, "double_well": double_well_potential}
INTERACTIONS = {"quadratic": quadratic_interaction, "cubic": cubic_interaction}


@dataclass(frozen=True)
class EnergySpec:
    """phi = alpha1 * internal + alpha2 * potential + alpha3 * interaction."""

    alpha1: float = 0.0
    alpha2: float = 0.0
    alpha3: float = 0.0
    U: Optional[InternalDensity] = None
    V: Optional[Potential] = None
    W: Optional[Interaction] = None

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "alpha3"):
            if getattr(self, name) < 0:
                raise InputError(f"{name} must be nonnegative")
        for alpha, part, label in ((self.alpha1, self.U, "U"), (self.alpha2, self.V, "V"), (self.alpha3, self.W, "W")):
            if alpha > 0 and part is None:
                raise InputError(f"weight on {label} is positive but {label} is missing")
        if self.W is not None and self.W.lam > 0:
            raise InputError("interaction modulus must be <= 0")

    @property
    def lam(self) -> float:
        lv = self.V.lam if (self.V is not None and self.alpha2 > 0) else 0.0
        lw = self.W.lam if (self.W is not None and self.alpha3 > 0) else 0.0
        return self.alpha2 * lv + self.alpha3 * lw

    @property
    def has_barrier(self) -> bool:
        return self.alpha1 > 0 and self.U is not None and self.U.barrier

    def describe(self) -> dict:
        return {
            "alpha1": self.alpha1, "alpha2": self.alpha2, "alpha3": self.alpha3,
            "U": None if self.U is None else {"name": self.U.name, **self.U.params},
            "V": None if self.V is None else {"name": self.V.name, **self.V.params},
            "W": None if self.W is None else {"name": self.W.name, **self.W.params},
            "lambda": self.lam,
        }


def check_energy_spec(spec: EnergySpec, n_grid: int = 200) -> list[str]:
    """Sampled invariant checks; returns the list of violated conditions."""
    problems = []
    s = np.logspace(-4, 4, n_grid)
    if spec.U is not None:
        U = spec.U
        if abs(float(U.U(np.array([0.0]))[0])) > 1e-14:
            problems.append("U(0) != 0")
        if np.any(U.d2U(s) < -1e-12):
            problems.append("U is not convex")
        # g(s) = s U(1/s): g' = -L_U(1/s), g'' = U''(1/s)/s^3
        r = 1.0 / s
        lu = r * U.dU(r) - U.U(r)
        if np.any(lu < -1e-12 * np.maximum(1.0, np.abs(r * U.dU(r)))):
            problems.append("s U(1/s) is not non-increasing")
        if np.any(U.d2U(r) / s ** 3 < -1e-12):
            problems.append("s U(1/s) is not convex")
    if spec.W is not None:
        x = np.linspace(-5, 5, n_grid)
        if np.max(np.abs(spec.W.W(x) - spec.W.W(-x))) > 1e-12 * max(1.0, float(np.max(np.abs(spec.W.W(x))))):
            problems.append("W is not even")
    return problems


def _finite(values, what):
    if not np.all(np.isfinite(values)):
        raise NumericalError(f"non-finite {what} values")
    return values


def potential_energy(spec: EnergySpec, m: QuantileMeasure) -> float:
    if spec.V is None:
        return 0.0
    return float(np.mean(_finite(spec.V.V(m.q), "potential")))


def interaction_energy(spec: EnergySpec, m: QuantileMeasure) -> float:
    """Exact O(M^2) double sum; numpy's fixed pairwise summation keeps it deterministic."""
    if spec.W is None:
        return 0.0
    diff = m.q[:, None] - m.q[None, :]
    return float(np.sum(_finite(spec.W.W(diff), "interaction")) / (2.0 * m.M ** 2))


def _tail_width(q: np.ndarray) -> float:
    return 0.5 * ((q[1] - q[0]) + (q[-1] - q[-2]))


def internal_energy(spec: EnergySpec, m: QuantileMeasure) -> float:
    """Sum of delta*U(dw/delta) over increments plus the two end half-cells.

    Returns +inf when an increment vanishes and U is barrier-type.
    """
    if spec.U is None:
        return 0.0
    return _internal_value(spec.U, m.q)


def _internal_value(U: InternalDensity, q: np.ndarray) -> float:
    M = q.shape[0]
    dw = 1.0 / M
    delta = np.append(np.diff(q), _tail_width(q))
    if np.any(delta <= 0):
        if U.barrier:
            return math.inf
        raise DomainError("zero-width cells need a barrier-free density cost")
    vals = delta * U.U(dw / delta)
    return float(np.sum(_finite(vals, "internal energy")))


def energy(spec: EnergySpec, m: QuantileMeasure) -> float:
    total = 0.0
    if spec.alpha1 > 0:
        total += spec.alpha1 * internal_energy(spec, m)
    if spec.alpha2 > 0:
        total += spec.alpha2 * potential_energy(spec, m)
    if spec.alpha3 > 0:
        total += spec.alpha3 * interaction_energy(spec, m)
    return total


def l_u(spec: EnergySpec, r: float) -> float:
    """Pressure-like quantity r U'(r) - U(r), with the value 0 at r = 0."""
    if spec.U is None:
        raise InputError("energy spec has no internal part")
    if r < 0:
        raise DomainError("L_U needs r >= 0")
    if r == 0:
        return 0.0
    du = float(spec.U.dU(np.array([r]))[0])
    if not math.isfinite(du):
        raise DomainError(f"U' undefined at r={r}")
    return r * du - float(spec.U.U(np.array([r]))[0])


# --------------------------------------------- derivatives in quantile chart


def _tail_vector(M: int) -> np.ndarray:
    e = np.zeros(M)
    e[0] -= 0.5
    e[1] += 0.5
    e[-2] -= 0.5
    e[-1] += 0.5
    return e


def energy_gradient(spec: EnergySpec, q: np.ndarray) -> np.ndarray:
    """Euclidean gradient of the energy with respect to the quantile vector."""
    M = q.shape[0]
    g = np.zeros(M)
    if spec.alpha1 > 0:
        U = spec.U
        dw = 1.0 / M
        delta = np.diff(q)
        h = _tail_width(q)
        r = dw / delta
        gp = U.U(r) - r * U.dU(r)  # d/d delta of delta U(dw/delta)
        gi = np.zeros(M)
        gi[:-1] -= gp
        gi[1:] += gp
        rh = dw / h
        gi += (U.U(rh) - rh * U.dU(rh)) * _tail_vector(M)
        g += spec.alpha1 * gi
    if spec.alpha2 > 0:
        g += spec.alpha2 * spec.V.dV(q) / M
    if spec.alpha3 > 0:
        diff = q[:, None] - q[None, :]
        g += spec.alpha3 * np.sum(spec.W.dW(diff), axis=1) / M ** 2
    return g


def energy_hessian(spec: EnergySpec, q: np.ndarray) -> np.ndarray:
    M = q.shape[0]
    H = np.zeros((M, M))
    if spec.alpha1 > 0:
        U = spec.U
        dw = 1.0 / M
        delta = np.diff(q)
        r = dw / delta
        gpp = spec.alpha1 * r * r * U.d2U(r) / delta
        idx = np.arange(M - 1)
        H[idx, idx] += gpp
        H[idx + 1, idx + 1] += gpp
        H[idx, idx + 1] -= gpp
        H[idx + 1, idx] -= gpp
        h = _tail_width(q)
        rh = dw / h
        e = _tail_vector(M)
        H += spec.alpha1 * (rh * rh * U.d2U(rh) / h) * np.outer(e, e)
    if spec.alpha2 > 0:
        H[np.diag_indices(M)] += spec.alpha2 * spec.V.d2V(q) / M
    if spec.alpha3 > 0:
        diff = q[:, None] - q[None, :]
        K = spec.alpha3 * spec.W.d2W(diff) / M ** 2
        np.fill_diagonal(K, 0.0)
        H -= K
        H[np.diag_indices(M)] += np.sum(K, axis=1)
    return H


def energy_descriptor(spec: EnergySpec, name: str = "mccann") -> FunctionalDescriptor:
    """The composite energy as a functional on quantile measures."""

    def value(m):
        return energy(spec, m)

    def gradient(m):
        return energy_gradient(spec, _vec(m))

    def hessian(m):
        return energy_hessian(spec, _vec(m))

    def slope(m):
        q = _vec(m)
        return float(np.linalg.norm(energy_gradient(spec, q)) * math.sqrt(q.shape[0]))

    return FunctionalDescriptor(
        value=value, lam=spec.lam, slope_exact=slope, gradient=gradient, hessian=hessian,
        domain_test=lambda m: math.isfinite(energy(spec, m)), name=name, params=spec.describe(),
    )


def _vec(m) -> np.ndarray:
    return m.q if isinstance(m, QuantileMeasure) else np.asarray(m, dtype=float)


# ----------------------------------------------------------- isotonic fit


def pool_adjacent_violators(y) -> np.ndarray:
    """Least-squares nondecreasing fit with unit weights."""
    y = np.asarray(y, dtype=float)
    sums, counts = [], []
    for v in y:
        sums.append(v)
        counts.append(1)
        while len(sums) > 1 and sums[-2] / counts[-2] > sums[-1] / counts[-1]:
            s, c = sums.pop(), counts.pop()
            sums[-1] += s
            counts[-1] += c
    return np.repeat([s / c for s, c in zip(sums, counts)], counts)


# ----------------------------------------------------------- carrier


class WassersteinSpace:
    """(P2(R), W2) through quantile vectors of fixed length M."""

    name = "wasserstein1d"

    def __init__(self, M: int):
        if M < 2:
            raise InputError("M must be at least 2")
        self.M = M
        self.weight = 1.0 / M

    def dist(self, a, b) -> float:
        return w2(a, b)

    def combine(self, a, b, s: float) -> QuantileMeasure:
        return geodesic(a, b, s)

    def to_vector(self, m) -> np.ndarray:
        return np.array(m.q, dtype=float)

    def from_vector(self, v) -> QuantileMeasure:
        return QuantileMeasure(v)

    def project(self, v) -> np.ndarray:
        return pool_adjacent_violators(v)

    def metric_gradient_norm(self, g) -> float:
        return float(np.linalg.norm(g) * math.sqrt(self.M))

    def sampler(self, seed: int = 0, n_random: int = 32, f: FunctionalDescriptor | None = None):
        def sample(v, r):
            rng = np.random.default_rng(seed)
            dirs = list(rng.normal(size=(n_random, self.M)))
            if f is not None and f.gradient is not None:
                dirs.append(-np.asarray(f.gradient(v)))
            for u in dirs:
                n = np.linalg.norm(u)
                if n == 0:
                    continue
                cand = v.q + r * math.sqrt(self.M) * u / n
                if np.all(np.diff(cand) >= 0):
                    yield QuantileMeasure(cand)
        return sample


# ----------------------------------------------------------- densities


@dataclass(frozen=True, eq=False)
class DensityOnGrid:
    x_min: float
    x_max: float
    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        if rho.ndim != 1 or rho.shape[0] < 1:
            raise InputError("density needs at least one cell")
        if not self.x_max > self.x_min:
            raise InputError("density support needs x_min < x_max")
        if np.any(rho < 0) or not np.all(np.isfinite(rho)):
            raise InputError("density values must be finite and nonnegative")
        mass = float(np.sum(rho) * (self.x_max - self.x_min) / rho.shape[0])
        if abs(mass - 1.0) > 1e-10:
            raise InputError(f"density is not normalized (mass {mass!r})")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def K(self) -> int:
        return self.rho.shape[0]

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.K

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.K) + 0.5) * self.dx

    @property
    def edges(self) -> np.ndarray:
        return self.x_min + np.arange(self.K + 1) * self.dx

    def mean(self) -> float:
        return float(np.sum(self.rho * self.centers) * self.dx)

    @classmethod
    def from_function(cls, f: Callable, x_min: float, x_max: float, K: int, sub: int = 8) -> "DensityOnGrid":
        """Cell averages of ``f`` by composite midpoint rule, then renormalized."""
        dx = (x_max - x_min) / K
        xs = x_min + (np.arange(K * sub) + 0.5) * dx / sub
        rho = np.asarray(f(xs), dtype=float).reshape(K, sub).mean(axis=1)
        rho = rho / (np.sum(rho) * dx)
        return cls(x_min, x_max, rho)


def density_to_quantiles(d: DensityOnGrid, M: int) -> QuantileMeasure:
    """Invert the piecewise-linear CDF of the cell density at the midpoints w_i.

    The result is shifted by the (O(1/M^2)) difference between the midpoint
    quadrature of the quantile mean and the density mean, so that the mean is
    carried over exactly.
    """
    F = np.concatenate([[0.0], np.cumsum(d.rho * d.dx)])
    F = F / F[-1]
    w = w_grid(M)
    j = np.clip(np.searchsorted(F, w, side="left"), 1, d.K)
    k = j - 1
    lo = d.edges[k]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = (w - F[k]) / (F[k + 1] - F[k])
    q = lo + np.nan_to_num(frac) * d.dx
    q = np.maximum.accumulate(q)
    q = q + (d.mean() - float(np.mean(q)))
    return QuantileMeasure(q)


def _cdf_breakpoints(q: np.ndarray):
    M = q.shape[0]
    h = _tail_width(q)
    xs = np.concatenate([[q[0] - 0.5 * h], q, [q[-1] + 0.5 * h]])
    Fs = np.concatenate([[0.0], w_grid(M), [1.0]])
    return xs, Fs


def _cdf_integral(xs, Fs, x):
    """G(x) = integral of the piecewise-linear CDF from -inf to x."""
    widths = np.diff(xs)
    Gs = np.concatenate([[0.0], np.cumsum(0.5 * (Fs[:-1] + Fs[1:]) * widths)])
    x = np.asarray(x, dtype=float)
    j = np.searchsorted(xs, x, side="right") - 1
    out = np.zeros_like(x)
    right = j >= len(xs) - 1
    out[right] = Gs[-1] + (x[right] - xs[-1])
    mid = (j >= 0) & ~right
    jm = j[mid]
    dxm = x[mid] - xs[jm]
    wj = widths[jm]
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(wj > 0, (Fs[jm + 1] - Fs[jm]) / wj, 0.0)
    out[mid] = Gs[jm] + Fs[jm] * dxm + 0.5 * slope * dxm ** 2
    return out


def quantiles_to_density(m: QuantileMeasure, K: int, support: tuple[float, float] | None = None) -> DensityOnGrid:
    """Project the reconstructed density onto K cells with hat-function weights.

    Mass and first moment are preserved exactly as long as the reconstructed
    support lies between the first and last cell centers.
    """
    xs, Fs = _cdf_breakpoints(m.q)
    if support is None:
        span = max(xs[-1] - xs[0], 1e-12)
        pad = 2.0 * span / max(K - 4, 1)
        support = (xs[0] - pad, xs[-1] + pad)
    x_min, x_max = map(float, support)
    dx = (x_max - x_min) / K
    c = x_min + (np.arange(K) + 0.5) * dx
    G = _cdf_integral(xs, Fs, c)
    D = np.concatenate([[0.0], np.diff(G) / dx, [1.0]])
    mass = np.diff(D)
    mass = np.maximum(mass, 0.0)
    rho = mass / (np.sum(mass) * dx)
    return DensityOnGrid(x_min, x_max, rho)


# ----------------------------------------------------------- CSV


def write_density_csv(path, d: DensityOnGrid):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "rho"])
        for x, r in zip(d.centers, d.rho):
            w.writerow([repr(float(x)), repr(float(r))])


def read_density_csv(path) -> DensityOnGrid:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["x", "rho"]:
        raise InputError(f"{path}: expected header x,rho")
    try:
        x = np.array([float(r[0]) for r in rows[1:]])
        rho = np.array([float(r[1]) for r in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise InputError(f"{path}: unreadable row: {exc}") from None
    if len(x) < 2:
        raise InputError(f"{path}: need at least two cells")
    dx = (x[-1] - x[0]) / (len(x) - 1)
    return DensityOnGrid(x[0] - dx / 2, x[-1] + dx / 2, rho)


def write_quantiles_csv(path, m: QuantileMeasure):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["w", "q"])
        for wi, qi in zip(m.w, m.q):
            w.writerow([repr(float(wi)), repr(float(qi))])


def read_quantiles_csv(path) -> QuantileMeasure:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["w", "q"]:
        raise InputError(f"{path}: expected header w,q")
    try:
        q = np.array([float(r[1]) for r in rows[1:]])
        w = np.array([float(r[0]) for r in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise InputError(f"{path}: unreadable row: {exc}") from None
    if not np.allclose(w, w_grid(len(q)), atol=1e-12):
        raise InputError(f"{path}: quantile levels are not the midpoint grid")
    return QuantileMeasure(q)
