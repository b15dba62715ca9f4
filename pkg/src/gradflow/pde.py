"""Reference solvers for the PDEs generated by the Wasserstein flows.

The flows of alpha*U + V in one dimension solve

    rho_t = d/dx ( d/dx P(rho) + rho V'(x) ),   P(r) = r U'(r) - U(r),

(P = r for the entropy, P = r^m for the power cost).  ``fv_solve`` is a
cell-centred finite-volume discretization with zero-flux walls and a
linearized backward-Euler step; it knows nothing about quantiles and
serves as an independent oracle for the JKO solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.linalg import solve_banded

from .errors import InputError
from .wasserstein1d import DensityOnGrid, QuantileMeasure, w_grid


@dataclass
class FVSolution:
    times: list
    densities: list  # DensityOnGrid per saved time

    def at(self, t: float) -> DensityOnGrid:
        i = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        return self.densities[i]


def fv_solve(pressure, dpressure, dV, rho0: DensityOnGrid, t0: float, t_end: float, dt: float, save_times) -> FVSolution:
    K, dx = rho0.K, rho0.dx
    x = rho0.centers
    faces = rho0.edges[1:-1]
    dVf = np.asarray(dV(faces), dtype=float) if dV is not None else np.zeros(K - 1)
    rho = np.array(rho0.rho, dtype=float)
    save = sorted(float(s) for s in save_times)
    out_t, out_d = [], []
    t = t0
    n_steps = int(round((t_end - t0) / dt))
    if n_steps < 0:
        raise InputError("t_end must not precede t0")
    lam = dt / dx

    def snapshot(r, tt):
        r = np.maximum(r, 0.0)
        out_t.append(tt)
        out_d.append(DensityOnGrid(rho0.x_min, rho0.x_max, r / (np.sum(r) * dx)))

    while save and save[0] <= t + 1e-12:
        snapshot(rho, save.pop(0))
    for n in range(n_steps):
        P, dP = pressure(rho), dpressure(rho)
        a = P - dP * rho
        b = dP
        # flux at face k+1/2: (P_{k+1} - P_k)/dx + (rho_k + rho_{k+1})/2 * V'
        diag = np.ones(K)
        upper = np.zeros(K)  # coefficient of rho_{k+1} in row k, stored at [k+1]
        lower = np.zeros(K)  # coefficient of rho_{k-1} in row k, stored at [k-1]
        rhs = rho.copy()
        cdiff = lam / dx
        # face between k and k+1 contributes to rows k (+flux) and k+1 (-flux)
        k = np.arange(K - 1)
        # row k: - lam * F_{k+1/2}
        diag[k] += cdiff * b[k] - lam * 0.5 * dVf
        upper[k + 1] += -cdiff * b[k + 1] - lam * 0.5 * dVf
        rhs[k] += cdiff * (a[k + 1] - a[k])
        # row k+1: + lam * F_{k+1/2}
        diag[k + 1] += cdiff * b[k + 1] + lam * 0.5 * dVf
        lower[k] += -cdiff * b[k] + lam * 0.5 * dVf
        rhs[k + 1] -= cdiff * (a[k + 1] - a[k])
        ab = np.vstack([upper, diag, lower])
        rho = solve_banded((1, 1), ab, rhs)
        t = t0 + (n + 1) * dt
        while save and save[0] <= t + 1e-9:
            snapshot(rho, save.pop(0))
    return FVSolution(out_t, out_d)


def fokker_planck_fv(rho0: DensityOnGrid, dV, t_end: float, dt: float, save_times) -> FVSolution:
    return fv_solve(lambda r: r, lambda r: np.ones_like(r), dV, rho0, 0.0, t_end, dt, save_times)


def heat_fv(rho0: DensityOnGrid, t_end: float, dt: float, save_times) -> FVSolution:
    return fv_solve(lambda r: r, lambda r: np.ones_like(r), None, rho0, 0.0, t_end, dt, save_times)


def porous_fv(rho0: DensityOnGrid, m: float, t0: float, t_end: float, dt: float, save_times) -> FVSolution:
    return fv_solve(
        lambda r: np.maximum(r, 0.0) ** m, lambda r: m * np.maximum(r, 0.0) ** (m - 1.0),
        None, rho0, t0, t_end, dt, save_times,
    )


def density_moments(d: DensityOnGrid) -> tuple[float, float]:
    x = d.centers
    mean = float(np.sum(d.rho * x) * d.dx)
    # piecewise-constant cells carry an extra dx^2/12 of spread each
    var = float(np.sum(d.rho * (x - mean) ** 2) * d.dx + d.dx ** 2 / 12.0)
    return mean, var


# ------------------------------------------------------------ Barenblatt


@dataclass(frozen=True)
class Barenblatt:
    """Unit-mass source solution of rho_t = (rho^m)_xx on the line.

    rho(x, t) = t^-a (C - k x^2 t^-2a)_+^(1/(m-1)),  a = 1/(m+1),
    k = (m-1) / (2 m (m+1)), and C fixed by unit mass.
    """

    m: float = 2.0

    @property
    def alpha(self) -> float:
        return 1.0 / (self.m + 1.0)

    @property
    def k(self) -> float:
        return (self.m - 1.0) / (2.0 * self.m * (self.m + 1.0))

    @property
    def C(self) -> float:
        # mass = C^p sqrt(C/k) B(1/2, p+1) with p = 1/(m-1)
        p = 1.0 / (self.m - 1.0)
        B = special.beta(0.5, p + 1.0)
        return (math.sqrt(self.k) / B) ** (1.0 / (p + 0.5))

    def half_width(self, t: float) -> float:
        return math.sqrt(self.C / self.k) * t ** self.alpha

    def density(self, x, t: float):
        x = np.asarray(x, dtype=float)
        p = 1.0 / (self.m - 1.0)
        base = np.maximum(self.C - self.k * x ** 2 * t ** (-2 * self.alpha), 0.0)
        return t ** (-self.alpha) * base ** p

    def quantiles(self, t: float, M: int) -> QuantileMeasure:
        p = 1.0 / (self.m - 1.0)
        u = 2.0 * w_grid(M) - 1.0
        y = np.sign(u) * np.sqrt(special.betaincinv(0.5, p + 1.0, np.abs(u)))
        return QuantileMeasure(self.half_width(t) * y)

    def cell_density(self, t: float, x_min: float, x_max: float, K: int, sub: int = 16) -> DensityOnGrid:
        return DensityOnGrid.from_function(lambda x: self.density(x, t), x_min, x_max, K, sub=sub)
