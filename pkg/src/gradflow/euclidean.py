"""R^d carrier, a catalog of lambda-convex test functionals and reference flows."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalError, PreconditionError
from .metric_core import FunctionalDescriptor, e_lambda


def as_point(x) -> np.ndarray:
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.ndim != 1:
        raise InputError(f"Euclidean points are vectors, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise InputError("Euclidean points must have finite entries")
    return p


class EuclideanSpace:
    """R^d with the Euclidean distance.  ``dim=None`` accepts any dimension."""

    name = "euclidean"

    def __init__(self, dim: int | None = None):
        self.dim = dim

    def _pair(self, x, y):
        x, y = as_point(x), as_point(y)
        if x.shape != y.shape or (self.dim is not None and x.shape[0] != self.dim):
            raise InputError(f"dimension mismatch: {x.shape} vs {y.shape}")
        return x, y

    def dist(self, x, y) -> float:
        x, y = self._pair(x, y)
        return float(np.linalg.norm(x - y))

    def combine(self, a, b, s: float):
        a, b = self._pair(a, b)
        return (1.0 - s) * a + s * b

    def to_vector(self, x) -> np.ndarray:
        return as_point(x)

    def from_vector(self, v) -> np.ndarray:
        return as_point(v)

    def metric_gradient_norm(self, g) -> float:
        return float(np.linalg.norm(g))

    def sampler(self, seed: int = 0, n_random: int = 32, f: FunctionalDescriptor | None = None):
        """Probe set: +-coordinate directions, seeded random unit directions,
        and the descent direction when ``f`` exposes a gradient."""
        def sample(v, r):
            v = as_point(v)
            d = v.shape[0]
            rng = np.random.default_rng(seed)
            dirs = [np.eye(d)[i] * sgn for i in range(d) for sgn in (1.0, -1.0)]
            R = rng.normal(size=(n_random, d))
            dirs.extend(R / np.linalg.norm(R, axis=1, keepdims=True))
            if f is not None and f.gradient is not None:
                g = np.asarray(f.gradient(v), dtype=float)
                ng = np.linalg.norm(g)
                if ng > 0:
                    dirs.append(-g / ng)
            for u in dirs:
                yield v + r * u
        return sample


def jacobi_eigh(A, tol: float = 1e-14, max_sweeps: int = 100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ascending eigenvalues ``w`` and orthonormal columns ``V`` with
    ``A = V diag(w) V^T``.
    """
    A = np.array(A, dtype=float, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError("Jacobi needs a square matrix")
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max(initial=0.0))):
        raise InputError("Jacobi needs a symmetric matrix")
    n = A.shape[0]
    V = np.eye(n)
    scale = max(np.linalg.norm(A), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q], J[q, p] = s, -s
                A = J.T @ A @ J
                V = V @ J
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


@dataclass(frozen=True)
class QuadraticFunctional:
    """phi(x) = 1/2 <Ax, x> + <b, x> + c with symmetric A."""

    A: np.ndarray
    b: np.ndarray
    c: float = 0.0
    eig: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.shape != (b.shape[0], b.shape[0]):
            raise InputError(f"A has shape {A.shape} but b has length {b.shape[0]}")
        A = 0.5 * (A + A.T) if np.allclose(A, A.T, atol=1e-12) else A
        w, V = jacobi_eigh(A)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "eig", (w, V))

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    @property
    def lam(self) -> float:
        return float(self.eig[0][0])

    def value(self, x) -> float:
        x = as_point(x)
        return float(0.5 * x @ self.A @ x + self.b @ x + self.c)

    def gradient(self, x) -> np.ndarray:
        return self.A @ as_point(x) + self.b

    def hessian(self, x) -> np.ndarray:
        return self.A

    def minimizer(self) -> np.ndarray | None:
        """The unique minimizer when A is positive definite."""
        if self.lam <= 0:
            return None
        return np.linalg.solve(self.A, -self.b)

    def descriptor(self, name: str = "quadratic") -> FunctionalDescriptor:
        return FunctionalDescriptor(
            value=self.value,
            lam=self.lam,
            slope_exact=lambda x: float(np.linalg.norm(self.gradient(x))),
            gradient=self.gradient,
            hessian=self.hessian,
            name=name,
            params={"A": self.A.tolist(), "b": self.b.tolist(), "c": self.c},
        )


def dist(x, y) -> float:
    return EuclideanSpace().dist(x, y)


def exact_flow_quadratic(q: QuadraticFunctional, u0, t: float) -> np.ndarray:
    """Solution of u' = -(Au + b) at time t, via the eigenbasis of A.

    In eigen-coordinates y' = -w y - beta, so y(t) = e^{-wt} y0 - beta E_{-w}(t);
    the integral weight handles zero eigenvalues (affine drift) without a branch.
    """
    u0 = as_point(u0)
    if u0.shape[0] != q.dim:
        raise InputError(f"u0 has dimension {u0.shape[0]}, functional has {q.dim}")
    if t < 0:
        raise InputError(f"t must be nonnegative, got {t}")
    w, V = q.eig
    y0 = V.T @ u0
    beta = V.T @ q.b
    y = np.array([math.exp(-wi * t) * yi - bi * e_lambda(-wi, t) for wi, yi, bi in zip(w, y0, beta)])
    return V @ y


def ode_oracle(gradient, u0, t: float, h: float) -> np.ndarray:
    """Classical RK4 for u' = -grad phi(u); global error O(h^4) on smooth flows."""
    u = as_point(u0).copy()
    if t < 0 or h <= 0:
        raise InputError("ode_oracle needs t >= 0 and h > 0")
    if t == 0:
        return u
    n = max(1, int(math.ceil(t / h - 1e-12)))
    dt = t / n

    def rhs(x):
        g = np.asarray(gradient(x), dtype=float)
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient at {x}")
        return -g

    for _ in range(n):
        k1 = rhs(u)
        k2 = rhs(u + 0.5 * dt * k1)
        k3 = rhs(u + 0.5 * dt * k2)
        k4 = rhs(u + dt * k3)
        u = u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return u


def resolvent_quadratic(q: QuadraticFunctional, tau: float, v) -> np.ndarray:
    """(I + tau grad phi)^{-1} v, i.e. the solution of (I + tau A) U = v - tau b."""
    if tau <= 0:
        raise InputError("tau must be positive")
    if 1.0 + tau * q.lam <= 0:
        raise PreconditionError(
            f"I + tau*A is singular or indefinite: need 1/tau > -lambda (tau={tau}, lambda={q.lam})"
        )
    v = as_point(v)
    return np.linalg.solve(np.eye(q.dim) + tau * q.A, v - tau * q.b)


# ---------------------------------------------------------------- catalog


def double_well(dim: int = 1) -> FunctionalDescriptor:
    """sum (x_i^2 - 1)^2 / 4; Hessian minimum -1 at the origin."""
    def value(x):
        x = as_point(x)
        return float(np.sum((x * x - 1.0) ** 2) / 4.0)

    def gradient(x):
        x = as_point(x)
        return x ** 3 - x

    def hessian(x):
        return np.diag(3.0 * as_point(x) ** 2 - 1.0)

    return FunctionalDescriptor(
        value=value, lam=-1.0, gradient=gradient, hessian=hessian,
        slope_exact=lambda x: float(np.linalg.norm(gradient(x))),
        name="double_well", params={"dim": dim},
    )


def smoothed_abs(eps: float = 0.1, dim: int = 1) -> FunctionalDescriptor:
    """sum sqrt(x_i^2 + eps^2) - eps, a convex (lambda = 0) smoothing of |x|_1."""
    if eps <= 0:
        raise InputError("eps must be positive")

    def value(x):
        x = as_point(x)
        return float(np.sum(np.sqrt(x * x + eps * eps) - eps))

    def gradient(x):
        x = as_point(x)
        return x / np.sqrt(x * x + eps * eps)

    def hessian(x):
        x = as_point(x)
        return np.diag(eps * eps / (x * x + eps * eps) ** 1.5)

    return FunctionalDescriptor(
        value=value, lam=0.0, gradient=gradient, hessian=hessian,
        slope_exact=lambda x: float(np.linalg.norm(gradient(x))),
        name="smoothed_abs", params={"eps": eps, "dim": dim},
    )


def constant(c: float = 0.0, dim: int = 1) -> FunctionalDescriptor:
    return QuadraticFunctional(np.zeros((dim, dim)), np.zeros(dim), c).descriptor("constant")


def quadratic(A, b=None, c: float = 0.0) -> FunctionalDescriptor:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.zeros(A.shape[0]) if b is None else b
    return QuadraticFunctional(A, b, c).descriptor("quadratic")


CATALOG = {
    "quadratic": ("1/2<Ax,x> + <b,x> + c; lambda = min eig(A)", quadratic),
    "double_well": ("sum (x_i^2-1)^2/4; lambda = -1", double_well),
    "smoothed_abs": ("sum sqrt(x_i^2+eps^2) - eps; lambda = 0", smoothed_abs),
    "constant": ("phi = c; lambda = 0", constant),
}


def make_functional(name: str, **params) -> FunctionalDescriptor:
    try:
        factory = CATALOG[name][1]
    except KeyError:
        raise InputError(f"unknown Euclidean functional {name!r}; known: {sorted(CATALOG)}") from None
    return factory(**params)


def quadratic_from_descriptor(f: FunctionalDescriptor) -> QuadraticFunctional | None:
    if f.name in ("quadratic", "constant") and "A" in f.params:
        return QuadraticFunctional(np.asarray(f.params["A"]), np.asarray(f.params["b"]), f.params.get("c", 0.0))
    return None
