"""Versioned JSON run configuration.

Unknown keys are rejected everywhere so that a config file fully
determines the numbers it produces.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import euclidean as euc
from . import wasserstein1d as w1
from .errors import InputError
from .metric_core import FunctionalDescriptor, TimeGrid
from .mms import check_feasible
from .pde import Barenblatt

SCHEMA_VERSION = 1
CHECKS = ("evi_prime", "contraction", "regularization", "asymptotic", "energy_identity",
          "geodesic_convexity", "curvature")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Part(_Strict):
    name: str
    params: dict = Field(default_factory=dict)


class EnergyConfig(_Strict):
    alpha1: float = 0.0
    alpha2: float = 0.0
    alpha3: float = 0.0
    U: Optional[Part] = None
    V: Optional[Part] = None
    W: Optional[Part] = None


class FunctionalConfig(_Strict):
    name: Optional[str] = None
    params: dict = Field(default_factory=dict)
    energy: Optional[EnergyConfig] = None

    @model_validator(mode="after")
    def _one_of(self):
        if (self.name is None) == (self.energy is None):
            raise ValueError("functional needs exactly one of 'name' (Euclidean catalog) or 'energy'")
        return self


class VectorU0(_Strict):
    kind: Literal["vector"]
    value: list[float]


class GaussianU0(_Strict):
    kind: Literal["gaussian"]
    mean: float
    var: float = Field(gt=0)


class UniformU0(_Strict):
    kind: Literal["uniform"]
    a: float
    b: float


class BarenblattU0(_Strict):
    kind: Literal["barenblatt"]
    t0: float = Field(gt=0)
    m: float = Field(default=2.0, gt=1)


class DensityU0(_Strict):
    kind: Literal["density_csv"]
    path: str


U0 = Annotated[Union[VectorU0, GaussianU0, UniformU0, BarenblattU0, DensityU0], Field(discriminator="kind")]


class InnerConfig(_Strict):
    max_iter: int = Field(default=100, ge=1)
    tol_abs: float = Field(default=1e-9, ge=0)


class SnapshotConfig(_Strict):
    times: list[float]
    K: int = Field(default=200, ge=2)
    support: Optional[tuple[float, float]] = None


class VerifyConfig(_Strict):
    checks: list[str] = Field(default_factory=lambda: list(CHECKS))
    n_test_points: int = Field(default=4, ge=0)
    slack_per_tau: float = Field(default=5.0, ge=0)
    trials: int = Field(default=200, ge=1)

    @model_validator(mode="after")
    def _known(self):
        bad = sorted(set(self.checks) - set(CHECKS))
        if bad:
            raise ValueError(f"unknown checks {bad}; known: {list(CHECKS)}")
        return self


class SweepConfig(_Strict):
    taus: Optional[list[float]] = None
    Ms: Optional[list[int]] = None
    reference: Literal["exact", "finest"] = "exact"

    @model_validator(mode="after")
    def _one_axis(self):
        if (self.taus is None) == (self.Ms is None):
            raise ValueError("sweep needs exactly one of 'taus' or 'Ms'")
        return self


class RunConfig(_Strict):
    schema_version: Literal[1]
    carrier: Literal["euclidean", "wasserstein1d"]
    functional: FunctionalConfig
    u0: U0
    tau: float = Field(gt=0)
    T: float = Field(ge=0)
    eta: float = Field(default=0.0, ge=0)
    M: int = Field(default=400, ge=2)
    seed: int = 0
    scheme: Literal["mms", "exact"] = "mms"
    inner: InnerConfig = InnerConfig()
    snapshots: Optional[SnapshotConfig] = None
    verify: VerifyConfig = VerifyConfig()
    sweep: Optional[SweepConfig] = None
    output: str = "out"

    @model_validator(mode="after")
    def _consistent(self):
        if self.carrier == "euclidean" and self.functional.name is None:
            raise ValueError("Euclidean carrier needs a catalog functional 'name'")
        if self.carrier == "wasserstein1d" and self.functional.energy is None:
            raise ValueError("wasserstein1d carrier needs an 'energy' functional")
        if self.carrier == "euclidean" and self.u0.kind != "vector":
            raise ValueError("Euclidean carrier needs a 'vector' initial datum")
        if self.carrier == "wasserstein1d" and self.u0.kind == "vector":
            raise ValueError("wasserstein1d carrier needs a measure initial datum")
        n = round(self.T / self.tau)
        if abs(n * self.tau - self.T) > 1e-9 * max(1.0, self.T):
            raise ValueError(f"T={self.T} is not a multiple of tau={self.tau}")
        return self

    def resolved(self) -> dict:
        return self.model_dump(mode="json")


def load_config(path, seed: int | None = None, output: str | None = None) -> RunConfig:
    """Parse and validate; every failure surfaces as InputError or PreconditionError."""
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise InputError("config must be a JSON object")
    if seed is not None:
        raw["seed"] = seed
    if output is not None:
        raw["output"] = output
    base = Path(path).parent
    u0 = raw.get("u0")
    if isinstance(u0, dict) and u0.get("kind") == "density_csv" and "path" in u0:
        u0["path"] = str((base / u0["path"]).resolve()) if not Path(u0["path"]).is_absolute() else u0["path"]
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise InputError(_fmt(exc)) from None
    f = build_functional(cfg)
    check_feasible(cfg.tau, f.lam, cfg.eta)
    return cfg


def _fmt(exc: ValidationError) -> str:
    lines = []
    for e in exc.errors():
        loc = ".".join(str(x) for x in e["loc"])
        lines.append(f"{loc or '<root>'}: {e['msg']}")
    return "invalid config: " + "; ".join(lines)


def _part(table: dict, part: Part | None, label: str):
    if part is None:
        return None
    try:
        factory = table[part.name]
    except KeyError:
        raise InputError(f"unknown {label} {part.name!r}; known: {sorted(table)}") from None
    try:
        return factory(**part.params)
    except TypeError as exc:
        raise InputError(f"bad parameters for {label} {part.name!r}: {exc}") from None


def energy_spec(e: EnergyConfig) -> w1.EnergySpec:
    return w1.EnergySpec(
        e.alpha1, e.alpha2, e.alpha3,
        _part(w1.INTERNAL, e.U, "internal energy"),
        _part(w1.POTENTIALS, e.V, "potential"),
        _part(w1.INTERACTIONS, e.W, "interaction"),
    )


def build_functional(cfg: RunConfig) -> FunctionalDescriptor:
    if cfg.carrier == "euclidean":
        params = dict(cfg.functional.params)
        dim = len(cfg.u0.value)
        if cfg.functional.name in ("double_well", "smoothed_abs", "constant"):
            params.setdefault("dim", dim)
        try:
            return euc.make_functional(cfg.functional.name, **params)
        except TypeError as exc:
            raise InputError(f"bad parameters for {cfg.functional.name!r}: {exc}") from None
    spec = energy_spec(cfg.functional.energy)
    return w1.energy_descriptor(spec)


def build_space(cfg: RunConfig):
    if cfg.carrier == "euclidean":
        return euc.EuclideanSpace(len(cfg.u0.value))
    return w1.WassersteinSpace(cfg.M)


def build_u0(cfg: RunConfig):
    u = cfg.u0
    if u.kind == "vector":
        return euc.as_point(u.value)
    if u.kind == "gaussian":
        return w1.gaussian(u.mean, u.var, cfg.M)
    if u.kind == "uniform":
        return w1.uniform(u.a, u.b, cfg.M)
    if u.kind == "barenblatt":
        return Barenblatt(u.m).quantiles(u.t0, cfg.M)
    return w1.density_to_quantiles(w1.read_density_csv(u.path), cfg.M)


def build_grid(cfg: RunConfig, tau: float | None = None) -> TimeGrid:
    return TimeGrid.from_horizon(tau or cfg.tau, cfg.T)


def exact_flow(cfg: RunConfig):
    """Closed-form flow t -> S_t u0 when one is known, else None."""
    if cfg.carrier != "euclidean":
        return None
    q = euc.quadratic_from_descriptor(build_functional(cfg))
    if q is None:
        return None
    u0 = build_u0(cfg)
    return lambda t: euc.exact_flow_quadratic(q, u0, t)


def analytic_minimizer(cfg: RunConfig):
    if cfg.carrier == "euclidean":
        q = euc.quadratic_from_descriptor(build_functional(cfg))
        return None if q is None else q.minimizer()
    return None


__all__ = [
    "CHECKS", "SCHEMA_VERSION", "RunConfig", "load_config", "build_functional", "build_space",
    "build_u0", "build_grid", "exact_flow", "analytic_minimizer", "energy_spec",
]
