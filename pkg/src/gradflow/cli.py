"""Command-line entry point: run, verify, sweep, list-catalog.

Exit codes: 0 pass, 1 verification failure, 2 config or input error,
3 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import euclidean as euc
from . import evi
from . import wasserstein1d as w1
from .config import (
    CHECKS,
    RunConfig,
    analytic_minimizer,
    build_functional,
    build_grid,
    build_space,
    build_u0,
    exact_flow,
    load_config,
)
from .errors import GradFlowError, InputError, PreconditionError, SchemeError
from .metric_core import DiscreteTrajectory, TimeGrid, interpolate, PIECEWISE_LINEAR
from .mms import (
    RelaxedSchemeParams,
    exact_trajectory,
    fit_slope,
    mms_run,
    run_manifest,
    sup_error,
    write_trajectory_csv,
)

log = logging.getLogger("gradflow")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _params(cfg: RunConfig) -> RelaxedSchemeParams:
    return RelaxedSchemeParams(cfg.eta, cfg.inner.max_iter, cfg.inner.tol_abs)


# ------------------------------------------------------------ points I/O


def write_points_csv(path: Path, traj: DiscreteTrajectory) -> None:
    vecs = [traj.space.to_vector(p) for p in traj.points]
    prefix = "q" if isinstance(traj.space, w1.WassersteinSpace) else "x"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "t"] + [f"{prefix}{i}" for i in range(len(vecs[0]))])
        for n, v in enumerate(vecs):
            w.writerow([n, repr(float(traj.grid.t(n)))] + [repr(float(x)) for x in v])


def read_points_csv(path: Path, space, tau: float) -> DiscreteTrajectory:
    if not path.exists():
        raise FileNotFoundError(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or rows[0][:2] != ["n", "t"]:
        raise InputError(f"{path}: not a points file")
    try:
        pts = [space.from_vector(np.array([float(x) for x in r[2:]])) for r in rows[1:]]
    except (ValueError, InputError) as exc:
        raise InputError(f"{path}: unreadable point: {exc}") from None
    return DiscreteTrajectory(TimeGrid(tau, len(pts) - 1), pts, space=space)


# ------------------------------------------------------------------ run


def _trajectory(cfg: RunConfig, tau: float | None = None, M: int | None = None):
    if M is not None:
        cfg = cfg.model_copy(update={"M": M})
    space, f, u0, grid = build_space(cfg), build_functional(cfg), build_u0(cfg), build_grid(cfg, tau)
    if cfg.scheme == "exact":
        flow = exact_flow(cfg)
        if flow is None:
            raise InputError("scheme 'exact' needs a quadratic functional on the Euclidean carrier")
        return exact_trajectory(space, lambda _u, t: flow(t), u0, grid), [], f
    traj, certs = mms_run(space, f, u0, grid, _params(cfg))
    return traj, certs, f


def _snapshots(cfg: RunConfig, traj: DiscreteTrajectory, out: Path) -> list[dict]:
    if cfg.snapshots is None or cfg.carrier != "wasserstein1d":
        return []
    written = []
    for k, t in enumerate(cfg.snapshots.times):
        try:
            i = traj.as_curve().index_of(t, atol=1e-9)
        except GradFlowError:
            raise InputError(f"snapshot time {t} is not on the time grid") from None
        name = f"density_{k:03d}.csv"
        w1.write_density_csv(out / name, w1.quantiles_to_density(traj.points[i], cfg.snapshots.K, cfg.snapshots.support))
        written.append({"file": name, "t": float(traj.grid.t(i))})
    return written


def cmd_run(cfg: RunConfig) -> int:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    f = build_functional(cfg)
    extra = {"config": cfg.resolved(), "scheme": cfg.scheme}
    try:
        traj, certs, f = _trajectory(cfg)
    except SchemeError as exc:
        partial = exc.partial
        if partial is not None:
            write_trajectory_csv(out / "trajectory.csv", partial, f)
            write_points_csv(out / "points.csv", partial)
        grid = partial.grid if partial is not None else build_grid(cfg)
        certs = [exc.certificate] if exc.certificate is not None else []
        man = run_manifest(grid, _params(cfg), f, cfg.carrier, certs, {**extra, "status": "failed", "error": str(exc)})
        _dump_json(out / "manifest.json", man)
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    write_trajectory_csv(out / "trajectory.csv", traj, f, certs)
    write_points_csv(out / "points.csv", traj)
    snaps = _snapshots(cfg, traj, out)
    man = run_manifest(traj.grid, _params(cfg), f, cfg.carrier, certs, {**extra, "status": "ok", "snapshots": snaps})
    _dump_json(out / "manifest.json", man)
    print(f"wrote {traj.grid.n_steps + 1} states to {out}")
    return EXIT_OK


# --------------------------------------------------------------- verify


def verification_report(cfg: RunConfig, traj: DiscreteTrajectory, checks) -> evi.VerificationReport:
    f, space = build_functional(cfg), traj.space
    lam, tau = f.lam, traj.grid.tau
    exact = cfg.scheme == "exact"
    rng = np.random.default_rng(cfg.seed)
    tests = [traj.points[0], traj.points[-1]] + [evi.random_point(space, rng) for _ in range(cfg.verify.n_test_points)]
    tests = [v for v in tests if f.in_domain(v)]
    if exact:
        ecfg = evi.EviCheckConfig(lam, tests)
        ctol, ckind = 1e-10, "analytic"
    else:
        ecfg = evi.EviCheckConfig(lam, tests, tau=tau, slack_per_tau=cfg.verify.slack_per_tau)
        ctol, ckind = cfg.verify.slack_per_tau * tau, "discrete"
    curve = traj.as_curve()
    rep = evi.VerificationReport()
    if "evi_prime" in checks:
        rep.add(evi.evi_prime_residual(curve, f, ecfg, space))
    if "contraction" in checks:
        if len(curve) > 1:
            c1, c2 = evi.shifted_pair(curve)
            rep.add(evi.contraction_check(c1, c2, lam, space, ctol, ckind))
        else:
            rep.add(evi.skipped("contraction", "single-state trajectory", ckind))
    if "regularization" in checks:
        rep.add(evi.regularization_check(curve, f, ecfg, space))
    if "asymptotic" in checks:
        ub = analytic_minimizer(cfg)
        if ub is None and lam > 0:
            ub, s = evi.find_minimizer(space, f, traj.points[-1])
        rep.add(evi.asymptotic_check(curve, f, ecfg, space, minimizer=ub))
    if "energy_identity" in checks:
        rep.add(evi.energy_identity_check(traj, f, space))
    if "geodesic_convexity" in checks:
        rep.add(evi.geodesic_convexity_probe(f, space, lam, trials=cfg.verify.trials, seed=cfg.seed))
    if "curvature" in checks:
        rep.add(evi.curvature_probes(space, trials=cfg.verify.trials, seed=cfg.seed))
    return rep


def cmd_verify(cfg: RunConfig, checks) -> int:
    out = Path(cfg.output)
    try:
        traj = read_points_csv(out / "points.csv", build_space(cfg), cfg.tau)
    except FileNotFoundError:
        print(f"missing artifact: {out / 'points.csv'} (run first)", file=sys.stderr)
        return EXIT_CONFIG
    rep = verification_report(cfg, traj, checks)
    rep.write_json(out / "report.json")
    rep.write_csv(out / "report.csv")
    for r in rep.records:
        status = "skip" if not r.applicable else ("pass" if r.passed else "FAIL")
        line = f"{status:4s} {r.name:32s} max_violation={r.max_violation:.3e} tol={r.tolerance:.3e}"
        if not r.passed:
            line += f" worst={r.worst_witness}"
        print(line)
    return EXIT_OK if rep.passed else EXIT_FAIL


# ---------------------------------------------------------------- sweep


def sweep_table(cfg: RunConfig, taus=None, Ms=None, reference: str = "exact"):
    if taus is not None and Ms is not None:
        raise InputError("sweep over either tau or M, not both")
    axis = "tau" if taus is not None else "M"
    values = list(taus if taus is not None else Ms)
    if len(values) < 2:
        raise InputError("a sweep needs at least two points")
    # coarse to fine
    values = sorted(values, reverse=(axis == "tau"))
    runs = {}
    for v in values:
        traj, _, _ = _trajectory(cfg, tau=v) if axis == "tau" else _trajectory(cfg, M=v)
        runs[v] = traj.with_mode(PIECEWISE_LINEAR)
    if reference == "exact":
        flow = exact_flow(cfg)
        if flow is None:
            raise InputError("no closed-form flow for this config; use reference 'finest'")
        errs = {v: sup_error(runs[v], flow) for v in values}
    else:
        ref = runs[values[-1]]
        values = values[:-1]
        errs = {}
        for v in values:
            tr = runs[v]
            if axis == "tau":
                errs[v] = max(tr.space.dist(p, interpolate(ref, tr.grid.t(n))) for n, p in enumerate(tr.points))
            else:
                errs[v] = max(w1.w2_mixed(p, q) for p, q in zip(tr.points, ref.points))
    hs = values if axis == "tau" else [1.0 / v for v in values]
    slope = fit_slope(hs, [errs[v] for v in values])
    rows = []
    for k, v in enumerate(values):
        ratio = "" if k == 0 else repr(errs[values[k - 1]] / errs[v])
        rows.append([repr(v) if axis == "tau" else str(v), repr(errs[v]), ratio, repr(slope)])
    return axis, rows, slope


def cmd_sweep(cfg: RunConfig, taus, Ms) -> int:
    sw = cfg.sweep
    if taus is None and Ms is None:
        if sw is None:
            raise InputError("no sweep values: pass --taus/--Ms or add a 'sweep' section")
        taus, Ms = sw.taus, sw.Ms
    reference = sw.reference if sw is not None else "exact"
    axis, rows, slope = sweep_table(cfg, taus, Ms, reference)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    header = [axis, "sup_error", "ratio", "fitted_slope"]
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(",".join(header))
    for r in rows:
        print(",".join(r))
    return EXIT_OK


# --------------------------------------------------------- list-catalog


def cmd_list() -> int:
    print("euclidean functionals:")
    for name, (desc, _) in sorted(euc.CATALOG.items()):
        print(f"  {name:14s} {desc}")
    print("wasserstein1d energy parts:")
    print("  U (internal):    " + ", ".join(sorted(w1.INTERNAL)) + "   power takes params {\"m\": m > 1}")
    print("  V (potential):   " + ", ".join(sorted(w1.POTENTIALS)))
    print("  W (interaction): " + ", ".join(sorted(w1.INTERACTIONS)))
    print("initial data: vector, gaussian, uniform, barenblatt, density_csv")
    print("checks: " + ", ".join(CHECKS))
    return EXIT_OK


# ------------------------------------------------------------------ main


def _floats(s: str):
    return [float(x) for x in s.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gradflow", description="Minimizing-movement flows and EVI verification.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "verify", "sweep"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, type=Path)
        s.add_argument("--out", default=None)
        s.add_argument("--seed", type=int, default=None)
        if name == "verify":
            s.add_argument("--checks", default=None, help="comma-separated subset of: " + ",".join(CHECKS))
        if name == "sweep":
            s.add_argument("--taus", type=_floats, default=None)
            s.add_argument("--Ms", type=lambda s: [int(x) for x in s.split(",") if x.strip()], default=None)
    sub.add_parser("list-catalog")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "list-catalog":
        return cmd_list()
    try:
        cfg = load_config(args.config, seed=args.seed, output=args.out)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "verify":
            checks = cfg.verify.checks
            if args.checks is not None:
                checks = [c.strip() for c in args.checks.split(",") if c.strip()]
                bad = sorted(set(checks) - set(CHECKS))
                if bad:
                    raise InputError(f"unknown checks {bad}; known: {list(CHECKS)}")
            return cmd_verify(cfg, checks)
        return cmd_sweep(cfg, args.taus, args.Ms)
    except (InputError, PreconditionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SchemeError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
