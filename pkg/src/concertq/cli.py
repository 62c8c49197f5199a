"""Command-line front door.

Thin adapters over the library: each command parses a scenario, runs one
library operation, writes JSON/CSV artifacts with 17-significant-digit
numbers, and prints a one-line summary.  Exit codes: 0 success, 1 domain or
hypothesis error, 2 I/O or parse error.  All randomness flows from --seed.

Times in emitted artifacts are in the scenario's original coordinates (the
ingestion shift by the earliest opening time is undone on output).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import equilibrium, exact_two, fluid, poa, sim
from .model import DomainError, ParseError, parse_scenario, pruned_scenario
from .serialize import csv_rows, fmt, to_json


def _load_scenario(path: str, seed: int | None, tol: float | None):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read scenario {path}: {exc}") from exc
    s = parse_scenario(text)
    opts = s.options
    if seed is not None:
        opts = replace(opts, seed=seed)
    if tol is not None:
        opts = replace(opts, tol=tol)
    return replace(s, options=opts)


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _summary(args, text: str) -> None:
    """One-line summary: stderr when the artifact itself goes to stdout."""
    print(text, file=sys.stderr if args.out is None else sys.stdout)


def _profile_csv_external(profile: fluid.ArrivalProfile, origin: float) -> str:
    return profile.shifted(origin).to_csv()


def _cmd_eq(args, multi: bool) -> int:
    s = _load_scenario(args.scenario, args.seed, args.tol)
    s, report = pruned_scenario(s)
    for msg in report.messages:
        print(f"note: {msg}", file=sys.stderr)
    eq = equilibrium.solve_multi(s) if multi else equilibrium.solve_single(s)
    origin = s.time_origin
    if args.format == "csv":
        _write(args.out, _profile_csv_external(eq.profile, origin))
    else:
        payload = eq.to_dict(time_origin=origin)
        payload["profile_csv"] = _profile_csv_external(eq.profile, origin)
        _write(args.out, to_json(payload))
    costs = ", ".join(
        f"c[{p}]={fmt(c)}" for p, c in sorted(eq.equilibrium_costs.items())
    )
    _summary(args, f"terminal_time={fmt(eq.terminal_time + origin)}, {costs}")
    return 0


def _cmd_verify(args) -> int:
    s = _load_scenario(args.scenario, args.seed, args.tol)
    try:
        text = Path(args.profile).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read profile {args.profile}: {exc}") from exc
    profile = fluid.ArrivalProfile.from_csv(text).shifted(-s.time_origin)
    report = equilibrium.verify_equilibrium(
        s, profile, grid_step=args.grid_step, tol=args.tol
    )
    _write(args.out, to_json(report.to_dict()))
    _summary(args, f"is_equilibrium={str(report.is_equilibrium).lower()}")
    return 0


def _cmd_poa(args) -> int:
    s = _load_scenario(args.scenario, args.seed, args.tol)
    report = poa.poa_multi(s)
    _write(args.out, to_json(report.to_dict()))
    _summary(args, report.summary_line())
    return 0


def _cmd_serve_count(args) -> int:
    result = poa.optimal_serve_count(args.l, args.mu, args.tau, args.k_max)
    _write(args.out, to_json(result.to_dict()))
    _summary(args, f"k_star={result.k_star}, tie={str(result.tie).lower()}")
    return 0


def _cmd_eq_two(args) -> int:
    eq = exact_two.solve_two_user(args.mu1, args.mu2, args.alpha, args.beta)
    diags = exact_two.two_user_diagnostics(eq, ode_dt=args.ode_dt)
    payload = eq.to_dict()
    payload["diagnostics"] = diags.to_dict()
    _write(args.out, to_json(payload))
    if args.trace:
        ts = np.linspace(eq.t_first, eq.t_last, args.trace_points)
        f = eq.density(ts)
        # routing is undefined where the density vanishes (the right support
        # endpoint); emit the rate share there
        p1 = np.where(f > 0, eq.routed_density(1, ts), eq.mu1 / eq.rate_sum)
        p1 = np.where(f > 0, p1 / np.where(f > 0, f, 1.0), eq.mu1 / eq.rate_sum)
        occupied1 = eq.queue_occupied_prob(1, ts)
        occupied2 = eq.queue_occupied_prob(2, ts)
        cost = (
            (eq.alpha + eq.beta) * (occupied1 / eq.mu1 - np.minimum(ts, 0.0))
            + eq.beta * ts
        )
        rows = zip(
            map(float, ts),
            map(float, f),
            map(float, p1),
            map(float, occupied1),
            map(float, occupied2),
            map(float, cost),
        )
        _write(args.trace, csv_rows(["t", "f", "p1", "P11", "P21", "cost"], rows))
    _summary(
        args,
        f"t_first={fmt(eq.t_first)}, t_last={fmt(eq.t_last)}, cost={fmt(eq.cost)}, "
        f"normalization_residual={fmt(diags.normalization_residual)}",
    )
    return 0


def _cmd_fluid(args) -> int:
    s = _load_scenario(args.scenario, args.seed, args.tol)
    if args.profile:
        try:
            text = Path(args.profile).read_text(encoding="utf-8")
        except OSError as exc:
            raise ParseError(f"cannot read profile {args.profile}: {exc}") from exc
        profile = fluid.ArrivalProfile.from_csv(text).shifted(-s.time_origin)
    else:
        s, _ = pruned_scenario(s)
        profile = equilibrium.solve_multi(s).profile
    origin = s.time_origin
    horizon = fluid.default_horizon(profile, s.queues)
    rows = []
    for q in s.queues:
        paths = {
            "cumulative_arrivals": profile.queue_cdf(q.id).refine(list(horizon)),
            "netflow": fluid.netflow(profile.queue_cdf(q.id), q, horizon),
            "queue_length": fluid.fluid_queue(profile, q, horizon),
            "busy_time": fluid.fluid_busy(profile, q, horizon),
            "virtual_wait": fluid.fluid_wait(profile, q, horizon),
        }
        for name, path in paths.items():
            for t, v in zip(path.times, path.values):
                rows.append((q.id, name, float(t + origin), float(v)))
    _write(args.out, csv_rows(["queue", "process", "t", "value"], rows))
    _summary(args, f"queues={s.n_queues}, window=[{fmt(horizon[0] + origin)}, {fmt(horizon[1] + origin)}]")
    return 0


def _cmd_simulate(args) -> int:
    s = _load_scenario(args.scenario, args.seed, args.tol)
    s, _ = pruned_scenario(s)
    eq = equilibrium.solve_multi(s)
    profile = eq.profile
    cfg = sim.SimConfig(
        n=args.n,
        seed=s.options.seed,
        service_dist=args.service,
        replications=args.reps,
    )
    grid = sim.default_grid(profile, s, points=args.grid_points)
    cfg = replace(cfg, grid=grid)
    report = sim.convergence_report(s, profile, cfg)

    origin = s.time_origin
    rows = []
    for rep in range(cfg.replications):
        events = sim.sample_arrivals(profile, cfg.n, cfg.seed, replication=rep)
        paths = sim.run_des(s, events, cfg, replication=rep)
        scaled = sim.scaled_paths(paths, cfg.n, grid)
        for q in s.queues:
            for j, t in enumerate(grid):
                rows.append(
                    (
                        rep,
                        float(t + origin),
                        q.id,
                        float(scaled.arrivals[q.id][j]),
                        float(scaled.queue_length[q.id][j]),
                        float(scaled.busy_time[q.id][j]),
                        float(scaled.virtual_wait[q.id][j]),
                    )
                )
    header = ["rep", "t", "queue", "A_scaled", "Q_scaled", "B", "W"]
    if args.out:
        _write(args.out, csv_rows(header, rows))
        summary_path = str(Path(args.out).with_suffix(".summary.json"))
        _write(summary_path, to_json(report.to_dict()))
    else:
        _write(None, csv_rows(header, rows))
    worst = max(p.mean for p in report.processes.values())
    _summary(
        args,
        f"n={cfg.n}, reps={cfg.replications}, "
        f"mean_sup_error_queue_length={fmt(report.processes['queue_length'].mean)}, "
        f"worst_process_mean={fmt(worst)}",
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="concertq",
        description=(
            "Equilibrium arrival profiles, price of anarchy, fluid paths and "
            "Monte Carlo simulation for strategic arrivals into parallel queues."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("--scenario", required=True, help="scenario JSON path")
        p.add_argument("--out", default=None, help="artifact path (default stdout)")
        p.add_argument("--tol", type=float, default=None, help="tolerance override")
        p.add_argument("--seed", type=int, default=None, help="RNG seed override")

    p = sub.add_parser("eq-single", help="single-population equilibrium")
    common(p)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(fn=lambda a: _cmd_eq(a, multi=False))

    p = sub.add_parser("eq-multi", help="multi-population equilibrium")
    common(p)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(fn=lambda a: _cmd_eq(a, multi=True))

    p = sub.add_parser("verify", help="best-response check of a profile CSV")
    common(p)
    p.add_argument("--profile", required=True, help="profile CSV path")
    p.add_argument("--grid-step", type=float, default=None)
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("poa", help="price of anarchy report")
    common(p)
    p.set_defaults(fn=_cmd_poa)

    p = sub.add_parser("serve-count", help="optimal integer serve count")
    common(p, scenario=False)
    p.add_argument("--l", type=float, required=True, help="population index")
    p.add_argument("--mu", type=float, required=True, help="per-queue service rate")
    p.add_argument("--tau", type=float, required=True, help="opening spacing")
    p.add_argument("--k-max", type=int, default=64, help="largest count searched")
    p.set_defaults(fn=_cmd_serve_count)

    p = sub.add_parser("eq-two", help="exact two-user, two-queue game")
    common(p, scenario=False)
    p.add_argument("--mu1", type=float, required=True)
    p.add_argument("--mu2", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--ode-dt", type=float, default=1e-4)
    p.add_argument("--trace", default=None, help="CSV trace path")
    p.add_argument("--trace-points", type=int, default=512)
    p.set_defaults(fn=_cmd_eq_two)

    p = sub.add_parser("fluid", help="exact fluid paths for a profile")
    common(p)
    p.add_argument("--profile", default=None, help="profile CSV path (default: solve)")
    p.set_defaults(fn=_cmd_fluid)

    p = sub.add_parser("simulate", help="Monte Carlo convergence run")
    common(p)
    p.add_argument("--n", type=int, required=True, help="number of users")
    p.add_argument("--reps", type=int, default=1, help="replications")
    p.add_argument("--service", choices=("exponential", "deterministic"), default="exponential")
    p.add_argument("--grid-points", type=int, default=512)
    p.set_defaults(fn=_cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
