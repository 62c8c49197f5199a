"""Monte Carlo discrete-event simulator for sampled arrivals into parallel
FIFO queues, with convergence reporting against the fluid objects.

n users draw i.i.d. arrival times from an arrival profile by exact inverse
CDF; the queue joined at a sampled time t is chosen with probability
proportional to the per-queue densities at t.  Each user carries fluid mass
M / n (M the profile's total mass), so service times are drawn with mean
M / (n mu_k): the simulated paths, scaled by M / n, converge uniformly to
the fluid paths as n grows.  Busy time and virtual waiting time are order
one and are compared unscaled.

Randomness is fully reproducible: every stream is a Philox (counter-based)
generator keyed by SeedSequence([seed, replication, stream index]), with
stream 0 for arrival times, stream 1 for routing, and stream 16 + q for the
service times of the q-th queue.  Identical (scenario, config, seed) inputs
give bit-identical paths on any platform.

Event conventions: at equal timestamps arrivals are processed before
departures, ties within a class by user index.  Step functions are
right-continuous (counts include events at exactly t).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fluid
from .fluid import ArrivalProfile
from .model import DomainError, Scenario

_ARRIVAL_STREAM = 0
_ROUTING_STREAM = 1
_SERVICE_STREAM_BASE = 16

_SERVICE_DISTS = ("exponential", "deterministic")


def _stream(seed: int, replication: int, stream: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([int(seed), int(replication), int(stream)]))
    )


@dataclass(frozen=True)
class SimConfig:
    n: int
    seed: int = 0
    service_dist: str = "exponential"
    grid: np.ndarray | None = None
    replications: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"need n >= 1, got {self.n}")
        if self.replications < 1:
            raise DomainError(f"need replications >= 1, got {self.replications}")
        if self.service_dist not in _SERVICE_DISTS:
            raise DomainError(
                f"service_dist must be one of {_SERVICE_DISTS}, got {self.service_dist!r}"
            )
        if self.grid is not None:
            g = np.asarray(self.grid, dtype=float)
            if g.ndim != 1 or g.size < 2 or not np.all(np.diff(g) > 0):
                raise DomainError("grid must be a strictly increasing 1-d array")
            g.flags.writeable = False
            object.__setattr__(self, "grid", g)


def default_grid(profile: ArrivalProfile, s: Scenario, points: int = 512) -> np.ndarray:
    """Equispaced evaluation grid over [first support point - 0.1, T + 0.5],
    where T bounds the time the last user leaves."""
    lo, hi = profile.support_bounds()
    lo = min(lo, min(q.t_start for q in s.queues)) - 0.1
    drain = max(
        max(hi, q.t_start) + profile.mass(queue=q.id) / q.mu for q in s.queues
    )
    return np.linspace(lo, drain + 0.5, points)


def sample_arrivals(
    profile: ArrivalProfile, n: int, seed: int, replication: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Draw n (time, queue) arrival events from the profile.

    Times invert the aggregate piecewise-linear CDF of the profile
    (renormalized to a probability mixture); queues are then drawn from the
    conditional routing probabilities d_k(t) / d(t).  Events are returned
    sorted by time, ties kept in draw order.  Deterministic given
    (seed, replication).
    """
    segs = [s for s in profile.segments if s.mass > 0]
    if not segs:
        raise DomainError("cannot sample from a profile with zero total mass")
    queue_ids = profile.queue_ids
    qindex = {qid: j for j, qid in enumerate(queue_ids)}

    # interval decomposition of the union of segment supports
    knots = np.unique(
        np.concatenate([[s.start for s in segs], [s.end for s in segs]])
    )
    density = np.zeros((knots.size - 1, len(queue_ids)))
    for s in segs:
        a = np.searchsorted(knots, s.start)
        b = np.searchsorted(knots, s.end)
        density[a:b, qindex[s.queue]] += s.density
    total_density = density.sum(axis=1)
    interval_mass = total_density * np.diff(knots)
    cum = np.concatenate(([0.0], np.cumsum(interval_mass)))
    total_mass = cum[-1]

    rng_t = _stream(seed, replication, _ARRIVAL_STREAM)
    rng_q = _stream(seed, replication, _ROUTING_STREAM)
    u = rng_t.random(n) * total_mass
    idx = np.searchsorted(cum, u, side="right") - 1
    idx = np.clip(idx, 0, knots.size - 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        times = knots[idx] + (u - cum[idx]) / total_density[idx]

    probs = density[idx] / total_density[idx][:, None]
    v = rng_q.random(n)
    choice = (v[:, None] >= np.cumsum(probs, axis=1)).sum(axis=1)
    choice = np.clip(choice, 0, len(queue_ids) - 1)
    queues = np.asarray(queue_ids, dtype=int)[choice]

    order = np.argsort(times, kind="stable")
    return times[order], queues[order]


@dataclass(frozen=True)
class QueueRecord:
    """Per-queue event record: arrival order equals service order (FIFO)."""

    queue_id: int
    mu: float
    t_start: float
    arrivals: np.ndarray        # sorted arrival times
    services: np.ndarray        # accelerated service times, arrival order
    completions: np.ndarray     # departure times, arrival order (sorted)

    @property
    def count(self) -> int:
        return int(self.arrivals.size)

    def arrivals_at(self, grid: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.arrivals, grid, side="right").astype(float)

    def departures_at(self, grid: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.completions, grid, side="right").astype(float)

    def queue_length_at(self, grid: np.ndarray) -> np.ndarray:
        return self.arrivals_at(grid) - self.departures_at(grid)

    def potential_service_at(self, grid: np.ndarray) -> np.ndarray:
        """Completions of a server that never idles after opening."""
        csum = np.cumsum(self.services)
        out = np.searchsorted(csum, grid - self.t_start, side="right").astype(float)
        return np.where(grid >= self.t_start, out, 0.0)

    def workload_presented_at(self, grid: np.ndarray) -> np.ndarray:
        """Total service requirement of everyone arrived by t."""
        prefix = np.concatenate(([0.0], np.cumsum(self.services)))
        return prefix[np.searchsorted(self.arrivals, grid, side="right")]

    def _busy_periods(self) -> tuple[np.ndarray, np.ndarray]:
        if self.count == 0:
            return np.empty(0), np.empty(0)
        starts_service = self.completions - self.services
        prev_completion = np.concatenate(([-np.inf], self.completions[:-1]))
        opens = starts_service > prev_completion
        period_starts = starts_service[opens]
        # each period ends at the completion preceding the next period's start
        idxs = np.nonzero(opens)[0]
        last = np.concatenate((idxs[1:] - 1, [self.count - 1]))
        return period_starts, self.completions[last]

    def busy_time_at(self, grid: np.ndarray) -> np.ndarray:
        starts, ends = self._busy_periods()
        if starts.size == 0:
            return np.zeros_like(grid)
        lengths = ends - starts
        cum = np.concatenate(([0.0], np.cumsum(lengths)))
        idx = np.searchsorted(ends, grid, side="right")
        out = cum[idx]
        active = idx < starts.size
        partial = np.where(
            active, np.clip(grid - starts[np.minimum(idx, starts.size - 1)], 0.0, None), 0.0
        )
        partial = np.where(active, np.minimum(partial, lengths[np.minimum(idx, starts.size - 1)]), 0.0)
        return out + partial

    def idle_time_at(self, grid: np.ndarray) -> np.ndarray:
        """Non-serving time accumulated after the queue opens."""
        return np.maximum(grid - self.t_start, 0.0) - self.busy_time_at(grid)

    def empty_time_at(self, grid: np.ndarray, origin: float) -> np.ndarray:
        """Time with nobody in the system, accumulated from ``origin``."""
        if self.count == 0:
            return np.maximum(grid - origin, 0.0)
        gap_starts = np.concatenate(([origin], self.completions))
        gap_ends = np.concatenate((self.arrivals, [np.inf]))
        # an empty interval needs its completion to precede the next arrival
        keep = gap_ends > gap_starts
        gap_starts, gap_ends = gap_starts[keep], gap_ends[keep]
        out = np.zeros_like(grid)
        for a, b in zip(gap_starts, gap_ends):
            out += np.clip(np.minimum(grid, b) - a, 0.0, None)
        return out

    def virtual_wait_at(self, grid: np.ndarray) -> np.ndarray:
        """Presented workload minus busy time, plus the pre-opening gap."""
        w = self.workload_presented_at(grid) - self.busy_time_at(grid)
        return w - np.where(grid <= self.t_start, grid - self.t_start, 0.0)


@dataclass(frozen=True)
class SimPaths:
    """One replication's event-level output."""

    n: int
    mass_scale: float           # fluid mass carried by one user
    t_origin: float
    records: dict[int, QueueRecord]

    @property
    def queue_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self.records))

    def total_arrivals_at(self, grid: np.ndarray) -> np.ndarray:
        out = np.zeros_like(grid, dtype=float)
        for rec in self.records.values():
            out += rec.arrivals_at(grid)
        return out

    def first_arrival(self) -> float:
        times = [rec.arrivals[0] for rec in self.records.values() if rec.count]
        if not times:
            raise DomainError("no arrivals were simulated")
        return float(min(times))


def run_des(
    s: Scenario, events: tuple[np.ndarray, np.ndarray], cfg: SimConfig, replication: int = 0
) -> SimPaths:
    """Exact FIFO simulation of the sampled events.

    Work-conserving single server per queue, infinite buffer, server k idle
    before its opening time.  Service times are drawn per queue with mean
    mass_scale / mu_k (acceleration drawn directly at the scaled mean).
    Completion times follow the FIFO recursion
    c_i = max(a_i, t_start, c_{i-1}) + service_i, vectorized via prefix sums.
    """
    times, queues = events
    if times.size and not np.all(np.diff(times) >= 0):
        raise DomainError("events must be sorted by time")
    total_mass = sum(p.mass for p in s.populations)
    mass_scale = total_mass / cfg.n

    starts = [q.t_start for q in s.queues]
    t_origin = float(min(times.min() if times.size else min(starts), min(starts)))

    records: dict[int, QueueRecord] = {}
    for qi, q in enumerate(s.queues):
        arr = times[queues == q.id]
        rng = _stream(cfg.seed, replication, _SERVICE_STREAM_BASE + qi)
        mean = mass_scale / q.mu
        if cfg.service_dist == "exponential":
            svc = rng.exponential(mean, size=arr.size)
        else:
            svc = np.full(arr.size, mean)
        if arr.size:
            ready = np.maximum(arr, q.t_start)
            csum = np.cumsum(svc)
            offsets = ready - np.concatenate(([0.0], csum[:-1]))
            completions = csum + np.maximum.accumulate(offsets)
        else:
            completions = np.empty(0)
        records[q.id] = QueueRecord(
            queue_id=q.id,
            mu=q.mu,
            t_start=q.t_start,
            arrivals=arr,
            services=svc,
            completions=completions,
        )
    return SimPaths(n=cfg.n, mass_scale=mass_scale, t_origin=t_origin, records=records)


@dataclass(frozen=True)
class ScaledPaths:
    """Simulated trajectories on a grid, in fluid units."""

    grid: np.ndarray
    arrivals: dict[int, np.ndarray]       # A_k * mass_scale
    arrivals_total: np.ndarray
    queue_length: dict[int, np.ndarray]   # Q_k * mass_scale
    busy_time: dict[int, np.ndarray]      # unscaled, order one
    virtual_wait: dict[int, np.ndarray]   # unscaled, order one
    empty_time: dict[int, np.ndarray]     # unscaled, from the origin


def scaled_paths(paths: SimPaths, n: int, grid: np.ndarray) -> ScaledPaths:
    """Evaluate the scaled step functions on the grid.

    Arrival and queue-length counts are multiplied by the per-user fluid
    mass; busy time, virtual wait and empty time are already order one.
    """
    if n != paths.n:
        raise DomainError(f"paths were simulated with n={paths.n}, not {n}")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or not np.all(np.diff(grid) > 0):
        raise DomainError("grid must be a strictly increasing 1-d array")
    m = paths.mass_scale
    arrivals = {}
    queue_length = {}
    busy = {}
    wait = {}
    empty = {}
    for qid, rec in paths.records.items():
        arrivals[qid] = rec.arrivals_at(grid) * m
        queue_length[qid] = rec.queue_length_at(grid) * m
        busy[qid] = rec.busy_time_at(grid)
        wait[qid] = rec.virtual_wait_at(grid)
        empty[qid] = rec.empty_time_at(grid, paths.t_origin)
    return ScaledPaths(
        grid=grid,
        arrivals=arrivals,
        arrivals_total=paths.total_arrivals_at(grid) * m,
        queue_length=queue_length,
        busy_time=busy,
        virtual_wait=wait,
        empty_time=empty,
    )


@dataclass(frozen=True)
class ProcessErrors:
    """Sup-norm distances to the fluid path, per replication."""

    per_replication: tuple[float, ...]
    mean: float
    max: float

    @classmethod
    def from_list(cls, values) -> "ProcessErrors":
        vals = tuple(float(v) for v in values)
        return cls(per_replication=vals, mean=float(np.mean(vals)), max=float(np.max(vals)))

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "max": self.max,
            "per_replication": list(self.per_replication),
        }


@dataclass(frozen=True)
class ConvergenceReport:
    """Distances between scaled simulated paths and their fluid limits."""

    n: int
    replications: int
    processes: dict[str, ProcessErrors]
    first_arrivals: tuple[float, ...]
    support_infimum: float
    grid: np.ndarray

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "replications": self.replications,
            "processes": {k: v.to_dict() for k, v in sorted(self.processes.items())},
            "first_arrivals": list(self.first_arrivals),
            "support_infimum": self.support_infimum,
            "grid": {
                "points": int(self.grid.size),
                "start": float(self.grid[0]),
                "end": float(self.grid[-1]),
            },
        }


def fluid_reference(
    s: Scenario, profile: ArrivalProfile, grid: np.ndarray
) -> dict[str, dict[int, np.ndarray]]:
    """Fluid paths evaluated on the grid, keyed like the scaled sim paths."""
    horizon = (float(grid[0]) - 1.0, float(grid[-1]) + 1.0)
    hz = fluid.default_horizon(profile, s.queues)
    horizon = (min(horizon[0], hz[0]), max(horizon[1], hz[1]))
    out: dict[str, dict[int, np.ndarray]] = {
        "arrivals": {},
        "queue_length": {},
        "busy_time": {},
        "virtual_wait": {},
    }
    for q in s.queues:
        out["arrivals"][q.id] = profile.queue_cdf(q.id)(grid)
        out["queue_length"][q.id] = fluid.fluid_queue(profile, q, horizon)(grid)
        out["busy_time"][q.id] = fluid.fluid_busy(profile, q, horizon)(grid)
        out["virtual_wait"][q.id] = fluid.fluid_wait(profile, q, horizon)(grid)
    return out


def convergence_report(s: Scenario, profile: ArrivalProfile, cfg: SimConfig) -> ConvergenceReport:
    """Run ``cfg.replications`` independent simulations and compare each
    scaled process with its fluid counterpart in sup norm on the grid."""
    grid = cfg.grid if cfg.grid is not None else default_grid(profile, s)
    reference = fluid_reference(s, profile, grid)
    support_inf = profile.support_bounds()[0]

    errors: dict[str, list[float]] = {k: [] for k in reference}
    first_arrivals: list[float] = []
    for rep in range(cfg.replications):
        events = sample_arrivals(profile, cfg.n, cfg.seed, replication=rep)
        paths = run_des(s, events, cfg, replication=rep)
        scaled = scaled_paths(paths, cfg.n, grid)
        first_arrivals.append(paths.first_arrival())
        sim_values = {
            "arrivals": scaled.arrivals,
            "queue_length": scaled.queue_length,
            "busy_time": scaled.busy_time,
            "virtual_wait": scaled.virtual_wait,
        }
        for name, per_queue in sim_values.items():
            worst = max(
                float(np.max(np.abs(per_queue[q.id] - reference[name][q.id])))
                for q in s.queues
            )
            errors[name].append(worst)

    return ConvergenceReport(
        n=cfg.n,
        replications=cfg.replications,
        processes={k: ProcessErrors.from_list(v) for k, v in errors.items()},
        first_arrivals=tuple(first_arrivals),
        support_infimum=float(support_inf),
        grid=grid,
    )


def convergence_study(
    s: Scenario, profile: ArrivalProfile, cfg: SimConfig, n_factor: int = 100
) -> tuple[ConvergenceReport, ConvergenceReport, dict[str, float]]:
    """Convergence reports at n and n * n_factor with shared replication
    seeds, plus the mean-sup-error ratio per process (large over small)."""
    small = convergence_report(s, profile, cfg)
    big_cfg = SimConfig(
        n=cfg.n * n_factor,
        seed=cfg.seed,
        service_dist=cfg.service_dist,
        grid=small.grid,
        replications=cfg.replications,
    )
    big = convergence_report(s, profile, big_cfg)
    ratios = {
        name: big.processes[name].mean / small.processes[name].mean
        if small.processes[name].mean > 0
        else 0.0
        for name in small.processes
    }
    return small, big, ratios
