"""Closed-form equilibrium solvers and the grid best-response verifier.

The solvers construct the unique equilibrium arrival profile for one or many
populations on K parallel queues with staggered openings.  The construction
exploits two facts that pin the equilibrium down:

* every open queue works at full rate until the common terminal time, so the
  mass routed to queue k while population i is in service is
  mu_k * (tau_i - max(tau_{i-1}, t_start_k)), where tau_i is the instant the
  last population-i user leaves service;
* within each population's arrival window the density at queue k is
  gamma_i * mu_k, which keeps that population's arrival cost flat.

The service epochs tau_i satisfy
    tau_i = (cumulative mass of populations 1..i
             + sum of mu_k * t_start_k over queues open by tau_i)
            / (total rate of queues open by tau_i),
and which queues are "open by tau_i" is itself resolved by a small fixed
point over serve-set assignments.

``verify_equilibrium`` is the independent check: it evaluates every
population's exact cost curve at every queue over a grid plus all curve
breakpoints, and reports the cost flatness on the profile's support and the
best-response gap off it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fluid
from .fluid import ArrivalProfile, Segment
from .model import DomainError, Scenario, no_idling_terminal_time


class SolverError(DomainError):
    """Equilibrium hypothesis violated or construction infeasible."""


_MASS_RTOL = 1e-9


@dataclass(frozen=True)
class EquilibriumProfile:
    """Solved equilibrium: arrival segments plus all derived quantities.

    ``arrival_epochs`` is (T_0, ..., T_N): T_0 is the first arrival into the
    network and T_i the last arrival instant of population i.
    ``service_epochs`` is (tau_0, ..., tau_N): tau_i is the instant the last
    population-i user finishes service (tau_0 is the first queue opening).
    ``serve_sets`` lists, per population, the queues whose opening falls in
    that population's service window.  ``first_arrivals`` maps each queue to
    its first arrival time, ``routing`` maps (population, queue) to routed
    mass, and ``equilibrium_costs`` maps population to its constant cost.
    """

    profile: ArrivalProfile
    terminal_time: float
    arrival_epochs: tuple[float, ...]
    service_epochs: tuple[float, ...]
    first_arrivals: dict[int, float]
    serve_sets: tuple[tuple[int, ...], ...]
    routing: dict[tuple[int, int], float]
    equilibrium_costs: dict[int, float]

    def to_dict(self, time_origin: float = 0.0) -> dict:
        """JSON-ready summary; times are shifted back by ``time_origin``."""
        o = time_origin
        return {
            "terminal_time": self.terminal_time + o,
            "arrival_epochs": [t + o for t in self.arrival_epochs],
            "service_epochs": [t + o for t in self.service_epochs],
            "first_arrivals": {str(k): t + o for k, t in sorted(self.first_arrivals.items())},
            "serve_sets": [list(js) for js in self.serve_sets],
            "routing": [
                {"population": p, "queue": q, "mass": m}
                for (p, q), m in sorted(self.routing.items())
            ],
            "equilibrium_costs": {str(p): c for p, c in sorted(self.equilibrium_costs.items())},
            "time_origin": o,
        }


@dataclass(frozen=True)
class VerificationReport:
    """Best-response check of a candidate profile.

    ``max_support_cost_deviation`` is, per population, the sup over its
    arrival support of |cost - mean support cost|;
    ``min_off_support_cost_gap`` is the minimum of cost - mean support cost
    over all (queue, time) pairs off the support.  A profitable deviation
    exists exactly when that gap is negative beyond tolerance.
    """

    max_support_cost_deviation: dict[int, float]
    min_off_support_cost_gap: dict[int, float]
    is_equilibrium: bool
    support_costs: dict[int, float]
    tol: float
    grid_points: int
    window: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "is_equilibrium": self.is_equilibrium,
            "max_support_cost_deviation": {
                str(k): v for k, v in sorted(self.max_support_cost_deviation.items())
            },
            "min_off_support_cost_gap": {
                str(k): v for k, v in sorted(self.min_off_support_cost_gap.items())
            },
            "support_costs": {str(k): v for k, v in sorted(self.support_costs.items())},
            "tol": self.tol,
            "grid_points": self.grid_points,
            "window": list(self.window),
        }


# -- construction -----------------------------------------------------------


def _service_epochs(s: Scenario, assign: list[int]) -> list[float]:
    """tau_0..tau_N given, per queue, the population window it opens in."""
    queues, pops = s.queues, s.populations
    taus = [queues[0].t_start]
    cum_mass = 0.0
    rate = 0.0
    weighted = 0.0
    for i, pop in enumerate(pops):
        cum_mass += pop.mass
        for q, a in zip(queues, assign):
            if a == i:
                rate += q.mu
                weighted += q.mu * q.t_start
        taus.append((cum_mass + weighted) / rate)
    return taus


def _assign_serve_sets(s: Scenario, max_sweeps: int | None = None) -> tuple[list[int], list[float]]:
    """Fixed point for serve sets: start with every queue in the first
    population's window, then reassign each queue to the window containing
    its opening time until stable.

    A queue opening exactly at a window boundary joins the later population.
    """
    K, N = s.n_queues, s.n_populations
    starts = [q.t_start for q in s.queues]
    assign = [0] * K
    sweeps = max_sweeps if max_sweeps is not None else K * N + 8
    for _ in range(sweeps):
        taus = _service_epochs(s, assign)
        new_assign = []
        for t0 in starts:
            for i in range(N):
                if t0 < taus[i + 1]:
                    new_assign.append(i)
                    break
            else:
                new_assign.append(N - 1)
        if new_assign == assign:
            return assign, taus
        assign = new_assign
    raise SolverError(
        f"serve-set assignment did not stabilize after {sweeps} sweeps; "
        f"last assignment (queue -> population): "
        f"{ {q.id: a + 1 for q, a in zip(s.queues, assign)} }"
    )


def _solve(s: Scenario) -> EquilibriumProfile:
    queues, pops = s.queues, s.populations
    N = s.n_populations

    if N > 1:
        for a, b in zip(pops, pops[1:]):
            if not (a.gamma < b.gamma):
                raise SolverError(
                    f"populations {a.id} and {b.id} have non-increasing gammas "
                    f"({a.gamma:g} >= {b.gamma:g}); the multi-population construction "
                    "needs strictly increasing waiting-cost shares"
                )
        starts = [q.t_start for q in queues]
        if len(set(starts)) != len(starts):
            raise SolverError(
                "multi-population construction needs distinct queue start times"
            )
    if pops[0].gamma == 0.0:
        raise SolverError(
            "population with alpha = 0 puts no weight on waiting, so the "
            "uniform-density equilibrium construction does not apply"
        )

    assign, taus = _assign_serve_sets(s)
    for i in range(N):
        if not taus[i + 1] > taus[i]:
            raise SolverError(
                f"service epochs are not increasing (tau_{i}={taus[i]:g}, "
                f"tau_{i + 1}={taus[i + 1]:g}); scenario is infeasible, "
                "likely an unpruned late-opening queue"
            )
    for q, a in zip(queues, assign):
        if not q.t_start < taus[a + 1]:
            raise SolverError(
                f"queue {q.id} opens at {q.t_start:g}, at or after the terminal "
                f"service epoch {taus[a + 1]:g} of its window; prune it first"
            )

    # arrival epochs T_N..T_0 by backward recursion; population i's window
    # has length (tau_i - tau_{i-1}) / gamma_i
    T = [0.0] * (N + 1)
    T[N] = taus[N]
    for i in range(N, 1, -1):
        T[i - 1] = T[i] - (taus[i] - taus[i - 1]) / pops[i - 1].gamma

    serve_sets = tuple(
        tuple(q.id for q, a in zip(queues, assign) if a == i) for i in range(N)
    )

    routing: dict[tuple[int, int], float] = {}
    first_arrivals: dict[int, float] = {}
    segments: list[Segment] = []
    costs: dict[int, float] = {}

    for i, pop in enumerate(pops, start=1):
        tau_prev, tau_i = taus[i - 1], taus[i]
        gamma = pop.gamma
        mass_check = 0.0
        for q, a in zip(queues, assign):
            if a > i - 1:
                continue  # queue opens in a later window; this population never sees it
            if a == i - 1:
                # queue opens inside this population's window
                p_mass = q.mu * (tau_i - q.t_start)
                first = T[i] - (tau_i - q.t_start) / gamma
                first_arrivals[q.id] = first
            else:
                # queue opened earlier; serves this population on [T_{i-1}, T_i]
                p_mass = q.mu * (tau_i - tau_prev)
                first = T[i - 1]
            if p_mass < -_MASS_RTOL:
                raise SolverError(
                    f"negative routed mass for population {pop.id} at queue {q.id}"
                )
            routing[(pop.id, q.id)] = p_mass
            mass_check += p_mass
            if T[i] > first and p_mass > 0:
                density = p_mass / (T[i] - first)
                segments.append(Segment(pop.id, q.id, first, T[i], density))
        if abs(mass_check - pop.mass) > _MASS_RTOL * max(1.0, pop.mass):
            raise SolverError(
                f"population {pop.id} routes mass {mass_check:.15g} != {pop.mass:.15g}; "
                "scenario is infeasible"
            )
        costs[pop.id] = pop.weight * tau_i - pop.alpha * T[i]

    T[0] = min(first_arrivals.values())
    profile = ArrivalProfile(tuple(segments))
    return EquilibriumProfile(
        profile=profile,
        terminal_time=T[N],
        arrival_epochs=tuple(T),
        service_epochs=tuple(taus),
        first_arrivals=first_arrivals,
        serve_sets=serve_sets,
        routing=routing,
        equilibrium_costs=costs,
    )


def solve_single(s: Scenario) -> EquilibriumProfile:
    """Equilibrium arrival profile for a single population.

    The terminal time T solves sum_k mu_k (T - t_start_k) = mass; queue k
    receives mass mu_k (T - t_start_k) at density gamma * mu_k starting at
    T - (T - t_start_k) / gamma.  Requires a validated scenario with pruned
    queues; raises SolverError if a queue opens at or after T.
    """
    if s.n_populations != 1:
        raise SolverError(f"single-population solver got N={s.n_populations}")
    return _solve(s)


def solve_multi(s: Scenario) -> EquilibriumProfile:
    """Equilibrium arrival profile for one or more populations.

    Populations must have strictly increasing gammas and, when N > 1, queue
    start times must be distinct.  With N = 1 the output is identical to
    ``solve_single`` (same arithmetic).
    """
    return _solve(s)


def terminal_time(s: Scenario) -> float:
    """Common terminal time of the equilibrium (all queues drain together)."""
    return no_idling_terminal_time(s.total_mass, s.queues)


# -- verification -----------------------------------------------------------


def verify_equilibrium(
    s: Scenario,
    profile: ArrivalProfile,
    grid_step: float | None = None,
    tol: float | None = None,
) -> VerificationReport:
    """Best-response check of ``profile`` against the exact cost curves.

    For each population the cost is evaluated at every queue on the union of
    a uniform grid over [first support point - 1, last support point + 1]
    and all cost-curve breakpoints (the curves are piecewise linear, so
    extrema are attained there; the grid is belt and braces).  The profile is
    an equilibrium when every population's support cost is flat within
    ``tol`` and no off-support (queue, time) pair undercuts it by more than
    ``tol``.
    """
    if tol is None:
        tol = s.options.tol
    if grid_step is None:
        grid_step = s.options.grid_step

    if not profile.segments or profile.total_mass <= 0:
        raise DomainError("cannot verify an empty profile")
    known = {q.id for q in s.queues}
    strays = [qid for qid in profile.queue_ids if qid not in known]
    if strays:
        raise DomainError(f"profile routes mass to unknown queues {strays}")

    lo, hi = profile.support_bounds()
    window = (lo - 1.0, hi + 1.0)
    if grid_step is None:
        grid_step = (window[1] - window[0]) / 1024.0
    grid = np.arange(window[0], window[1] + 0.5 * grid_step, grid_step)

    horizon = fluid.default_horizon(profile, s.queues)
    horizon = (min(horizon[0], window[0] - 1.0), max(horizon[1], window[1] + 1.0))

    deviations: dict[int, float] = {}
    gaps: dict[int, float] = {}
    support_costs: dict[int, float] = {}
    n_points = 0

    for pop in s.populations:
        sup_vals: list[np.ndarray] = []
        off_vals: list[np.ndarray] = []
        for q in s.queues:
            curve = fluid.cost_curve(pop, profile, q, horizon)
            ts = np.union1d(curve.times, grid)
            ts = ts[(ts >= window[0]) & (ts <= window[1])]
            cs = curve(ts)
            n_points += ts.size
            in_support = np.zeros(ts.shape, dtype=bool)
            for seg in profile.segments:
                if seg.population == pop.id and seg.queue == q.id and seg.mass > 0:
                    in_support |= (ts >= seg.start) & (ts <= seg.end)
            sup_vals.append(cs[in_support])
            off_vals.append(cs[~in_support])
        sup_all = np.concatenate(sup_vals) if sup_vals else np.array([])
        off_all = np.concatenate(off_vals) if off_vals else np.array([])
        if sup_all.size == 0:
            raise DomainError(f"population {pop.id} has no support in the profile")
        c = float(np.mean(sup_all))
        support_costs[pop.id] = c
        deviations[pop.id] = float(np.max(np.abs(sup_all - c)))
        gaps[pop.id] = float(np.min(off_all - c)) if off_all.size else np.inf

    ok = all(d <= tol for d in deviations.values()) and all(
        g >= -tol for g in gaps.values()
    )
    return VerificationReport(
        max_support_cost_deviation=deviations,
        min_off_support_cost_gap=gaps,
        is_equilibrium=ok,
        support_costs=support_costs,
        tol=tol,
        grid_points=n_points,
        window=window,
    )
