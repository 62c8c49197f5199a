"""Exact fluid objects for parallel FIFO queues under a deterministic
arrival profile.

Everything here is computed on exact piecewise-linear paths, with no
discretization: cumulative arrivals F_k, the netflow X_k = F_k - mu_k
(t - t_start)_+, the reflection pair (queue length, cumulative regulator),
busy time, virtual waiting time, and per-population arrival cost curves.
Grids appear only in test oracles.

The regulator of a path X is Psi(t) = sup over s <= t of max(-X(s), 0),
taken from the first breakpoint of X; the reflected path Phi = X + Psi is
the fluid queue length.  For piecewise-linear X the regulator is again
piecewise linear, with extra breakpoints only where X drops back to a
previously attained minimum.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .model import DomainError, ParseError, PopulationSpec, QueueSpec

_EXTEND_MODES = ("const", "slope")


@dataclass(frozen=True)
class PiecewisePath:
    """A piecewise-linear function of time.

    ``times`` are strictly increasing breakpoints, ``values`` the function
    values there; the path interpolates linearly in between.  Outside the
    breakpoint span it either stays constant (``extend="const"``, the right
    mode for CDF-like paths) or continues with the boundary segment slope
    (``extend="slope"``, the right mode for netflow-like paths).
    """

    times: np.ndarray
    values: np.ndarray
    extend: str = "const"

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.times, dtype=float))
        v = np.atleast_1d(np.asarray(self.values, dtype=float))
        if t.ndim != 1 or v.shape != t.shape or t.size == 0:
            raise ValueError("times and values must be matching 1-d arrays")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValueError("breakpoints and values must be finite")
        if self.extend not in _EXTEND_MODES:
            raise ValueError(f"extend must be one of {_EXTEND_MODES}")
        t.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    # -- evaluation ---------------------------------------------------------

    def __call__(self, t):
        tt = np.asarray(t, dtype=float)
        scalar = tt.ndim == 0
        tt = np.atleast_1d(tt)
        out = np.interp(tt, self.times, self.values)
        if self.extend == "slope" and self.times.size > 1:
            t0, t1 = self.times[0], self.times[-1]
            sl_left = (self.values[1] - self.values[0]) / (self.times[1] - self.times[0])
            sl_right = (self.values[-1] - self.values[-2]) / (self.times[-1] - self.times[-2])
            left = tt < t0
            right = tt > t1
            if np.any(left):
                out[left] = self.values[0] + sl_left * (tt[left] - t0)
            if np.any(right):
                out[right] = self.values[-1] + sl_right * (tt[right] - t1)
        return float(out[0]) if scalar else out

    @property
    def span(self) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    # -- algebra ------------------------------------------------------------

    def refine(self, extra_times) -> "PiecewisePath":
        """Same path with additional breakpoints inserted (exact)."""
        ts = np.union1d(self.times, np.asarray(extra_times, dtype=float))
        return PiecewisePath(ts, self(ts), extend=self.extend)

    def __add__(self, other: "PiecewisePath") -> "PiecewisePath":
        ts = np.union1d(self.times, other.times)
        mode = "const" if (self.extend == "const" and other.extend == "const") else "slope"
        return PiecewisePath(ts, self(ts) + other(ts), extend=mode)

    def __neg__(self) -> "PiecewisePath":
        return PiecewisePath(self.times, -self.values, extend=self.extend)

    def __sub__(self, other: "PiecewisePath") -> "PiecewisePath":
        return self + (-other)

    def scaled(self, factor: float) -> "PiecewisePath":
        return PiecewisePath(self.times, self.values * factor, extend=self.extend)

    def shifted(self, dt: float) -> "PiecewisePath":
        return PiecewisePath(self.times + dt, self.values, extend=self.extend)

    def integral(self, a: float, b: float) -> float:
        """Exact integral of the path over [a, b]."""
        if b < a:
            raise ValueError(f"integration bounds out of order: [{a}, {b}]")
        if b == a:
            return 0.0
        inner = self.times[(self.times > a) & (self.times < b)]
        ts = np.concatenate(([a], inner, [b]))
        vs = self(ts)
        return float(np.sum(0.5 * (vs[1:] + vs[:-1]) * np.diff(ts)))

    def is_nondecreasing(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.diff(self.values) >= -tol))

    # -- serialization ------------------------------------------------------

    def to_csv(self) -> str:
        """CSV rows ``t,value`` at breakpoints; a header comment carries the
        extension mode."""
        from .serialize import fmt

        lines = [f"# extend={self.extend}", "t,value"]
        for t, v in zip(self.times, self.values):
            lines.append(f"{fmt(t)},{fmt(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "PiecewisePath":
        extend = "const"
        ts, vs = [], []
        for raw in io.StringIO(text):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "extend=" in line:
                    extend = line.split("extend=", 1)[1].strip()
                continue
            if line.lower().startswith("t,"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ParseError(f"bad path row: {line!r}")
            ts.append(float(parts[0]))
            vs.append(float(parts[1]))
        if not ts:
            raise ParseError("empty path document")
        return cls(np.asarray(ts), np.asarray(vs), extend=extend)


def reflect(x: PiecewisePath) -> tuple[PiecewisePath, PiecewisePath]:
    """One-sided reflection of a piecewise-linear path at zero.

    Returns (phi, psi) with psi(t) = running max of (-x)^+ from the first
    breakpoint of x, and phi = x + psi >= 0.  Both are exact: a breakpoint is
    inserted wherever x falls back to a previously attained minimum, which is
    where psi switches from flat to increasing.
    """
    t, v = x.times, x.values
    running = max(0.0, -v[0])
    out_t = [t[0]]
    out_psi = [running]
    for i in range(1, t.size):
        g0, g1 = -v[i - 1], -v[i]
        if g1 > running:
            if g0 < running:
                # -x crosses the old maximum inside this segment; the stored
                # crossing time is rounded, so re-evaluate -x there to keep
                # the regulator exact at every stored breakpoint
                frac = (running - g0) / (g1 - g0)
                cross = t[i - 1] + frac * (t[i] - t[i - 1])
                if cross > out_t[-1] and cross < t[i]:
                    out_t.append(cross)
                    out_psi.append(max(running, g0 + (g1 - g0) * (cross - t[i - 1]) / (t[i] - t[i - 1])))
            running = g1
        out_t.append(t[i])
        out_psi.append(running)
    psi = PiecewisePath(np.asarray(out_t), np.asarray(out_psi), extend="const")
    # phi >= 0 exactly; np.maximum only absorbs rounding at binding points
    phi = PiecewisePath(
        psi.times, np.maximum(x(psi.times) + psi.values, 0.0), extend="const"
    )
    return phi, psi


# -- arrival profiles -------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    """Constant-density arrivals of one population at one queue on [start, end]."""

    population: int
    queue: int
    start: float
    end: float
    density: float

    def __post_init__(self):
        if not (self.end >= self.start):
            raise DomainError(f"segment has end < start: {self}")
        if self.density < 0:
            raise DomainError(f"segment has negative density: {self}")

    @property
    def mass(self) -> float:
        return self.density * (self.end - self.start)


@dataclass(frozen=True)
class ArrivalProfile:
    """A collection of constant-density segments, one or more per
    (population, queue) pair.  The aggregate per-queue cumulative arrival
    path is piecewise linear."""

    segments: tuple[Segment, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def queue_ids(self) -> tuple[int, ...]:
        return tuple(sorted({s.queue for s in self.segments}))

    @property
    def population_ids(self) -> tuple[int, ...]:
        return tuple(sorted({s.population for s in self.segments}))

    @property
    def total_mass(self) -> float:
        return sum(s.mass for s in self.segments)

    def mass(self, population: int | None = None, queue: int | None = None) -> float:
        return sum(
            s.mass
            for s in self.segments
            if (population is None or s.population == population)
            and (queue is None or s.queue == queue)
        )

    def routing_masses(self) -> dict[tuple[int, int], float]:
        out: dict[tuple[int, int], float] = {}
        for s in self.segments:
            key = (s.population, s.queue)
            out[key] = out.get(key, 0.0) + s.mass
        return out

    def support_bounds(self) -> tuple[float, float]:
        if not self.segments:
            raise DomainError("empty profile has no support")
        return min(s.start for s in self.segments), max(s.end for s in self.segments)

    def first_arrival(self, queue: int) -> float:
        starts = [s.start for s in self.segments if s.queue == queue and s.mass > 0]
        if not starts:
            raise DomainError(f"no arrivals at queue {queue}")
        return min(starts)

    def queue_segments(self, queue: int) -> tuple[Segment, ...]:
        return tuple(s for s in self.segments if s.queue == queue)

    def population_segments(self, population: int) -> tuple[Segment, ...]:
        return tuple(s for s in self.segments if s.population == population)

    def queue_cdf(self, queue: int) -> PiecewisePath:
        """Aggregate cumulative arrivals F_k at the queue, all populations."""
        segs = self.queue_segments(queue)
        if not segs:
            return PiecewisePath(np.array([0.0]), np.array([0.0]), extend="const")
        ts = np.unique(
            np.concatenate([[s.start for s in segs], [s.end for s in segs]])
        )
        vals = np.zeros_like(ts)
        for s in segs:
            vals += s.density * (np.clip(ts, s.start, s.end) - s.start)
        return PiecewisePath(ts, vals, extend="const")

    def density_at(self, queue: int, t) -> np.ndarray:
        """Aggregate density at the queue; segments cover [start, end)."""
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(tt)
        for s in self.queue_segments(queue):
            out += np.where((tt >= s.start) & (tt < s.end), s.density, 0.0)
        return out

    def shifted(self, dt: float) -> "ArrivalProfile":
        return ArrivalProfile(
            tuple(
                Segment(s.population, s.queue, s.start + dt, s.end + dt, s.density)
                for s in self.segments
            )
        )

    def scaled(self, factor: float) -> "ArrivalProfile":
        """Profile with every density multiplied by ``factor``."""
        return ArrivalProfile(
            tuple(
                Segment(s.population, s.queue, s.start, s.end, s.density * factor)
                for s in self.segments
            )
        )

    def check_masses(self, populations: Iterable[PopulationSpec], tol: float = 1e-6) -> None:
        """Raise DomainError if per-population routed mass does not add up."""
        for p in populations:
            got = self.mass(population=p.id)
            if abs(got - p.mass) > tol * max(1.0, p.mass):
                raise DomainError(
                    f"population {p.id} routes mass {got:.12g}, expected {p.mass:.12g}"
                )

    # -- serialization ------------------------------------------------------

    def to_csv(self) -> str:
        from .serialize import fmt

        lines = ["pop,queue,a,b,density"]
        for s in self.segments:
            lines.append(
                f"{s.population},{s.queue},{fmt(s.start)},{fmt(s.end)},{fmt(s.density)}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "ArrivalProfile":
        segs = []
        for raw in io.StringIO(text):
            row = raw.strip()
            if not row or row.startswith("#") or row.lower().startswith("pop,"):
                continue
            parts = row.split(",")
            if len(parts) != 5:
                raise ParseError(f"bad profile row: {row!r}")
            segs.append(
                Segment(
                    population=int(parts[0]),
                    queue=int(parts[1]),
                    start=float(parts[2]),
                    end=float(parts[3]),
                    density=float(parts[4]),
                )
            )
        return cls(tuple(segs))


# -- fluid processes --------------------------------------------------------


def default_horizon(profile: ArrivalProfile, queues, pad: float = 1.0) -> tuple[float, float]:
    """A window on which every fluid object of the profile is fully resolved.

    The right edge is past the moment each queue has provably drained: after
    arrivals stop, a queue holding at most its total routed mass empties in
    mass/mu time units.
    """
    starts = [q.t_start for q in queues]
    if profile.segments:
        lo, hi = profile.support_bounds()
    else:
        lo, hi = min(starts), min(starts)
    lo = min(lo, min(starts)) - pad
    drain = max(
        max(hi, q.t_start) + profile.mass(queue=q.id) / q.mu for q in queues
    )
    return lo, max(hi, drain) + pad


def netflow(
    f_k: PiecewisePath, q: QueueSpec, horizon: tuple[float, float] | None = None
) -> PiecewisePath:
    """Netflow X_k = F_k - mu_k (t - t_start)_+ as an exact path.

    Breakpoints are the union of the CDF's breakpoints, the queue opening
    time, and the horizon endpoints.
    """
    if not f_k.is_nondecreasing(tol=0.0):
        raise DomainError("cumulative arrival path must be nondecreasing")
    extra = [q.t_start]
    if horizon is not None:
        extra.extend(horizon)
    ts = np.union1d(f_k.times, np.asarray(extra, dtype=float))
    vals = f_k(ts) - q.mu * np.maximum(ts - q.t_start, 0.0)
    return PiecewisePath(ts, vals, extend="slope")


def _queue_netflow(profile, q, horizon):
    if horizon is None:
        horizon = default_horizon(profile, [q])
    return netflow(profile.queue_cdf(q.id), q, horizon)


def fluid_queue(
    profile: ArrivalProfile, q: QueueSpec, horizon: tuple[float, float] | None = None
) -> PiecewisePath:
    """Fluid queue length: the reflection of the queue's netflow."""
    phi, _ = reflect(_queue_netflow(profile, q, horizon))
    return phi


def fluid_regulator(
    profile: ArrivalProfile, q: QueueSpec, horizon: tuple[float, float] | None = None
) -> PiecewisePath:
    """Cumulative idleness regulator of the queue's netflow."""
    _, psi = reflect(_queue_netflow(profile, q, horizon))
    return psi


def fluid_busy(
    profile: ArrivalProfile, q: QueueSpec, horizon: tuple[float, float] | None = None
) -> PiecewisePath:
    """Busy time (t - t_start)_+ - regulator / mu; nondecreasing."""
    _, psi = reflect(_queue_netflow(profile, q, horizon))
    psi = psi.refine([q.t_start])
    vals = np.maximum(psi.times - q.t_start, 0.0) - psi.values / q.mu
    return PiecewisePath(psi.times, vals, extend="slope")


def fluid_wait(
    profile: ArrivalProfile, q: QueueSpec, horizon: tuple[float, float] | None = None
) -> PiecewisePath:
    """Virtual waiting time: queue length / mu, plus the time left until the
    queue opens for arrivals that land before t_start."""
    phi, _ = reflect(_queue_netflow(profile, q, horizon))
    phi = phi.refine([q.t_start])
    vals = phi.values / q.mu + np.maximum(q.t_start - phi.times, 0.0)
    return PiecewisePath(phi.times, vals, extend="const")


def cost_curve(
    pop: PopulationSpec,
    profile: ArrivalProfile,
    q: QueueSpec,
    horizon: tuple[float, float] | None = None,
) -> PiecewisePath:
    """Arrival cost (alpha + beta) * wait + beta * t for the population at the
    queue, exact on the horizon."""
    w = fluid_wait(profile, q, horizon)
    vals = pop.weight * w.values + pop.beta * w.times
    return PiecewisePath(w.times, vals, extend="slope")
