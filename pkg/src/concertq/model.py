"""Scenario model: queues, populations, ingestion and feasibility checks.

A scenario bundles K parallel single-server FIFO queues (service rate and
service start time each) with N user populations (linear waiting / completion
cost weights and a fluid mass each), plus numeric options shared by the
solvers.  Parsing normalizes the time origin so that the earliest queue opens
at time zero; ``Scenario.time_origin`` records the subtracted offset and the
serializers add it back on output.

All model objects are immutable after construction and safe to share across
workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace


class DomainError(ValueError):
    """A parameter or hypothesis violation (CLI exit code 1)."""


class ParseError(ValueError):
    """A malformed scenario or profile document (CLI exit code 2)."""


DEFAULT_TOL = 1e-9        # closed-form identities
DEFAULT_GRID_TOL = 1e-6   # grid-based checks


def gamma_of(alpha: float, beta: float) -> float:
    """Waiting-cost share alpha / (alpha + beta) of the total cost weight.

    Raises DomainError if the weights are negative or both zero.
    """
    if alpha < 0 or beta < 0:
        raise DomainError(f"cost weights must be nonnegative, got alpha={alpha}, beta={beta}")
    total = alpha + beta
    if total == 0:
        raise DomainError("alpha + beta must be positive")
    return alpha / total


@dataclass(frozen=True)
class QueueSpec:
    """One FIFO server: rate ``mu`` (> 0), opening time ``t_start`` (>= 0)."""

    id: int
    mu: float
    t_start: float

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise DomainError(f"queue {self.id}: mu must be positive and finite, got {self.mu}")
        if not (self.t_start >= 0 and math.isfinite(self.t_start)):
            raise DomainError(
                f"queue {self.id}: t_start must be nonnegative and finite, got {self.t_start}"
            )

    @property
    def mean_service(self) -> float:
        return 1.0 / self.mu


@dataclass(frozen=True)
class PopulationSpec:
    """One user population: waiting weight ``alpha`` (>= 0), completion-time
    weight ``beta`` (> 0), and fluid mass (default 1)."""

    id: int
    alpha: float
    beta: float
    mass: float = 1.0

    def __post_init__(self):
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise DomainError(
                f"population {self.id}: alpha must be nonnegative and finite, got {self.alpha}"
            )
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise DomainError(
                f"population {self.id}: beta must be positive and finite, got {self.beta}"
            )
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise DomainError(
                f"population {self.id}: mass must be positive and finite, got {self.mass}"
            )

    @property
    def gamma(self) -> float:
        return gamma_of(self.alpha, self.beta)

    @property
    def weight(self) -> float:
        """Total cost weight alpha + beta."""
        return self.alpha + self.beta


@dataclass(frozen=True)
class Options:
    """Numeric options: closed-form tolerance, verifier grid step, RNG seed."""

    tol: float = DEFAULT_TOL
    grid_step: float | None = None
    seed: int = 0


@dataclass(frozen=True)
class Scenario:
    """Immutable problem instance.

    Queues are stored sorted by start time (ties by id) with the earliest
    start shifted to zero; populations are sorted by gamma ascending (ties by
    id).  ``time_origin`` is the offset subtracted from all start times.
    """

    queues: tuple[QueueSpec, ...]
    populations: tuple[PopulationSpec, ...]
    options: Options = field(default_factory=Options)
    time_origin: float = 0.0

    def __post_init__(self):
        if len(self.queues) < 1:
            raise DomainError("scenario needs at least one queue")
        if len(self.populations) < 1:
            raise DomainError("scenario needs at least one population")

    @property
    def n_queues(self) -> int:
        return len(self.queues)

    @property
    def n_populations(self) -> int:
        return len(self.populations)

    @property
    def total_mass(self) -> float:
        return sum(p.mass for p in self.populations)

    @property
    def total_rate(self) -> float:
        return sum(q.mu for q in self.queues)

    def queue(self, queue_id: int) -> QueueSpec:
        for q in self.queues:
            if q.id == queue_id:
                return q
        raise KeyError(f"no queue with id {queue_id}")

    def population(self, pop_id: int) -> PopulationSpec:
        for p in self.populations:
            if p.id == pop_id:
                return p
        raise KeyError(f"no population with id {pop_id}")

    def without_queues(self, queue_ids) -> "Scenario":
        """Copy of the scenario with the given queues removed."""
        drop = set(queue_ids)
        kept = tuple(q for q in self.queues if q.id not in drop)
        if not kept:
            raise DomainError("cannot drop every queue")
        return replace(self, queues=kept)


@dataclass(frozen=True)
class ValidationReport:
    feasible: bool
    pruned_queues: tuple[int, ...]
    messages: tuple[str, ...]


def _sorted_queues(queues: list[QueueSpec]) -> tuple[QueueSpec, ...]:
    return tuple(sorted(queues, key=lambda q: (q.t_start, q.id)))


def _sorted_populations(pops: list[PopulationSpec]) -> tuple[PopulationSpec, ...]:
    return tuple(sorted(pops, key=lambda p: (p.gamma, p.id)))


_TOP_KEYS = {"queues", "populations", "options"}
_QUEUE_KEYS = {"mu", "t_start"}
_POP_KEYS = {"alpha", "beta", "mass"}
_OPTION_KEYS = {"tol", "grid_step", "seed"}


def _require_number(value, locus: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{locus}: expected a number, got {value!r}")
    out = float(value)
    if not math.isfinite(out):
        raise ParseError(f"{locus}: value must be finite, got {value!r}")
    return out


def scenario_from_dict(doc: dict) -> Scenario:
    """Build a Scenario from a parsed scenario document (see parse_scenario)."""
    if not isinstance(doc, dict):
        raise ParseError(f"scenario document must be an object, got {type(doc).__name__}")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ParseError(f"unknown scenario keys: {sorted(unknown)}")
    if "queues" not in doc or "populations" not in doc:
        raise ParseError("scenario document needs 'queues' and 'populations'")

    queues = []
    for i, entry in enumerate(doc["queues"]):
        locus = f"queues[{i}]"
        if not isinstance(entry, dict):
            raise ParseError(f"{locus}: expected an object")
        unknown = set(entry) - _QUEUE_KEYS
        if unknown:
            raise ParseError(f"{locus}: unknown keys {sorted(unknown)}")
        if "mu" not in entry or "t_start" not in entry:
            raise ParseError(f"{locus}: needs 'mu' and 't_start'")
        queues.append(
            QueueSpec(
                id=i + 1,
                mu=_require_number(entry["mu"], f"{locus}.mu"),
                t_start=_require_number(entry["t_start"], f"{locus}.t_start"),
            )
        )

    populations = []
    for i, entry in enumerate(doc["populations"]):
        locus = f"populations[{i}]"
        if not isinstance(entry, dict):
            raise ParseError(f"{locus}: expected an object")
        unknown = set(entry) - _POP_KEYS
        if unknown:
            raise ParseError(f"{locus}: unknown keys {sorted(unknown)}")
        if "alpha" not in entry or "beta" not in entry:
            raise ParseError(f"{locus}: needs 'alpha' and 'beta'")
        populations.append(
            PopulationSpec(
                id=i + 1,
                alpha=_require_number(entry["alpha"], f"{locus}.alpha"),
                beta=_require_number(entry["beta"], f"{locus}.beta"),
                mass=_require_number(entry.get("mass", 1.0), f"{locus}.mass"),
            )
        )

    if not queues:
        raise ParseError("queues: at least one queue is required")
    if not populations:
        raise ParseError("populations: at least one population is required")

    opts = doc.get("options", {})
    if not isinstance(opts, dict):
        raise ParseError("options: expected an object")
    unknown = set(opts) - _OPTION_KEYS
    if unknown:
        raise ParseError(f"options: unknown keys {sorted(unknown)}")
    grid_step = opts.get("grid_step")
    seed = opts.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ParseError(f"options.seed: expected an integer, got {seed!r}")
    options = Options(
        tol=_require_number(opts.get("tol", DEFAULT_TOL), "options.tol"),
        grid_step=None if grid_step is None else _require_number(grid_step, "options.grid_step"),
        seed=seed,
    )

    sorted_queues = _sorted_queues(queues)
    origin = sorted_queues[0].t_start
    if origin != 0.0:
        sorted_queues = tuple(
            replace(q, t_start=q.t_start - origin) for q in sorted_queues
        )
    return Scenario(
        queues=sorted_queues,
        populations=_sorted_populations(populations),
        options=options,
        time_origin=origin,
    )


def parse_scenario(text: str) -> Scenario:
    """Parse a UTF-8 JSON scenario document.

    The document is an object with keys ``queues`` (array of
    ``{mu, t_start}``), ``populations`` (array of ``{alpha, beta, mass?}``)
    and optional ``options`` (``{tol?, grid_step?, seed?}``).  Unknown keys
    are rejected.  Raises ParseError with a field locus for malformed input
    and DomainError for out-of-range values.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(doc)


def scenario_to_dict(s: Scenario) -> dict:
    """Inverse of scenario_from_dict; start times are in original coordinates.

    Entries are emitted in id order, which is the original document order, so
    parsing the result reproduces the scenario field for field.
    """
    doc: dict = {
        "queues": [
            {"mu": q.mu, "t_start": q.t_start + s.time_origin}
            for q in sorted(s.queues, key=lambda q: q.id)
        ],
        "populations": [
            {"alpha": p.alpha, "beta": p.beta, "mass": p.mass}
            for p in sorted(s.populations, key=lambda p: p.id)
        ],
        "options": {"tol": s.options.tol, "seed": s.options.seed},
    }
    if s.options.grid_step is not None:
        doc["options"]["grid_step"] = s.options.grid_step
    return doc


def no_idling_terminal_time(mass: float, queues) -> float:
    """Time at which servers that never idle after opening finish ``mass``.

    Solves sum_k mu_k * (T - t_start_k) = mass over the given queues.
    """
    total_rate = sum(q.mu for q in queues)
    weighted_starts = sum(q.mu * q.t_start for q in queues)
    return (mass + weighted_starts) / total_rate


def validate_scenario(s: Scenario) -> ValidationReport:
    """Feasibility report: late-opening queues that would see no arrivals are
    pruned iteratively, and multi-population gamma ties are flagged.

    Never raises for feasibility issues; it only reports.
    """
    messages: list[str] = []
    pruned: list[int] = []
    active = list(s.queues)
    mass = s.total_mass
    while len(active) > 1:
        rest = active[:-1]
        last = active[-1]
        t_rest = no_idling_terminal_time(mass, rest)
        if last.t_start >= t_rest:
            pruned.append(last.id)
            messages.append(
                f"queue {last.id} pruned: starts at {last.t_start:g} but the remaining "
                f"queues alone finish all mass at {t_rest:g}, so it would see no arrivals"
            )
            active = rest
        else:
            break

    feasible = True
    if s.n_populations > 1:
        gammas = [p.gamma for p in s.populations]
        for a, b in zip(s.populations, s.populations[1:]):
            if not (a.gamma < b.gamma):
                feasible = False
                messages.append(
                    f"populations {a.id} and {b.id} share gamma={a.gamma:g}; the "
                    "multi-population solver needs strictly increasing gammas"
                )
                break
        del gammas
    return ValidationReport(
        feasible=feasible, pruned_queues=tuple(pruned), messages=tuple(messages)
    )


def pruned_scenario(s: Scenario) -> tuple[Scenario, ValidationReport]:
    """Validate and return the scenario with pruned queues removed."""
    report = validate_scenario(s)
    if report.pruned_queues:
        return s.without_queues(report.pruned_queues), report
    return s, report
