"""Exact continuous-time simulation of the Moran model with mutation levels.

A population of fixed size n evolves by replacement: each individual dies at
rate 1 and is replaced by the offspring of a uniformly chosen parent.  Every
individual of level j < m independently mutates to level j+1 at rate mu.
The observable of interest is tau_m, the first time any individual carries
m mutations.

Individuals are exchangeable, so the simulation tracks only the count
vector (counts[j] = number of level-j individuals).  Replacements between
individuals of the same level change nothing and are elided from the event
space; in a homogeneous population only mutation events remain, which turns
the long waits of the small-mutation-rate regimes into single exponential
draws.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .rng import SplitMix64, as_stream, seed_for_replicate


class StalledError(RuntimeError):
    """Total event rate reached zero before absorption (mu == 0 runs)."""


class AbsorbedStateError(RuntimeError):
    """step() called on a state that already contains a level-m individual."""


@dataclass
class SimBudget:
    """Caps on one replicate: effective transitions and model time."""

    max_events: int = 2**62
    max_time: float = math.inf

    def __post_init__(self):
        if self.max_events <= 0 or self.max_time <= 0:
            raise ValueError("budget caps must be positive")


@dataclass
class PopulationState:
    """Lumped Moran state: counts[j] = number of individuals with j mutations."""

    counts: np.ndarray
    n: int
    clock: float = 0.0

    @property
    def m(self) -> int:
        return len(self.counts) - 1

    @property
    def absorbed(self) -> bool:
        return bool(self.counts[self.m] > 0)


@dataclass(frozen=True)
class TauSample:
    """One replicate's waiting-time record.

    If ``truncated`` is set the budget ran out first and ``tau`` is only a
    lower bound for the true waiting time.
    """

    tau: float
    events: int
    fixations: int
    truncated: bool


@dataclass(frozen=True)
class Replacement:
    """A level-``victim`` individual was replaced by offspring of a level-``parent`` one."""

    parent: int
    victim: int


@dataclass(frozen=True)
class Mutation:
    """A level-``level`` individual mutated to ``level + 1``."""

    level: int


Event = Replacement | Mutation


class Outcome(enum.IntEnum):
    """Result of a success/extinction run (codes shared with the kernels)."""

    TYPE_M_BORN = _kernels.BORN
    EXTINCT = _kernels.EXTINCT
    TRUNCATED = _kernels.TRUNCATED


@dataclass(frozen=True)
class RateTable:
    """Nonzero effective rates out of a state.

    replacements[(j, k)] is the rate at which a level-k individual is
    replaced by offspring of a level-j parent (j != k); mutations[j] is the
    rate of level j -> j+1 mutations.
    """

    replacements: dict[tuple[int, int], float]
    mutations: dict[int, float]
    total_rate: float


def _validate_model_args(n: int, mu: float, m: int) -> None:
    if n < 2:
        raise ValueError(f"population size must be at least 2, got {n}")
    if m < 1:
        raise ValueError(f"mutation target must be at least 1, got {m}")
    if mu < 0.0:
        raise ValueError("mutation rate must be nonnegative")


def new_population(n: int, m: int) -> PopulationState:
    """All-type-0 population of size n tracking levels 0..m."""
    _validate_model_args(n, 0.0, m)
    counts = np.zeros(m + 1, dtype=np.int64)
    counts[0] = n
    return PopulationState(counts=counts, n=n)


def effective_rates(state: PopulationState, mu: float) -> RateTable:
    """Every nonzero transition rate out of ``state`` (no-ops excluded)."""
    counts = state.counts
    n = state.n
    m = state.m
    replacements: dict[tuple[int, int], float] = {}
    mutations: dict[int, float] = {}
    total = 0.0
    for j in range(m):
        if counts[j] > 0 and mu > 0.0:
            r = mu * float(counts[j])
            mutations[j] = r
            total += r
    for k in range(m + 1):
        if counts[k] == 0:
            continue
        for j in range(m + 1):
            if j == k or counts[j] == 0:
                continue
            r = float(counts[j] * counts[k]) / float(n)
            replacements[(j, k)] = r
            total += r
    return RateTable(replacements=replacements, mutations=mutations, total_rate=total)


def _lowest_level(counts: np.ndarray) -> int:
    nz = np.flatnonzero(counts)
    return int(nz[0])


def step(state: PopulationState, mu: float, rng: SplitMix64) -> tuple[Event, float]:
    """Execute one effective transition in place; returns (event, dt).

    Draw order (shared with the compiled kernels): one (0,1] uniform for the
    exponential waiting time, one [0,1) uniform for event selection.  The
    selection walks mutations by ascending level, then replacement pairs by
    ascending victim and parent level.
    """
    counts = state.counts
    n = state.n
    m = state.m
    if counts[m] > 0:
        raise AbsorbedStateError("population already contains a level-m individual")

    s2 = int(np.dot(counts, counts))
    nn = float(n)
    rep_rate = float(n * n - s2) / nn
    mut_rate = mu * float(n - counts[m])
    total = rep_rate + mut_rate
    if total <= 0.0:
        raise StalledError("total event rate is zero (mu == 0 in a homogeneous population)")

    dt = -math.log(rng.next_unit_pos()) / total
    u2 = rng.next_unit()

    event: Event
    if rep_rate == 0.0:
        event = Mutation(_lowest_level(counts))
    else:
        v = u2 * total
        sel: Event | None = None
        last: Event | None = None
        for j in range(m):
            w = mu * float(counts[j])
            if w > 0.0:
                last = Mutation(j)
                if v < w:
                    sel = last
                    break
                v -= w
        if sel is None:
            for k in range(m + 1):
                if counts[k] == 0:
                    continue
                for j in range(m + 1):
                    if j == k or counts[j] == 0:
                        continue
                    w = float(counts[j] * counts[k]) / nn
                    last = Replacement(parent=j, victim=k)
                    if v < w:
                        sel = last
                        break
                    v -= w
                if sel is not None:
                    break
        event = sel if sel is not None else last  # type: ignore[assignment]

    if isinstance(event, Mutation):
        counts[event.level] -= 1
        counts[event.level + 1] += 1
    else:
        counts[event.parent] += 1
        counts[event.victim] -= 1
    state.clock += dt
    return event, dt


def _simulate_tau_python(n, mu, m, budget, rng):
    """Reference driver: loops step(); used to cross-check the kernels."""
    state = new_population(n, m)
    events = 0
    fixations = 0
    while True:
        step(state, mu, rng)
        if state.clock > budget.max_time:
            # the transition past the cap is neither counted nor reported
            return TauSample(budget.max_time, events, fixations, True)
        events += 1
        fixations = _lowest_level(state.counts)
        if state.absorbed:
            return TauSample(state.clock, events, fixations, False)
        if events >= budget.max_events:
            return TauSample(state.clock, events, fixations, True)


def simulate_tau(
    n: int,
    mu: float,
    m: int,
    budget: SimBudget | None = None,
    rng: SplitMix64 | int = 0,
    engine: str = "auto",
) -> TauSample:
    """Simulate one replicate of tau_m from an all-type-0 population.

    engine:
      "auto"      -- "aggregate" when it applies, else "event";
      "event"     -- compiled Gillespie loop, any m;
      "aggregate" -- compiled m=2 engine that walks the embedded jump chain
                     and reconstructs the elapsed time from per-state
                     holding-time sums (distributionally exact, roughly
                     twice as fast; requires m == 2, mu > 0 and no time cap);
      "python"    -- pure-Python reference loop over step().

    Raises StalledError when the event rate hits zero (only for mu == 0).
    """
    _validate_model_args(n, mu, m)
    budget = budget if budget is not None else SimBudget()
    stream = as_stream(rng)

    if engine == "auto":
        engine = "aggregate" if (m == 2 and mu > 0.0 and math.isinf(budget.max_time)) else "event"

    if engine == "python":
        return _simulate_tau_python(n, mu, m, budget, stream)

    if engine == "aggregate":
        if m != 2 or mu <= 0.0 or not math.isinf(budget.max_time):
            raise ValueError("aggregate engine requires m == 2, mu > 0 and no time cap")
        t_down, t_up, rtot = _kernels._agg2_tables(n, mu)
        visits = np.zeros(n + 1, dtype=np.int64)
        tau, events, fix, status, s_out = _kernels.tau_agg2(
            n, mu, t_down, t_up, rtot, visits, budget.max_events, np.uint64(stream.state)
        )
    elif engine == "event":
        tau, events, fix, status, s_out = _kernels.tau_event(
            n, mu, m, budget.max_events, budget.max_time, np.uint64(stream.state)
        )
    else:
        raise ValueError(f"unknown engine {engine!r}")

    stream.state = int(s_out)
    if status == _kernels.STALLED:
        raise StalledError("total event rate reached zero before absorption")
    return TauSample(float(tau), int(events), int(fix), status != _kernels.OK)


def simulate_tau_batch(
    n: int,
    mu: float,
    m: int,
    replicates: int,
    base_seed: int,
    budget: SimBudget | None = None,
    engine: str = "auto",
):
    """Independent replicates on streams seed_for_replicate(base_seed, i).

    Returns (taus, events, fixations, truncated) arrays ordered by
    replicate index; the ordering and values do not depend on how many
    threads execute the batch.
    """
    _validate_model_args(n, mu, m)
    if replicates < 1:
        raise ValueError("need at least one replicate")
    budget = budget if budget is not None else SimBudget()
    if engine == "auto":
        engine = "aggregate" if (m == 2 and mu > 0.0 and math.isinf(budget.max_time)) else "event"

    seeds = np.array(
        [seed_for_replicate(base_seed, i) for i in range(replicates)], dtype=np.uint64
    )
    taus = np.empty(replicates, dtype=np.float64)
    events = np.empty(replicates, dtype=np.int64)
    fixations = np.empty(replicates, dtype=np.int64)
    status = np.empty(replicates, dtype=np.int64)

    if engine == "python":
        truncated = np.empty(replicates, dtype=bool)
        for i in range(replicates):
            sample = _simulate_tau_python(n, mu, m, budget, SplitMix64(int(seeds[i])))
            taus[i] = sample.tau
            events[i] = sample.events
            fixations[i] = sample.fixations
            truncated[i] = sample.truncated
        return taus, events, fixations, truncated

    if engine == "aggregate":
        if m != 2 or mu <= 0.0 or not math.isinf(budget.max_time):
            raise ValueError("aggregate engine requires m == 2, mu > 0 and no time cap")
        _kernels.tau_agg2_batch(n, mu, budget.max_events, seeds, taus, events, fixations, status)
    elif engine == "event":
        _kernels.tau_event_batch(
            n, mu, m, budget.max_events, budget.max_time, seeds, taus, events, fixations, status
        )
    else:
        raise ValueError(f"unknown engine {engine!r}")

    if np.any(status == _kernels.STALLED):
        raise StalledError("total event rate reached zero before absorption")
    return taus, events, fixations, status != _kernels.OK


def simulate_two_type_occupation(
    n: int, rng: SplitMix64 | int
) -> tuple[float, np.ndarray, bool]:
    """Occupation times of the two-type replacement walk from one mutant.

    Starts with a single type-1 individual and no mutations, runs until the
    mutant count X hits 0 or n, and returns (absorb_time, occupation,
    fixated) where occupation[k] is the total time spent with X == k.
    """
    if n < 2:
        raise ValueError(f"population size must be at least 2, got {n}")
    stream = as_stream(rng)
    occupation = np.zeros(n + 1, dtype=np.float64)
    t, fixed, s_out = _kernels.two_type_occupation(n, occupation, np.uint64(stream.state))
    stream.state = int(s_out)
    return float(t), occupation, bool(fixed)


def simulate_two_type_occupation_batch(n: int, replicates: int, base_seed: int):
    """Batch version: returns (absorb_times, occupations, fixated)."""
    if n < 2:
        raise ValueError(f"population size must be at least 2, got {n}")
    seeds = np.array(
        [seed_for_replicate(base_seed, i) for i in range(replicates)], dtype=np.uint64
    )
    times = np.empty(replicates, dtype=np.float64)
    occ = np.empty((replicates, n + 1), dtype=np.float64)
    fixed = np.empty(replicates, dtype=np.int64)
    _kernels.two_type_occupation_batch(n, seeds, times, occ, fixed)
    return times, occ, fixed.astype(bool)


def observe_trajectory(
    n: int,
    mu: float,
    m: int,
    horizon: float,
    grid,
    rng: SplitMix64 | int,
) -> np.ndarray:
    """Counts X_j(t) sampled at the grid times from one replicate.

    The run does not stop when a level-m individual appears (levels above m
    are never created), so the grid can straddle tau_m.
    """
    _validate_model_args(n, mu, m)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or len(grid) == 0:
        raise ValueError("grid must be a nonempty 1-d time array")
    if np.any(np.diff(grid) < 0) or grid[0] < 0 or grid[-1] > horizon:
        raise ValueError("grid must be sorted and within [0, horizon]")
    stream = as_stream(rng)
    out = np.empty((len(grid), m + 1), dtype=np.int64)
    s_out = _kernels.trajectory(n, mu, m, grid, out, np.uint64(stream.state))
    stream.state = int(s_out)
    return out


def observe_trajectory_batch(n, mu, m, grid, replicates, base_seed):
    """Trajectories of many replicates; returns (replicates, len(grid), m+1)."""
    _validate_model_args(n, mu, m)
    grid = np.asarray(grid, dtype=np.float64)
    seeds = np.array(
        [seed_for_replicate(base_seed, i) for i in range(replicates)], dtype=np.uint64
    )
    outs = np.empty((replicates, len(grid), m + 1), dtype=np.int64)
    _kernels.trajectory_batch(n, mu, m, grid, outs, seeds)
    return outs


def simulate_single_mutant(
    n: int,
    mu: float,
    m: int,
    budget: SimBudget | None = None,
    rng: SplitMix64 | int = 0,
) -> Outcome:
    """Moran run from one type-1 individual with type-0 mutations disabled.

    The success probability of this run is the finite-N counterpart of the
    branching-process lineage success probability.  Fixation of level 1
    counts as success: once type 0 is extinct a level-m individual is
    eventually born almost surely.
    """
    if n < 2 or m < 2:
        raise ValueError("need n >= 2 and m >= 2")
    budget = budget if budget is not None else SimBudget(max_events=10**7)
    stream = as_stream(rng)
    out, _, s_out = _kernels.single_mutant(n, mu, m, budget.max_events, np.uint64(stream.state))
    stream.state = int(s_out)
    return Outcome(int(out))


def simulate_single_mutant_batch(n, mu, m, replicates, base_seed, max_events=10**7):
    """Outcome codes for many single-mutant runs (see Outcome)."""
    seeds = np.array(
        [seed_for_replicate(base_seed, i) for i in range(replicates)], dtype=np.uint64
    )
    outcomes = np.empty(replicates, dtype=np.int64)
    _kernels.single_mutant_batch(n, mu, m, max_events, seeds, outcomes)
    return outcomes
