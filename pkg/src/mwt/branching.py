"""Branching-process oracles for cross-validating the Moran simulator.

When mutant counts are far below the population size, a mutant lineage in
the Moran model behaves like a critical branching process (birth rate 1,
death rate 1, mutation rate mu per individual).  These small simulators are
independent of the Moran event loop and of the analytic formulas, so they
triangulate both: lineage success probabilities against the p_j recursion,
the two-type hitting probability against its tanh limit, and the
immigration process against the borderline quadrature law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .limits import p_recursion
from .model import Outcome, SimBudget
from .rng import SplitMix64, as_stream, seed_for_replicate

DEFAULT_Q_BUDGET = SimBudget(max_events=10**7)


def simulate_q(
    m: int,
    mu: float,
    budget: SimBudget | None = None,
    rng: SplitMix64 | int = 0,
) -> Outcome:
    """One critical multitype branching run from a single level-1 individual.

    Every individual gives birth at rate 1, dies at rate 1, and mutates to
    the next level at rate mu; the run ends when a level-m individual is
    born (TYPE_M_BORN) or the population dies out (EXTINCT; certain when
    mu == 0).  Critical lifetimes are heavy tailed, so runs hitting the
    event cap come back TRUNCATED rather than running forever.
    """
    if m < 2:
        raise ValueError("need m >= 2")
    if mu < 0.0:
        raise ValueError("mutation rate must be nonnegative")
    budget = budget if budget is not None else DEFAULT_Q_BUDGET
    stream = as_stream(rng)
    out, _, s_out = _kernels.branch_q(m, mu, budget.max_events, np.uint64(stream.state))
    stream.state = int(s_out)
    return Outcome(int(out))


@dataclass(frozen=True)
class QEstimate:
    """Monte Carlo estimate of the lineage success probability.

    Truncated replicates are excluded from p_hat and reported separately;
    because truncation cuts long-lived (success-prone) lineages, p_hat is
    biased low by at most truncated/replicates.
    """

    born: int
    extinct: int
    truncated: int

    @property
    def replicates(self) -> int:
        return self.born + self.extinct + self.truncated

    @property
    def p_hat(self) -> float:
        done = self.born + self.extinct
        return self.born / done if done else math.nan

    def stderr(self) -> float:
        done = self.born + self.extinct
        p = self.p_hat
        return math.sqrt(p * (1.0 - p) / done) if done else math.nan


def estimate_q(
    m: int,
    mu: float,
    replicates: int,
    base_seed: int,
    budget: SimBudget | None = None,
) -> QEstimate:
    """Batch of simulate_q runs on per-replicate streams."""
    if m < 2:
        raise ValueError("need m >= 2")
    if mu < 0.0:
        raise ValueError("mutation rate must be nonnegative")
    budget = budget if budget is not None else DEFAULT_Q_BUDGET
    seeds = np.array(
        [seed_for_replicate(base_seed, i) for i in range(replicates)], dtype=np.uint64
    )
    outcomes = np.empty(replicates, dtype=np.int64)
    _kernels.branch_q_batch(m, mu, budget.max_events, seeds, outcomes)
    return QEstimate(
        born=int(np.count_nonzero(outcomes == _kernels.BORN)),
        extinct=int(np.count_nonzero(outcomes == _kernels.EXTINCT)),
        truncated=int(np.count_nonzero(outcomes == _kernels.TRUNCATED)),
    )


def simulate_two_type_mutation(r: float, horizon: float, rng: SplitMix64 | int = 0) -> bool:
    """Whether a type-2 individual is born by the horizon.

    One critical line (birth 1, death 1) whose members mutate at rate r.
    For r -> 0 the probability scales like sqrt(r) * tanh(sqrt(r) * horizon).
    """
    if r <= 0.0:
        raise ValueError("mutation rate must be positive")
    if horizon < 0.0:
        raise ValueError("horizon must be nonnegative")
    if horizon == 0.0:
        return False
    stream = as_stream(rng)
    flag, s_out = _kernels.two_type_mutation(r, horizon, np.uint64(stream.state))
    stream.state = int(s_out)
    return bool(flag)


def estimate_two_type_mutation(r: float, horizon: float, replicates: int, base_seed: int) -> float:
    """Empirical probability over a batch of two-type runs."""
    if horizon == 0.0:
        return 0.0
    seeds = np.array(
        [seed_for_replicate(base_seed, i) for i in range(replicates)], dtype=np.uint64
    )
    outcomes = np.empty(replicates, dtype=np.int64)
    _kernels.two_type_mutation_batch(r, horizon, seeds, outcomes)
    return float(outcomes.mean())


def simulate_model5(
    n: int,
    mu: float,
    m: int,
    j: int,
    horizon: float,
    rng: SplitMix64 | int = 0,
) -> bool:
    """Two-type branching process with immigration: success by the horizon?

    Level-(m-j) individuals immigrate at the inhomogeneous Poisson rate
    n * mu^(m-j) * s^(m-j-1) / (m-j-1)!, realised by thinning against the
    rate at the horizon (the rate is nondecreasing in s).  Each individual
    gives birth and dies at rate 1 and converts to a terminal success at
    rate mu * q_j with q_j from the exact level recursion; conversion is
    instantaneous success, so only one living type is tracked.
    """
    if not 1 <= j <= m - 1:
        raise ValueError("need 1 <= j <= m-1")
    if horizon < 0.0:
        raise ValueError("horizon must be nonnegative")
    if horizon == 0.0 or mu == 0.0:
        return False
    qj = p_recursion(mu, j)
    stream = as_stream(rng)
    flag, _, s_out = _kernels.model5(n, mu, m, j, qj, horizon, np.uint64(stream.state))
    stream.state = int(s_out)
    return bool(flag)


@dataclass(frozen=True)
class Model5Estimate:
    no_success: float
    mean_immigrants: float
    replicates: int


def estimate_model5(
    n: int,
    mu: float,
    m: int,
    j: int,
    horizon: float,
    replicates: int,
    base_seed: int,
) -> Model5Estimate:
    """Batch of immigration runs; also reports the mean immigrant count,
    which should match the integrated immigration rate."""
    if not 1 <= j <= m - 1:
        raise ValueError("need 1 <= j <= m-1")
    if mu <= 0.0:
        raise ValueError("mutation rate must be positive")
    qj = p_recursion(mu, j)
    seeds = np.array(
        [seed_for_replicate(base_seed, i) for i in range(replicates)], dtype=np.uint64
    )
    outcomes = np.empty(replicates, dtype=np.int64)
    immigrants = np.empty(replicates, dtype=np.int64)
    _kernels.model5_batch(n, mu, m, j, qj, horizon, seeds, outcomes, immigrants)
    return Model5Estimate(
        no_success=float(1.0 - outcomes.mean()),
        mean_immigrants=float(immigrants.mean()),
        replicates=replicates,
    )
