import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from mwt.model import (
    AbsorbedStateError,
    Mutation,
    Replacement,
    SimBudget,
    StalledError,
    effective_rates,
    new_population,
    observe_trajectory,
    observe_trajectory_batch,
    simulate_tau,
    simulate_tau_batch,
    simulate_two_type_occupation,
    simulate_two_type_occupation_batch,
    step,
)
from mwt.rng import SplitMix64

# ----------------------------------------------------------------------
# construction and rate tables
# ----------------------------------------------------------------------


def test_new_population_initial_condition():
    state = new_population(5, 2)
    assert state.counts.tolist() == [5, 0, 0]
    assert state.clock == 0.0
    state = new_population(2, 1)
    assert state.counts.tolist() == [2, 0]


def test_new_population_rejects_degenerate():
    with pytest.raises(ValueError):
        new_population(1, 1)
    with pytest.raises(ValueError):
        new_population(10, 0)


def test_rates_homogeneous_state():
    state = new_population(50, 3)
    table = effective_rates(state, 0.01)
    assert table.replacements == {}
    assert table.mutations == {0: pytest.approx(0.5)}
    assert table.total_rate == pytest.approx(50 * 0.01)


def test_rates_two_types_match_birth_death():
    n, k = 100, 7
    state = new_population(n, 2)
    state.counts[:] = [n - k, k, 0]
    table = effective_rates(state, 0.0)
    expect = k * (n - k) / n
    assert table.replacements[(0, 1)] == pytest.approx(expect)
    assert table.replacements[(1, 0)] == pytest.approx(expect)
    assert table.total_rate == pytest.approx(2 * expect)


@given(
    n=st.integers(min_value=2, max_value=200),
    m=st.integers(min_value=1, max_value=6),
    mu=st.floats(min_value=0.0, max_value=1.0),
    data=st.data(),
)
@settings(max_examples=150, deadline=None)
def test_rate_table_totals_on_random_states(n, m, mu, data):
    # split n across the m+1 levels
    cuts = sorted(
        data.draw(st.lists(st.integers(min_value=0, max_value=n), min_size=m, max_size=m))
    )
    counts = np.diff([0, *cuts, n]).astype(np.int64)
    state = new_population(n, m)
    state.counts[:] = counts
    table = effective_rates(state, mu)
    s2 = int((counts * counts).sum())
    expect = (n * n - s2) / n + mu * counts[:m].sum()
    assert table.total_rate == pytest.approx(expect, rel=1e-12)
    assert all(r > 0 for r in table.replacements.values())
    assert all(r > 0 for r in table.mutations.values())


# ----------------------------------------------------------------------
# step()
# ----------------------------------------------------------------------


def test_step_conserves_population():
    rng = SplitMix64(11)
    state = new_population(40, 3)
    for _ in range(2000):
        if state.absorbed:
            break
        step(state, 0.05, rng)
        assert state.counts.sum() == 40
        assert np.all(state.counts >= 0)


def test_step_homogeneous_always_mutates_and_dt_is_exponential():
    n, mu = 1000, 0.01
    rng = SplitMix64(7)
    dts = []
    for _ in range(5000):
        state = new_population(n, 2)
        event, dt = step(state, mu, rng)
        assert event == Mutation(0)
        dts.append(dt)
    scaled = np.sort(np.array(dts) * n * mu)
    ks = np.abs(np.arange(1, 5001) / 5000 - (1 - np.exp(-scaled))).max()
    assert ks < math.sqrt(math.log(2 / 0.001) / (2 * 5000))


def test_step_stalls_without_mutation():
    state = new_population(10, 1)
    with pytest.raises(StalledError):
        step(state, 0.0, SplitMix64(0))


def test_step_rejects_absorbed_state():
    state = new_population(10, 1)
    state.counts[:] = [9, 1]
    with pytest.raises(AbsorbedStateError):
        step(state, 0.1, SplitMix64(0))


def test_step_deterministic_sequence():
    def run():
        rng = SplitMix64(99)
        state = new_population(30, 2)
        events = []
        while not state.absorbed:
            events.append(step(state, 0.01, rng))
        return events, state.clock

    a, ca = run()
    b, cb = run()
    assert a == b
    assert ca == cb


def test_replacement_event_changes_two_levels():
    rng = SplitMix64(4)
    state = new_population(10, 2)
    state.counts[:] = [5, 5, 0]
    before = state.counts.copy()
    event, _ = step(state, 0.0, rng)
    assert isinstance(event, Replacement)
    delta = state.counts - before
    assert delta[event.parent] == 1 and delta[event.victim] == -1


# ----------------------------------------------------------------------
# simulate_tau
# ----------------------------------------------------------------------


def test_tau_stalled_when_mu_zero():
    with pytest.raises(StalledError):
        simulate_tau(10, 0.0, 1, rng=3)
    with pytest.raises(StalledError):
        simulate_tau(10, 0.0, 2, rng=3, engine="event")


def test_tau1_mean_matches_exponential_rate():
    # tau_1 ~ Exp(n*mu) exactly
    n, mu, reps = 10, 0.1, 10_000
    taus, events, fixations, truncated = simulate_tau_batch(n, mu, 1, reps, base_seed=2001)
    assert not truncated.any()
    assert np.all(events == 1)
    mean = taus.mean()
    se = taus.std(ddof=1) / math.sqrt(reps)
    assert abs(mean - 1.0 / (n * mu)) < 3 * se


def test_tau_deterministic_across_runs():
    for engine in ("event", "aggregate"):
        a = simulate_tau(100, 1e-3, 2, rng=42, engine=engine)
        b = simulate_tau(100, 1e-3, 2, rng=42, engine=engine)
        assert a == b


def test_tau_python_reference_matches_event_kernel():
    cases = [(30, 0.02, 3), (100, 1e-3, 2), (12, 0.3, 4), (50, 0.05, 1)]
    for n, mu, m in cases:
        for seed in range(4):
            py = simulate_tau(n, mu, m, rng=seed, engine="python")
            ev = simulate_tau(n, mu, m, rng=seed, engine="event")
            assert py.events == ev.events, (n, mu, m, seed)
            assert py.fixations == ev.fixations
            assert py.truncated == ev.truncated
            assert py.tau == pytest.approx(ev.tau, rel=1e-11)


def test_tau_python_reference_matches_event_kernel_with_time_cap():
    budget = SimBudget(max_time=50.0)
    for seed in range(3):
        py = simulate_tau(60, 1e-4, 2, budget=budget, rng=seed, engine="python")
        ev = simulate_tau(60, 1e-4, 2, budget=budget, rng=seed, engine="event")
        assert py.truncated and ev.truncated
        assert py.tau == ev.tau == 50.0
        assert py.events == ev.events


def test_tau_event_budget_truncation():
    sample = simulate_tau(50, 1e-5, 2, budget=SimBudget(max_events=5), rng=0, engine="event")
    assert sample.truncated
    assert sample.events == 5
    assert sample.tau > 0.0


def test_tau_aggregate_budget_truncation():
    sample = simulate_tau(
        50, 1e-5, 2, budget=SimBudget(max_events=5), rng=0, engine="aggregate"
    )
    assert sample.truncated
    assert sample.events == 5
    assert sample.tau > 0.0


def test_single_mutant_truncation():
    from mwt.model import Outcome, simulate_single_mutant

    out = simulate_single_mutant(500, 1e-4, 2, budget=SimBudget(max_events=3), rng=0)
    assert out is Outcome.TRUNCATED


def test_aggregate_engine_guards():
    with pytest.raises(ValueError):
        simulate_tau(50, 1e-3, 3, rng=0, engine="aggregate")
    with pytest.raises(ValueError):
        simulate_tau(50, 1e-3, 2, budget=SimBudget(max_time=10.0), rng=0, engine="aggregate")
    with pytest.raises(ValueError):
        simulate_tau(50, 1e-3, 2, rng=0, engine="nonsense")


def _exact_mean_tau2(n: int, mu: float) -> float:
    # absorption-time linear system on the one-dimensional m=2 chain:
    # R_k h_k - down_k h_{k-1} - up_k h_{k+1} = 1, absorbing via mutation
    size = n + 1
    A = np.zeros((size, size))
    for k in range(size):
        rep = k * (n - k) / n
        down = rep
        up = rep + mu * (n - k)
        A[k, k] = down + up + mu * k
        if k > 0:
            A[k, k - 1] = -down
        if k < n:
            A[k, k + 1] = -up
    h = np.linalg.solve(A, np.ones(size))
    return float(h[0])


@pytest.mark.parametrize("engine", ["event", "aggregate"])
def test_tau2_mean_matches_linear_solve_oracle(engine):
    n, mu, reps = 50, 1e-3, 20_000
    exact = _exact_mean_tau2(n, mu)
    taus, _, _, truncated = simulate_tau_batch(n, mu, 2, reps, base_seed=77, engine=engine)
    assert not truncated.any()
    se = taus.std(ddof=1) / math.sqrt(reps)
    assert abs(taus.mean() - exact) < 4 * se, (engine, taus.mean(), exact)


def _exact_laplace_tau2(n: int, mu: float, s: float) -> float:
    # phi_k = E_k[exp(-s tau)] solves (R_k + s) phi_k =
    #   down_k phi_{k-1} + up_k phi_{k+1} + absorb_k
    size = n + 1
    A = np.zeros((size, size))
    b = np.zeros(size)
    for k in range(size):
        rep = k * (n - k) / n
        down = rep
        up = rep + mu * (n - k)
        absorb = mu * k
        A[k, k] = down + up + absorb + s
        if k > 0:
            A[k, k - 1] = -down
        if k < n:
            A[k, k + 1] = -up
        b[k] = absorb
    return float(np.linalg.solve(A, b)[0])


@pytest.mark.parametrize("engine", ["event", "aggregate"])
def test_tau2_laplace_transform_matches_linear_solve(engine):
    # pins the distribution shape, not just the mean
    n, mu, reps = 50, 1e-3, 20_000
    taus, _, _, _ = simulate_tau_batch(n, mu, 2, reps, base_seed=78, engine=engine)
    for s in (5e-4, 2e-3):
        exact = _exact_laplace_tau2(n, mu, s)
        emp = np.exp(-s * taus)
        se = emp.std(ddof=1) / math.sqrt(reps)
        assert abs(emp.mean() - exact) < 4 * se, (engine, s, emp.mean(), exact)


def _exact_mean_tau3(n: int, mu: float) -> float:
    # full absorption-time solve on the lumped (X_1, X_2) chain: exercises
    # every replacement pair and both nonterminal mutation channels
    idx = {}
    for a in range(n + 1):
        for b in range(n + 1 - a):
            idx[(a, b)] = len(idx)
    A = np.zeros((len(idx), len(idx)))
    for (a, b), i in idx.items():
        c = n - a - b
        total = mu * b  # absorbing 2 -> 3 mutation
        for rate, nxt in (
            (mu * c, (a + 1, b)),       # mutation 0 -> 1
            (mu * a, (a - 1, b + 1)),   # mutation 1 -> 2
            (c * a / n, (a - 1, b)),    # parent 0 replaces a type 1
            (c * b / n, (a, b - 1)),    # parent 0 replaces a type 2
            (a * c / n, (a + 1, b)),    # parent 1 replaces a type 0
            (a * b / n, (a + 1, b - 1)),
            (b * c / n, (a, b + 1)),
            (b * a / n, (a - 1, b + 1)),
        ):
            if rate > 0.0:
                total += rate
                A[i, idx[nxt]] -= rate
        A[i, i] += total
    h = np.linalg.solve(A, np.ones(len(idx)))
    return float(h[idx[(0, 0)]])


def test_tau3_mean_matches_linear_solve_oracle():
    n, mu, reps = 40, 2e-3, 20_000
    exact = _exact_mean_tau3(n, mu)
    taus, _, _, truncated = simulate_tau_batch(n, mu, 3, reps, base_seed=88, engine="event")
    assert not truncated.any()
    se = taus.std(ddof=1) / math.sqrt(reps)
    assert abs(taus.mean() - exact) < 4 * se, (taus.mean(), exact)


@pytest.mark.parametrize("n,mu", [(50, 1e-3), (400, 5e-3)])
def test_engines_agree_in_distribution(n, mu):
    # one fixation-dominated point, one rapid-mutation point
    reps = 20_000
    ev, _, fx_e, _ = simulate_tau_batch(n, mu, 2, reps, base_seed=5, engine="event")
    ag, _, fx_a, _ = simulate_tau_batch(n, mu, 2, reps, base_seed=6, engine="aggregate")
    assert stats.ks_2samp(ev, ag).pvalue > 1e-3
    # fixation frequencies agree within binomial error
    pa, pb = fx_e.mean(), fx_a.mean()
    pooled = (fx_e.sum() + fx_a.sum()) / (2 * reps)
    se = math.sqrt(max(2 * pooled * (1 - pooled) / reps, 1e-12))
    assert abs(pa - pb) < 4 * se


def test_python_batch_matches_event_batch():
    py = simulate_tau_batch(30, 1e-2, 2, 6, base_seed=2, engine="python")
    ev = simulate_tau_batch(30, 1e-2, 2, 6, base_seed=2, engine="event")
    assert np.array_equal(py[1], ev[1])  # events
    assert np.array_equal(py[2], ev[2])  # fixations
    assert np.allclose(py[0], ev[0], rtol=1e-11)


def test_batch_matches_single_replicates():
    taus, events, fixations, truncated = simulate_tau_batch(
        40, 5e-3, 2, 8, base_seed=321, engine="event"
    )
    from mwt.rng import seed_for_replicate

    for i in range(8):
        one = simulate_tau(40, 5e-3, 2, rng=seed_for_replicate(321, i), engine="event")
        assert one.tau == taus[i]
        assert one.events == events[i]
        assert one.fixations == fixations[i]
        assert one.truncated == bool(truncated[i])


def test_budget_validation():
    with pytest.raises(ValueError):
        SimBudget(max_events=0)
    with pytest.raises(ValueError):
        SimBudget(max_time=0.0)


# ----------------------------------------------------------------------
# two-type occupation runs
# ----------------------------------------------------------------------


def test_occupation_n2_single_event_exponential():
    # at n=2 the walk absorbs at its first replacement; rate 2*1*1/2 = 1
    times = []
    for i in range(20_000):
        t, occ, fixated = simulate_two_type_occupation(2, rng=SplitMix64(i))
        assert occ[1] == t
        times.append(t)
    times = np.sort(times)
    ks = np.abs(np.arange(1, len(times) + 1) / len(times) - (1 - np.exp(-times))).max()
    assert ks < math.sqrt(math.log(2 / 0.001) / (2 * len(times)))


def test_occupation_mean_is_one_over_k():
    # E[L_k] = 1/k, exact at any n for k <= n-1
    n, reps = 30, 30_000
    _, occ, _ = simulate_two_type_occupation_batch(n, reps, base_seed=8)
    for k in (1, 2, 3, 5, 8):
        mean = occ[:, k].mean()
        se = occ[:, k].std(ddof=1) / math.sqrt(reps)
        assert abs(mean - 1.0 / k) < 4 * se, k


def test_occupation_fixation_probability():
    n, reps = 20, 40_000
    _, _, fixed = simulate_two_type_occupation_batch(n, reps, base_seed=9)
    p_hat = fixed.mean()
    se = math.sqrt((1 / n) * (1 - 1 / n) / reps)
    assert abs(p_hat - 1.0 / n) < 3.5 * se


def test_occupation_rejects_small_population():
    with pytest.raises(ValueError):
        simulate_two_type_occupation(1, rng=0)


# ----------------------------------------------------------------------
# trajectory observation
# ----------------------------------------------------------------------


def test_trajectory_grid_zero_returns_initial_row():
    out = observe_trajectory(25, 0.01, 2, horizon=1.0, grid=[0.0], rng=1)
    assert out.tolist() == [[25, 0, 0]]


def test_trajectory_deterministic():
    grid = [0.0, 0.5, 1.0, 2.0]
    a = observe_trajectory(50, 0.05, 3, horizon=2.0, grid=grid, rng=12)
    b = observe_trajectory(50, 0.05, 3, horizon=2.0, grid=grid, rng=12)
    assert np.array_equal(a, b)


def test_trajectory_rows_conserve_population():
    grid = np.linspace(0.0, 3.0, 7)
    out = observe_trajectory(40, 0.1, 3, horizon=3.0, grid=grid, rng=5)
    assert np.all(out.sum(axis=1) == 40)


def test_trajectory_grid_validation():
    with pytest.raises(ValueError):
        observe_trajectory(10, 0.1, 2, horizon=1.0, grid=[0.5, 0.2], rng=0)
    with pytest.raises(ValueError):
        observe_trajectory(10, 0.1, 2, horizon=1.0, grid=[0.5, 2.0], rng=0)
    with pytest.raises(ValueError):
        observe_trajectory(10, 0.1, 2, horizon=1.0, grid=[], rng=0)


def test_trajectory_frozen_after_stall():
    # mu == 0 freezes the all-type-0 state; rows repeat it
    out = observe_trajectory(12, 0.0, 2, horizon=5.0, grid=[0.0, 1.0, 5.0], rng=3)
    assert np.all(out[:, 0] == 12)


def test_trajectory_mean_counts_match_poisson_cascade():
    # neutral replacement leaves E[X_j] untouched, so E[X_k(t)] is exactly
    # n * e^(-mu t) (mu t)^k / k! for k < m; this sits inside the
    # deterministic band of width eps * n mu^k T^k around n (mu t)^k / k!
    n, mu, m, t = 20_000, 0.05, 3, 1.0
    reps = 2000
    outs = observe_trajectory_batch(n, mu, m, [t], reps, base_seed=31)
    x2 = outs[:, 0, 2].astype(float)
    target = n * (mu * t) ** 2 / 2.0
    exact = target * math.exp(-mu * t)
    se = x2.std(ddof=1) / math.sqrt(reps)
    assert abs(x2.mean() - exact) < 4 * se
    assert abs(x2.mean() - target) < 0.1 * target


def test_trajectory_tail_counts_below_poisson_bound():
    # E[sum_{j>=k} X_j(t)] <= n mu^k t^k / k!
    n, mu, m, t = 20_000, 0.05, 3, 1.0
    reps = 2000
    outs = observe_trajectory_batch(n, mu, m, [t], reps, base_seed=32)
    y2 = outs[:, 0, 2:].sum(axis=1).astype(float)
    bound = n * (mu * t) ** 2 / 2.0
    se = y2.std(ddof=1) / math.sqrt(reps)
    assert y2.mean() <= bound + 3 * se
