"""Numba kernels for the hot simulation loops.

Every kernel consumes a SplitMix64 stream identical to ``rng.SplitMix64``
(same constants, same draw order) so that compiled and pure-Python paths
can be cross-checked.  Single-replicate kernels return the advanced stream
state; batch kernels run one independent stream per replicate and write
results by replicate index, which makes serial and threaded executions
produce identical output.

Status codes for waiting-time runs:
  ``OK`` absorbed (counts[m] > 0), ``TRUNC_EVENTS`` / ``TRUNC_TIME`` budget
  exhausted, ``STALLED`` total rate hit zero (possible only when mu == 0).

Outcome codes for success/extinction runs:
  ``BORN``, ``EXTINCT``, ``TRUNCATED``.
"""

import numpy as np
from numba import njit, prange

U64 = np.uint64
GOLDEN = U64(0x9E3779B97F4A7C15)
_M1 = U64(0xBF58476D1CE4E5B9)
_M2 = U64(0x94D049BB133111EB)
TWO_NEG53 = 2.0**-53

OK = 0
TRUNC_EVENTS = 1
TRUNC_TIME = 2
STALLED = 3

BORN = 0
EXTINCT = 1
TRUNCATED = 2


# ----------------------------------------------------------------------
# SplitMix64 stream (mirrors rng.SplitMix64 bit for bit)
# ----------------------------------------------------------------------

@njit(inline="always")
def _mix64(z):
    z = (z ^ (z >> U64(30))) * _M1
    z = (z ^ (z >> U64(27))) * _M2
    return z ^ (z >> U64(31))


@njit(inline="always")
def _next_u64(s):
    s = s + GOLDEN
    return _mix64(s), s


@njit(inline="always")
def _unit(s):
    # uniform on [0, 1): event selection
    x, s = _next_u64(s)
    return np.float64(x >> U64(11)) * TWO_NEG53, s


@njit(inline="always")
def _unit_pos(s):
    # uniform on (0, 1]: safe for log()
    x, s = _next_u64(s)
    return (np.float64(x >> U64(11)) + 1.0) * TWO_NEG53, s


@njit(cache=True)
def stream_u64(seed, count):
    """Raw outputs of one stream (test hook)."""
    out = np.empty(count, dtype=np.uint64)
    s = seed
    for i in range(count):
        out[i], s = _next_u64(s)
    return out


@njit(cache=True)
def gamma_samples(shape, count, seed):
    """Draws from the integer-shape gamma sampler (test hook)."""
    out = np.empty(count)
    s = seed
    for i in range(count):
        out[i], s = _gamma_int(shape, s)
    return out


@njit(inline="always")
def _gamma_int(shape, s):
    """Gamma(shape, 1) for integer shape >= 1, driven by the stream.

    Small shapes use the product-of-uniforms identity; larger shapes use
    Marsaglia-Tsang with a polar-method normal.
    """
    if shape <= 8:
        prod = 1.0
        for _ in range(shape):
            u, s = _unit_pos(s)
            prod *= u
        return -np.log(prod), s
    d = shape - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    while True:
        while True:
            ua, s = _unit(s)
            ub, s = _unit(s)
            x1 = 2.0 * ua - 1.0
            x2 = 2.0 * ub - 1.0
            r2 = x1 * x1 + x2 * x2
            if 0.0 < r2 < 1.0:
                break
        z = x1 * np.sqrt(-2.0 * np.log(r2) / r2)
        v = 1.0 + c * z
        if v <= 0.0:
            continue
        v = v * v * v
        u, s = _unit_pos(s)
        if np.log(u) < 0.5 * z * z + d - d * v + d * np.log(v):
            return d * v, s


# ----------------------------------------------------------------------
# Moran model, general m: exact event-driven simulation
# ----------------------------------------------------------------------

@njit(cache=True)
def tau_event(n, mu, m, max_events, max_time, seed):
    """One replicate of the waiting time for m mutations.

    Lumped count-vector dynamics with no-op replacements elided: pair
    (parent j, victim k != j) fires at rate counts[j]*counts[k]/n, a level
    j < m mutation at rate mu*counts[j].  In a homogeneous population only
    mutations remain, so long waits collapse to single exponential draws.

    Returns (tau, events, fixations, status, state).
    """
    counts = np.zeros(m + 1, dtype=np.int64)
    counts[0] = n
    s2 = np.int64(n) * np.int64(n)
    nsq = s2
    nn = np.float64(n)
    mut_rate = mu * nn  # sum over j < m of mu*counts[j]; counts[m] == 0 here
    lvl0 = 0
    fixations = np.int64(0)
    events = np.int64(0)
    clock = 0.0
    s = seed

    while True:
        rep_rate = np.float64(nsq - s2) / nn
        total = rep_rate + mut_rate
        if total <= 0.0:
            return clock, events, fixations, STALLED, s

        u1, s = _unit_pos(s)
        dt = -np.log(u1) / total
        clock += dt
        if clock > max_time:
            return max_time, events, fixations, TRUNC_TIME, s

        u2, s = _unit(s)
        events += 1

        # selection: mutations (level ascending), then replacement pairs
        # (victim ascending, parent ascending); falls back to the last
        # positive-weight event if rounding lets v run past the end
        kind = -1
        ej = 0
        ek = 0
        if rep_rate == 0.0:
            kind = 0
            ej = lvl0
        else:
            v = u2 * total
            done = False
            for jj in range(lvl0, m):
                w = mu * np.float64(counts[jj])
                if w > 0.0:
                    kind = 0
                    ej = jj
                    if v < w:
                        done = True
                        break
                    v -= w
            if not done:
                for k in range(lvl0, m + 1):
                    ck = counts[k]
                    if ck == 0:
                        continue
                    for jj in range(lvl0, m + 1):
                        if jj == k:
                            continue
                        cj = counts[jj]
                        if cj == 0:
                            continue
                        w = np.float64(cj * ck) / nn
                        kind = 1
                        ej = jj
                        ek = k
                        if v < w:
                            done = True
                            break
                        v -= w
                    if done:
                        break

        if kind == 0:
            a = counts[ej]
            b = counts[ej + 1]
            counts[ej] = a - 1
            counts[ej + 1] = b + 1
            s2 += 2 * (b - a + 1)
            if ej + 1 == m:
                return clock, events, fixations, OK, s
        else:
            a = counts[ej]
            b = counts[ek]
            counts[ej] = a + 1
            counts[ek] = b - 1
            s2 += 2 * (a - b + 1)

        if counts[lvl0] == 0:
            while lvl0 < m and counts[lvl0] == 0:
                lvl0 += 1
            fixations = np.int64(lvl0)

        if events >= max_events:
            return clock, events, fixations, TRUNC_EVENTS, s


@njit(cache=True, parallel=True)
def tau_event_batch(n, mu, m, max_events, max_time, seeds, taus, events, fixations, status):
    for i in prange(seeds.shape[0]):
        t, ev, fx, st, _ = tau_event(n, mu, m, max_events, max_time, seeds[i])
        taus[i] = t
        events[i] = ev
        fixations[i] = fx
        status[i] = st


# ----------------------------------------------------------------------
# Moran model, m == 2 fast engine
# ----------------------------------------------------------------------
#
# Before absorption the state is one-dimensional: k = X_1 individuals of
# type 1 (X_0 = n - k).  From k the process jumps
#     down  at  k(n-k)/n                  (replacement, parent 0 victim 1)
#     up    at  k(n-k)/n + mu(n-k)        (replacement up, or 0->1 mutation)
#     absorb at mu*k                      (1->2 mutation: tau_2)
# Holding times are Exp(R_k) independent of the embedded walk, so the time
# in state k over n_k visits is Gamma(n_k, R_k), independent across k.  The
# kernel therefore walks the embedded chain (one uniform per event) and
# reconstructs tau as sum_k Gamma(n_k)/R_k afterwards: exact in
# distribution, jointly with event count and the fixation indicator.

@njit(cache=True)
def tau_agg2(n, mu, t_down, t_up, rtot, visits, max_events, seed):
    """One m=2 replicate via the aggregated-holding-time walk.

    ``visits`` is caller-provided int64 scratch of length n+1 (zeroed here).
    Returns (tau, events, fixations, status, state).
    """
    for i in range(n + 1):
        visits[i] = 0
    s = seed
    k = 0
    kmax = 0
    events = np.int64(0)
    fixed = np.int64(0)
    absorbed = False
    while events < max_events:
        u, s = _unit(s)
        visits[k] += 1
        events += 1
        if u < t_down[k]:
            k -= 1
        elif u < t_up[k]:
            k += 1
            if k > kmax:
                kmax = k
                if k == n:
                    fixed = 1
        else:
            absorbed = True
            break
    tau = 0.0
    for j in range(kmax + 1):
        nv = visits[j]
        if nv > 0:
            g, s = _gamma_int(nv, s)
            tau += g / rtot[j]
    if absorbed:
        return tau, events, fixed, OK, s
    return tau, events, fixed, TRUNC_EVENTS, s


@njit(cache=True)
def _agg2_tables(n, mu):
    nn = np.float64(n)
    t_down = np.empty(n + 1)
    t_up = np.empty(n + 1)
    rtot = np.empty(n + 1)
    for k in range(n + 1):
        rep = np.float64(k) * np.float64(n - k) / nn
        r = 2.0 * rep + mu * nn
        t_down[k] = rep / r
        t_up[k] = (rep + rep + mu * np.float64(n - k)) / r
        rtot[k] = r
    return t_down, t_up, rtot


@njit(cache=True, parallel=True)
def tau_agg2_batch(n, mu, max_events, seeds, taus, events, fixations, status):
    t_down, t_up, rtot = _agg2_tables(n, mu)
    for i in prange(seeds.shape[0]):
        visits = np.zeros(n + 1, dtype=np.int64)
        t, ev, fx, st, _ = tau_agg2(n, mu, t_down, t_up, rtot, visits, max_events, seeds[i])
        taus[i] = t
        events[i] = ev
        fixations[i] = fx
        status[i] = st


# ----------------------------------------------------------------------
# Two-type occupation run (single neutral mutant, no mutation events)
# ----------------------------------------------------------------------

@njit(cache=True)
def two_type_occupation(n, occupation, seed):
    """Pure replacement dynamics from one type-1 individual until 0 or n.

    Fills occupation[k] with the time spent at X == k.
    Returns (absorb_time, fixated, state).
    """
    for i in range(n + 1):
        occupation[i] = 0.0
    s = seed
    k = 1
    nn = np.float64(n)
    clock = 0.0
    while 0 < k < n:
        rate = 2.0 * np.float64(k) * np.float64(n - k) / nn
        u1, s = _unit_pos(s)
        dt = -np.log(u1) / rate
        occupation[k] += dt
        clock += dt
        u2, s = _unit(s)
        if u2 < 0.5:
            k -= 1
        else:
            k += 1
    return clock, np.int64(1 if k == n else 0), s


@njit(cache=True, parallel=True)
def two_type_occupation_batch(n, seeds, times, occupations, fixed):
    for i in prange(seeds.shape[0]):
        t, fx, _ = two_type_occupation(n, occupations[i], seeds[i])
        times[i] = t
        fixed[i] = fx


# ----------------------------------------------------------------------
# Single-mutant success run (one type 1, type-0 mutations disabled)
# ----------------------------------------------------------------------

@njit(cache=True)
def single_mutant(n, mu, m, max_events, seed):
    """Moran run from (n-1, 1, 0, ..) with no further type-1 mutations.

    Ends BORN when a type-m individual appears, EXTINCT when all nonzero
    types die out.  Fixation of level 1 (type 0 extinct) also returns BORN:
    from that state a type-m descendant is eventually born almost surely.
    Returns (outcome, events, state).
    """
    counts = np.zeros(m + 1, dtype=np.int64)
    counts[0] = n - 1
    counts[1] = 1
    s2 = np.int64(n - 1) * np.int64(n - 1) + 1
    nsq = np.int64(n) * np.int64(n)
    nn = np.float64(n)
    nz = np.int64(1)  # individuals of nonzero type
    events = np.int64(0)
    s = seed

    while True:
        rep_rate = np.float64(nsq - s2) / nn
        mut_rate = mu * np.float64(nz)  # counts[m] == 0 before absorption
        total = rep_rate + mut_rate
        if total <= 0.0:
            return EXTINCT if nz == 0 else TRUNCATED, events, s

        u1, s = _unit_pos(s)
        u2, s = _unit(s)
        events += 1
        v = u2 * total

        kind = -1
        ej = 0
        ek = 0
        done = False
        for jj in range(1, m):
            w = mu * np.float64(counts[jj])
            if w > 0.0:
                kind = 0
                ej = jj
                if v < w:
                    done = True
                    break
                v -= w
        if not done:
            for k in range(m + 1):
                ck = counts[k]
                if ck == 0:
                    continue
                for jj in range(m + 1):
                    if jj == k:
                        continue
                    cj = counts[jj]
                    if cj == 0:
                        continue
                    w = np.float64(cj * ck) / nn
                    kind = 1
                    ej = jj
                    ek = k
                    if v < w:
                        done = True
                        break
                    v -= w
                if done:
                    break

        if kind == 0:
            a = counts[ej]
            b = counts[ej + 1]
            counts[ej] = a - 1
            counts[ej + 1] = b + 1
            s2 += 2 * (b - a + 1)
            if ej + 1 == m:
                return BORN, events, s
        else:
            a = counts[ej]
            b = counts[ek]
            counts[ej] = a + 1
            counts[ek] = b - 1
            s2 += 2 * (a - b + 1)
            if ej == 0:
                nz -= 1
            elif ek == 0:
                nz += 1
            if nz == 0:
                return EXTINCT, events, s
            if counts[0] == 0:
                return BORN, events, s

        if events >= max_events:
            return TRUNCATED, events, s


@njit(cache=True, parallel=True)
def single_mutant_batch(n, mu, m, max_events, seeds, outcomes):
    for i in prange(seeds.shape[0]):
        out, _, _ = single_mutant(n, mu, m, max_events, seeds[i])
        outcomes[i] = out


# ----------------------------------------------------------------------
# Trajectory observation (no absorption; level-m mutations disabled)
# ----------------------------------------------------------------------

@njit(cache=True)
def trajectory(n, mu, m, grid, out, seed):
    """Sample counts at the sorted grid times from one replicate.

    The run does not stop when type m appears; types above m are never
    created.  If the total rate hits zero the state is frozen and the
    remaining grid rows repeat it.  Returns the advanced stream state.
    """
    counts = np.zeros(m + 1, dtype=np.int64)
    counts[0] = n
    s2 = np.int64(n) * np.int64(n)
    nsq = s2
    nn = np.float64(n)
    lvl0 = 0
    clock = 0.0
    gi = 0
    ng = grid.shape[0]
    s = seed

    while gi < ng:
        rep_rate = np.float64(nsq - s2) / nn
        mut_rate = mu * np.float64(n - counts[m])
        total = rep_rate + mut_rate
        if total <= 0.0:
            while gi < ng:
                for c in range(m + 1):
                    out[gi, c] = counts[c]
                gi += 1
            break

        u1, s = _unit_pos(s)
        t_next = clock + (-np.log(u1) / total)
        while gi < ng and grid[gi] < t_next:
            for c in range(m + 1):
                out[gi, c] = counts[c]
            gi += 1
        if gi >= ng:
            break
        clock = t_next

        u2, s = _unit(s)
        kind = -1
        ej = 0
        ek = 0
        if rep_rate == 0.0:
            kind = 0
            ej = lvl0
        else:
            v = u2 * total
            done = False
            for jj in range(lvl0, m):
                w = mu * np.float64(counts[jj])
                if w > 0.0:
                    kind = 0
                    ej = jj
                    if v < w:
                        done = True
                        break
                    v -= w
            if not done:
                for k in range(lvl0, m + 1):
                    ck = counts[k]
                    if ck == 0:
                        continue
                    for jj in range(lvl0, m + 1):
                        if jj == k:
                            continue
                        cj = counts[jj]
                        if cj == 0:
                            continue
                        w = np.float64(cj * ck) / nn
                        kind = 1
                        ej = jj
                        ek = k
                        if v < w:
                            done = True
                            break
                        v -= w
                    if done:
                        break

        if kind == 0:
            a = counts[ej]
            b = counts[ej + 1]
            counts[ej] = a - 1
            counts[ej + 1] = b + 1
            s2 += 2 * (b - a + 1)
        else:
            a = counts[ej]
            b = counts[ek]
            counts[ej] = a + 1
            counts[ek] = b - 1
            s2 += 2 * (a - b + 1)
        if counts[lvl0] == 0:
            while lvl0 < m and counts[lvl0] == 0:
                lvl0 += 1
    return s


@njit(cache=True, parallel=True)
def trajectory_batch(n, mu, m, grid, outs, seeds):
    for i in prange(seeds.shape[0]):
        trajectory(n, mu, m, grid, outs[i], seeds[i])


# ----------------------------------------------------------------------
# Branching-process oracles
# ----------------------------------------------------------------------

@njit(cache=True)
def branch_q(m, mu, max_events, seed):
    """Critical multitype branching run: does a type-m individual appear?

    One initial type-1 individual; every individual gives birth at rate 1,
    dies at rate 1, mutates up at rate mu.  Only the embedded jump chain is
    simulated (per-individual event probabilities do not depend on the
    population), so no waiting-time draws are needed.
    Returns (outcome, events, state).
    """
    s = seed
    events = np.int64(0)
    pb = 1.0 / (2.0 + mu)
    pd = 2.0 / (2.0 + mu)
    if m == 2:
        w = np.int64(1)
        while events < max_events:
            u, s = _unit(s)
            events += 1
            if u < pb:
                w += 1
            elif u < pd:
                w -= 1
                if w == 0:
                    return EXTINCT, events, s
            else:
                return BORN, events, s
        return TRUNCATED, events, s

    counts = np.zeros(m, dtype=np.int64)
    counts[1] = 1
    w = np.int64(1)
    while events < max_events:
        us, s = _unit(s)
        v = us * np.float64(w)
        t = m - 1
        acc = 0.0
        for jj in range(1, m - 1):
            acc += np.float64(counts[jj])
            if v < acc:
                t = jj
                break
        ua, s = _unit(s)
        events += 1
        if ua < pb:
            counts[t] += 1
            w += 1
        elif ua < pd:
            counts[t] -= 1
            w -= 1
            if w == 0:
                return EXTINCT, events, s
        else:
            if t + 1 == m:
                return BORN, events, s
            counts[t] -= 1
            counts[t + 1] += 1
        assert counts[t] >= 0
    return TRUNCATED, events, s


@njit(cache=True, parallel=True)
def branch_q_batch(m, mu, max_events, seeds, outcomes):
    for i in prange(seeds.shape[0]):
        out, _, _ = branch_q(m, mu, max_events, seeds[i])
        outcomes[i] = out


@njit(cache=True)
def two_type_mutation(r, horizon, seed):
    """Critical line with mutation: is a type-2 individual born by horizon?

    Returns (flag, state).
    """
    s = seed
    k = np.int64(1)
    clock = 0.0
    pb = 1.0 / (2.0 + r)
    pd = 2.0 / (2.0 + r)
    while k > 0:
        total = np.float64(k) * (2.0 + r)
        u1, s = _unit_pos(s)
        clock += -np.log(u1) / total
        if clock > horizon:
            return False, s
        u2, s = _unit(s)
        if u2 < pb:
            k += 1
        elif u2 < pd:
            k -= 1
        else:
            return True, s
    return False, s


@njit(cache=True, parallel=True)
def two_type_mutation_batch(r, horizon, seeds, outcomes):
    for i in prange(seeds.shape[0]):
        f, _ = two_type_mutation(r, horizon, seeds[i])
        outcomes[i] = 1 if f else 0


@njit(cache=True)
def model5(n, mu, m, j, qj, horizon, seed):
    """Two-type branching process with immigration (success by horizon?).

    Type m-j individuals immigrate at rate n*mu^(m-j)*s^(m-j-1)/(m-j-1)!,
    realised by thinning against the rate at the horizon (the rate is
    nondecreasing in s).  Each individual gives birth and dies at rate 1
    and converts to a terminal success at rate mu*qj.
    Returns (flag, immigrants, state).
    """
    s = seed
    pw = m - j - 1
    fact = 1.0
    for i in range(2, pw + 1):
        fact *= i
    c_imm = np.float64(n) * mu ** np.float64(m - j) / fact
    lam_max = c_imm * horizon**pw
    conv = mu * qj
    k = np.int64(0)
    n_imm = np.int64(0)
    clock = 0.0
    while True:
        env = lam_max + np.float64(k) * (2.0 + conv)
        u1, s = _unit_pos(s)
        clock += -np.log(u1) / env
        if clock > horizon:
            return False, n_imm, s
        u2, s = _unit(s)
        v = u2 * env
        if v < lam_max:
            if pw == 0:
                k += 1
                n_imm += 1
            else:
                u3, s = _unit(s)
                if u3 < (clock / horizon) ** pw:
                    k += 1
                    n_imm += 1
        else:
            v -= lam_max
            fk = np.float64(k)
            if v < fk:
                k += 1
            elif v < 2.0 * fk:
                k -= 1
            else:
                return True, n_imm, s


@njit(cache=True, parallel=True)
def model5_batch(n, mu, m, j, qj, horizon, seeds, outcomes, immigrants):
    for i in prange(seeds.shape[0]):
        f, ni, _ = model5(n, mu, m, j, qj, horizon, seeds[i])
        outcomes[i] = 1 if f else 0
        immigrants[i] = ni
