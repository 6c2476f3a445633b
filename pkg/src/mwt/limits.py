"""Limiting distributions of the scaled waiting time and regime classification.

Depending on how the mutation rate mu compares with powers of the population
size n, the scaled waiting time for m mutations converges to one of 4m-3
limit laws: gamma laws when fixations dominate, a pure exponential in the
tunneling window, Weibull-type laws 1-exp(-t^k/k!) when mutation counts are
effectively deterministic, and two families of borderline laws (a gamma plus
an independent exponential with rate lambda_j, and a law defined by a
quadrature of the two-type branching hitting factor).

Everything here is a pure function of its arguments; no shared state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

SERIES_EPS = 1e-15
QUAD_TOL = 1e-10
QUAD_MAX_DEPTH = 40
DEFAULT_BAND = 0.25


class UnclassifiableRegimeError(ValueError):
    """(n, mu) sits inside the border band of two different boundaries."""


class UnsupportedRegimeError(ValueError):
    """The small-t power law is not defined for border regimes."""


# ----------------------------------------------------------------------
# Scalar numerics: regularized incomplete gamma and adaptive Simpson
# ----------------------------------------------------------------------

def regularized_gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x).

    Series expansion for x < a+1, Lentz continued fraction for the upper
    tail otherwise; well conditioned for the small integer shapes used by
    the gamma limit laws.
    """
    if a <= 0.0:
        raise ValueError("shape must be positive")
    if x < 0.0:
        raise ValueError("argument must be nonnegative")
    if x == 0.0:
        return 0.0
    log_prefactor = -x + a * math.log(x) - math.lgamma(a)
    if x < a + 1.0:
        ap = a
        total = 1.0 / a
        delta = total
        for _ in range(1000):
            ap += 1.0
            delta *= x / ap
            total += delta
            if abs(delta) < abs(total) * 1e-16:
                break
        return min(1.0, total * math.exp(log_prefactor))
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return max(0.0, 1.0 - math.exp(log_prefactor) * h)


def _adapt(f, a, fa, b, fb, c, fc, whole, tol, depth):
    d = 0.5 * (a + c)
    e = 0.5 * (c + b)
    fd = f(d)
    fe = f(e)
    left = (c - a) / 6.0 * (fa + 4.0 * fd + fc)
    right = (b - c) / 6.0 * (fc + 4.0 * fe + fb)
    err = left + right - whole
    if depth <= 0 or abs(err) <= 15.0 * tol:
        return left + right + err / 15.0
    return _adapt(f, a, fa, c, fc, d, fd, left, 0.5 * tol, depth - 1) + _adapt(
        f, c, fc, b, fb, e, fe, right, 0.5 * tol, depth - 1
    )


def adaptive_simpson(f, a: float, b: float, tol: float = QUAD_TOL, max_depth: int = QUAD_MAX_DEPTH) -> float:
    """Adaptive Simpson quadrature of f on [a, b] to absolute tolerance tol."""
    if b <= a:
        return 0.0
    c = 0.5 * (a + b)
    fa = f(a)
    fb = f(b)
    fc = f(c)
    whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb)
    return _adapt(f, a, fa, b, fb, c, fc, whole, tol, max_depth)


# ----------------------------------------------------------------------
# Lineage success probability and the borderline exponential rate
# ----------------------------------------------------------------------

def p_recursion(mu: float, j: int) -> float:
    """Probability that a critical mutant lineage reaches level j.

    p_1 = 1 and p_j is the positive root of p^2 + mu*p - mu*p_{j-1} = 0,
    iterated in closed form.  For small mu, p_j ~ mu^(1 - 2^-(j-1)).
    """
    if mu <= 0.0:
        raise ValueError("mutation rate must be positive")
    if j < 1:
        raise ValueError("level must be at least 1")
    p = 1.0
    for _ in range(j - 1):
        p = 0.5 * (-mu + math.sqrt(mu * mu + 4.0 * mu * p))
    return p


def q_asymptotic(mu: float, m: int) -> float:
    """Leading-order approximation mu^(1 - 2^-(m-1)) of the success probability."""
    if mu <= 0.0:
        raise ValueError("mutation rate must be positive")
    if m < 1:
        raise ValueError("level must be at least 1")
    return mu ** (1.0 - 2.0 ** (-(m - 1)))


def lambda_j(A: float, j: int) -> float:
    """Rate of the extra exponential in the borderline limit law.

    Evaluates the ratio of the two series sum_k B^k/((k-1)!(k-1)!) and
    sum_k B^k/(k!(k-1)!) with B = A^(2(1 - 2^-(j-1))), using term
    recurrences (no factorials) truncated when the next term drops below
    1e-15 of the running sums.  Always > 1 and -> 1 as A -> 0.
    """
    if A <= 0.0:
        raise ValueError("border constant must be positive")
    if j < 2:
        raise ValueError("border index must be at least 2")
    B = A ** (2.0 * (1.0 - 2.0 ** (-(j - 1))))
    if B == 0.0:
        return 1.0  # A small enough to underflow: the k = 1 terms dominate
    term_num = B
    term_den = B
    num = B
    den = B
    k = 1
    while True:
        term_num *= B / (k * k)
        term_den *= B / ((k + 1) * k)
        num += term_num
        den += term_den
        if not (math.isfinite(num) and math.isfinite(den)):
            raise OverflowError(f"lambda_j series overflows for A={A}, j={j}")
        if term_num < SERIES_EPS * num and term_den < SERIES_EPS * den:
            return num / den
        k += 1


def hypoexp_gamma_cdf(k: int, lam: float, t: float) -> float:
    """CDF at t of Gamma(k, 1) + Exp(lam) with independent summands.

    Computed by adaptive quadrature of the convolution integral
    int_0^t f_Gamma(k)(u) (1 - exp(-lam (t-u))) du; k = 0 degenerates to
    the pure exponential.  Quadrature avoids the catastrophic cancellation
    of the partial-fraction closed form near lam = 1.
    """
    if k < 0:
        raise ValueError("gamma shape must be nonnegative")
    if lam <= 0.0:
        raise ValueError("exponential rate must be positive")
    if t < 0.0:
        raise ValueError("time must be nonnegative")
    if t == 0.0:
        return 0.0
    if k == 0:
        return -math.expm1(-lam * t)
    log_norm = math.lgamma(k)

    def integrand(u: float) -> float:
        if u <= 0.0:
            return 0.0 if k > 1 else -math.expm1(-lam * t)
        return math.exp((k - 1) * math.log(u) - u - log_norm) * -math.expm1(-lam * (t - u))

    return min(1.0, adaptive_simpson(integrand, 0.0, t))


def bigmu_border_survival(A: float, m: int, j: int, t: float) -> float:
    """Survival function of the rapid-mutation borderline limit law.

    P(limit > t) = exp(-(A^(1+(m-j-1)2^-j)/(m-j-1)!) *
                       int_0^t (t-s)^(m-j-1) (1-e^-2s)/(1+e^-2s) ds);
    the integrand factor is tanh(s), the scaled hitting probability of the
    two-type critical branching line.
    """
    if not 1 <= j <= m - 1:
        raise ValueError("border index must satisfy 1 <= j <= m-1")
    if A <= 0.0:
        raise ValueError("border constant must be positive")
    if t < 0.0:
        raise ValueError("time must be nonnegative")
    if t == 0.0:
        return 1.0
    power = m - j - 1
    coeff = A ** (1.0 + power * 2.0 ** (-j)) / math.factorial(power)

    def integrand(s: float) -> float:
        return (t - s) ** power * math.tanh(s)

    return math.exp(-coeff * adaptive_simpson(integrand, 0.0, t))


# ----------------------------------------------------------------------
# Limit laws
# ----------------------------------------------------------------------

class LimitLaw:
    """Evaluable limiting distribution of the scaled waiting time."""

    def _cdf1(self, t: float) -> float:
        raise NotImplementedError

    def cdf(self, t):
        """CDF at a scalar or array of scaled times."""
        arr = np.asarray(t, dtype=np.float64)
        if arr.ndim == 0:
            return self._cdf1(float(arr))
        out = np.empty(arr.shape)
        flat_in = arr.ravel()
        flat_out = out.ravel()
        for i in range(flat_in.size):
            flat_out[i] = self._cdf1(float(flat_in[i]))
        return out

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class GammaLaw(LimitLaw):
    """Gamma(k, 1): sum of k unit exponentials (waiting for k fixations)."""

    k: int

    def _cdf1(self, t: float) -> float:
        return 0.0 if t <= 0.0 else regularized_gamma_p(float(self.k), t)

    def to_dict(self) -> dict:
        return {"kind": "gamma", "k": self.k}


@dataclass(frozen=True)
class ExponentialLaw(LimitLaw):
    rate: float = 1.0

    def _cdf1(self, t: float) -> float:
        return 0.0 if t <= 0.0 else -math.expm1(-self.rate * t)

    def to_dict(self) -> dict:
        return {"kind": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class HypoexpGammaPlusExpLaw(LimitLaw):
    """Gamma(k, 1) plus an independent Exp(lam) (borderline limit)."""

    k: int
    lam: float

    def _cdf1(self, t: float) -> float:
        return 0.0 if t <= 0.0 else hypoexp_gamma_cdf(self.k, self.lam, t)

    def to_dict(self) -> dict:
        return {"kind": "hypoexp_gamma_plus_exp", "k": self.k, "lambda": self.lam}


@dataclass(frozen=True)
class PowerExpLaw(LimitLaw):
    """CDF 1 - exp(-t^k / k!): deterministic mutant counts, Poisson arrivals."""

    k: int

    def _cdf1(self, t: float) -> float:
        if t <= 0.0:
            return 0.0
        return -math.expm1(-(t**self.k) / math.factorial(self.k))

    def to_dict(self) -> dict:
        return {"kind": "power_exp", "k": self.k}


@dataclass(frozen=True)
class QuadratureLaw(LimitLaw):
    """Borderline rapid-mutation law evaluated by quadrature."""

    A: float
    m: int
    j: int

    def _cdf1(self, t: float) -> float:
        return 0.0 if t <= 0.0 else 1.0 - bigmu_border_survival(self.A, self.m, self.j, t)

    def to_dict(self) -> dict:
        return {"kind": "quadrature_border", "A": self.A, "m": self.m, "j": self.j}


# ----------------------------------------------------------------------
# Regime classification
# ----------------------------------------------------------------------

class RegimeKind(str, Enum):
    SMALL_MU_GAMMA = "small_mu_gamma"
    SMALL_MU_EXP = "small_mu_exp"
    BORDER = "border"
    BIG_MU_INTERIOR = "big_mu_interior"
    BIG_MU_BORDER = "big_mu_border"
    BIG_MU_TOP = "big_mu_top"


@dataclass(frozen=True)
class Regime:
    """Classification of (n, mu, m) with the time scaling of its limit law.

    timescale is the factor c(n, mu) such that c * tau_m converges in
    distribution; exponent is log(mu)/log(n), reported so border-band
    decisions are auditable.
    """

    kind: RegimeKind
    j: int | None
    A: float | None
    timescale: float
    exponent: float

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "j": self.j,
            "A": self.A,
            "timescale": self.timescale,
            "exponent": self.exponent,
        }


def small_border_exponent(j: int) -> float:
    """Exponent b with mu ~ A n^b separating fixation-dominated regimes."""
    return -(2.0 ** (j - 1)) / (2.0 ** (j - 1) - 1.0)


def big_border_exponent(m: int, j: int) -> float:
    """Exponent b with mu ~ A n^b in the rapid-mutation family."""
    return -1.0 / (1.0 + (m - j - 1) * 2.0 ** (-j))


def boundary_exponents(m: int) -> list[tuple[float, RegimeKind, int]]:
    """The 2m-2 boundary exponents for target level m, ascending.

    Small-side borders j = 2..m, then rapid-mutation borders j = m-1..1
    (ending at -2/m).  Interleaved with the 2m-1 open intervals this yields
    the full set of 4m-3 regimes.
    """
    if m < 2:
        raise ValueError("regime structure needs m >= 2")
    bounds = [(small_border_exponent(j), RegimeKind.BORDER, j) for j in range(2, m + 1)]
    bounds += [
        (big_border_exponent(m, j), RegimeKind.BIG_MU_BORDER, j) for j in range(m - 1, 0, -1)
    ]
    return bounds


def _interior_regime(i: int, m: int) -> tuple[RegimeKind, int | None]:
    """Regime of the i-th open interval between the ordered boundaries."""
    if i == 0:
        return RegimeKind.SMALL_MU_GAMMA, 1
    if 1 <= i <= m - 2:
        return RegimeKind.SMALL_MU_GAMMA, i + 1
    if i == m - 1:
        return RegimeKind.SMALL_MU_EXP, None
    if m <= i <= 2 * m - 3:
        return RegimeKind.BIG_MU_INTERIOR, 2 * m - 2 - i
    return RegimeKind.BIG_MU_TOP, None


def _timescale(kind: RegimeKind, j: int | None, n: int, mu: float, m: int) -> float:
    if kind in (RegimeKind.SMALL_MU_GAMMA, RegimeKind.BORDER):
        return mu
    if kind is RegimeKind.SMALL_MU_EXP:
        return n * mu ** (2.0 - 2.0 ** (-(m - 1)))
    if kind is RegimeKind.BIG_MU_BORDER:
        return mu ** (1.0 - 2.0 ** (-j))
    if kind is RegimeKind.BIG_MU_INTERIOR:
        return n ** (1.0 / (m - j)) * mu ** (1.0 + (1.0 - 2.0 ** (-j)) / (m - j))
    return n ** (1.0 / m) * mu  # BIG_MU_TOP


def classify_regime(n: int, mu: float, m: int, band: float = DEFAULT_BAND) -> Regime:
    """Place finite (n, mu) into one of the 4m-3 asymptotic regimes.

    The limit statements are asymptotic (mu << n^b, mu ~ A n^b), so a
    finite point is classified by its exponent log(mu)/log(n): within
    ``band`` (in natural log units) of a boundary b counts as that border
    with constant A = mu * n^(-b); otherwise the point gets the enclosing
    open interval's regime.

    Raises UnclassifiableRegimeError when the point sits inside two border
    bands at once (band too wide for this n and m).
    """
    if n < 2:
        raise ValueError(f"population size must be at least 2, got {n}")
    if mu <= 0.0:
        raise ValueError("mutation rate must be positive")
    if m < 2:
        raise ValueError("classification needs m >= 2")
    if not 0.0 < band < 1.0:
        raise ValueError("band must lie in (0, 1)")

    log_n = math.log(n)
    log_mu = math.log(mu)
    bounds = boundary_exponents(m)

    hits = [(b, kind, j) for b, kind, j in bounds if abs(log_mu - b * log_n) <= band]
    if len(hits) > 1:
        raise UnclassifiableRegimeError(
            f"mu={mu}, n={n} lies within the border band of {len(hits)} boundaries; "
            f"tighten band (currently {band})"
        )
    exponent = log_mu / log_n
    if len(hits) == 1:
        b, kind, j = hits[0]
        A = math.exp(log_mu - b * log_n)
        return Regime(kind=kind, j=j, A=A, timescale=_timescale(kind, j, n, mu, m), exponent=exponent)

    i = 0
    while i < len(bounds) and log_mu > bounds[i][0] * log_n:
        i += 1
    kind, j = _interior_regime(i, m)
    return Regime(kind=kind, j=j, A=None, timescale=_timescale(kind, j, n, mu, m), exponent=exponent)


def limit_law(regime: Regime, m: int) -> LimitLaw:
    """The limiting distribution of timescale * tau_m for a classified regime."""
    kind = regime.kind
    if kind is RegimeKind.SMALL_MU_GAMMA:
        return GammaLaw(m - regime.j)  # j = 1 (fixation-only) gives Gamma(m-1)
    if kind is RegimeKind.SMALL_MU_EXP:
        return ExponentialLaw(1.0)
    if kind is RegimeKind.BORDER:
        lam = lambda_j(regime.A, regime.j)
        k = m - regime.j
        return ExponentialLaw(lam) if k == 0 else HypoexpGammaPlusExpLaw(k, lam)
    if kind is RegimeKind.BIG_MU_INTERIOR:
        return PowerExpLaw(m - regime.j)
    if kind is RegimeKind.BIG_MU_BORDER:
        return QuadratureLaw(regime.A, m, regime.j)
    return PowerExpLaw(m)  # BIG_MU_TOP


@dataclass(frozen=True)
class PowerLawAsymptote:
    """Leading small-t behaviour: P(scaled tau <= t) ~ coefficient * t^power."""

    power: int
    coefficient: float
    timescale: float


def small_t_asymptote(regime: Regime, m: int) -> PowerLawAsymptote:
    """Small-t power law of the limit CDF (border regimes are not covered)."""
    kind = regime.kind
    if kind in (RegimeKind.BORDER, RegimeKind.BIG_MU_BORDER):
        raise UnsupportedRegimeError("no small-t power law is stated for border regimes")
    if kind is RegimeKind.SMALL_MU_GAMMA:
        power = m - 1 if regime.j == 1 else m - regime.j
    elif kind is RegimeKind.SMALL_MU_EXP:
        power = 1
    elif kind is RegimeKind.BIG_MU_INTERIOR:
        power = m - regime.j
    else:  # BIG_MU_TOP
        power = m
    return PowerLawAsymptote(
        power=power,
        coefficient=1.0 / math.factorial(power),
        timescale=regime.timescale,
    )
