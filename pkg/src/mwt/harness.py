"""Monte Carlo experiment orchestration and goodness-of-fit statistics.

run_experiment drives batches of waiting-time replicates on deterministic
per-replicate streams, scales the samples onto the limit-law time scale,
and reports KS distances against analytic CDFs with distribution-free DKW
bands.  Output is ordered by replicate index before serialization, so
serial and threaded runs of the same config produce byte-identical files.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import limits, model
from .limits import ExponentialLaw, LimitLaw

QUANTILE_LEVELS = (1, 5, 25, 50, 75, 95, 99)


class TruncationCapError(RuntimeError):
    """More replicates hit the budget than the configured cap allows."""


@dataclass
class ExperimentConfig:
    """Full, serializable description of one waiting-time experiment.

    scale "auto" resolves the time scaling (and the comparison law when
    comparison == "auto") from the regime classification; any float is used
    directly, in which case comparison "auto" yields no law (an explicit
    scale need not match any regime).  Raw and scaled waiting times are
    both recorded so a misclassified regime is auditable from the output
    alone.
    """

    n: int
    mu: float
    m: int
    replicates: int
    base_seed: int = 0
    budget: model.SimBudget = field(default_factory=model.SimBudget)
    scale: float | str = "auto"
    comparison: LimitLaw | str | None = None
    band: float = limits.DEFAULT_BAND
    truncation_cap: float = 0.01
    output_path: str | None = None
    engine: str = "auto"
    threads: int | None = None

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("need at least one replicate")

    def to_dict(self) -> dict:
        max_time = self.budget.max_time
        comparison = self.comparison
        if isinstance(comparison, LimitLaw):
            comparison = comparison.to_dict()
        return {
            "n": self.n,
            "mu": self.mu,
            "m": self.m,
            "replicates": self.replicates,
            "base_seed": self.base_seed,
            "budget": {
                "max_events": self.budget.max_events,
                "max_time": None if math.isinf(max_time) else max_time,
            },
            "scale": self.scale,
            "comparison": comparison,
            "band": self.band,
            "truncation_cap": self.truncation_cap,
            "output_path": self.output_path,
            "engine": self.engine,
            "threads": self.threads,
        }


@dataclass
class EmpiricalDistribution:
    """Sorted scaled waiting times of the untruncated replicates."""

    samples: np.ndarray
    truncated_count: int = 0

    @property
    def count(self) -> int:
        return len(self.samples) + self.truncated_count


def ecdf(dist: EmpiricalDistribution, t: float) -> float:
    """Right-continuous empirical CDF of the untruncated samples."""
    if len(dist.samples) < 1:
        raise ValueError("empirical distribution is empty")
    return float(np.searchsorted(dist.samples, t, side="right")) / len(dist.samples)


def ks_distance(dist: EmpiricalDistribution, law: LimitLaw) -> float:
    """sup_t |ECDF(t) - F(t)|, evaluating both one-sided gaps at each jump."""
    x = dist.samples
    n = len(x)
    if n < 1:
        raise ValueError("empirical distribution is empty")
    f = np.asarray(law.cdf(x), dtype=np.float64)
    hi = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    return float(np.maximum(np.abs(hi - f), np.abs(f - lo)).max())


def dkw_bound(count: int, alpha: float) -> float:
    """Dvoretzky-Kiefer-Wolfowitz band: P(sup|ECDF - F| > eps) <= alpha."""
    if count < 1:
        raise ValueError("need at least one sample")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * count))


def resolve_scaling(n: int, mu: float, m: int, band: float = limits.DEFAULT_BAND):
    """(timescale, regime report, limit law) for automatic scaling.

    m == 1 is exact at finite n (tau_1 ~ Exp(n*mu)), so it scales by n*mu
    and compares against a unit exponential without regime classification.
    """
    if m == 1:
        report = {"kind": "tau1_exponential", "j": None, "A": None, "timescale": n * mu}
        return n * mu, report, ExponentialLaw(1.0)
    regime = limits.classify_regime(n, mu, m, band=band)
    return regime.timescale, regime.to_dict(), limits.limit_law(regime, m)


def _resolve_scale(config: ExperimentConfig):
    if isinstance(config.scale, (int, float)) and not isinstance(config.scale, bool):
        return float(config.scale), None, None
    if config.scale != "auto":
        raise ValueError(f"scale must be 'auto' or a number, got {config.scale!r}")
    return resolve_scaling(config.n, config.mu, config.m, band=config.band)


def run_experiment(config: ExperimentConfig):
    """Execute the configured replicates; returns (EmpiricalDistribution, summary).

    Raises StalledError when mu == 0 and TruncationCapError when the
    fraction of budget-limited replicates exceeds the configured cap
    (truncated replicates never enter the ECDF, only the counts).
    Writes <output_path>.csv and <output_path>.json when a path is set.
    """
    restore_threads = None
    if config.threads is not None:
        import numba

        restore_threads = numba.get_num_threads()
        numba.set_num_threads(config.threads)
    try:
        return _run_experiment(config)
    finally:
        if restore_threads is not None:
            import numba

            numba.set_num_threads(restore_threads)


def _run_experiment(config: ExperimentConfig):
    scale, regime_report, auto_law = _resolve_scale(config)
    law = config.comparison
    if law == "auto":
        law = auto_law
    elif isinstance(law, str):
        raise ValueError(f"comparison must be a LimitLaw, 'auto', or None, got {law!r}")

    raw, events, fixations, truncated = model.simulate_tau_batch(
        config.n,
        config.mu,
        config.m,
        config.replicates,
        config.base_seed,
        budget=config.budget,
        engine=config.engine,
    )
    scaled = raw * scale

    kept = scaled[~truncated]
    dist = EmpiricalDistribution(
        samples=np.sort(kept), truncated_count=int(truncated.sum())
    )
    frac_truncated = dist.truncated_count / config.replicates

    ks = ks_distance(dist, law) if (law is not None and len(dist.samples) > 0) else None
    summary = {
        "config": config.to_dict(),
        "regime": regime_report,
        "scale": scale,
        "law": law.to_dict() if law is not None else None,
        "n_samples": len(dist.samples),
        "truncated_count": dist.truncated_count,
        "truncation_fraction": frac_truncated,
        "mean_raw": float(raw.mean()),
        "mean_scaled": float(scaled.mean()),
        "quantiles": {
            f"{q:02d}": (float(np.quantile(dist.samples, q / 100.0)) if len(dist.samples) else None)
            for q in QUANTILE_LEVELS
        },
        "ks": ks,
        "dkw_99": dkw_bound(len(dist.samples), 0.01) if len(dist.samples) else None,
    }

    if config.output_path is not None:
        write_csv(config.output_path + ".csv", raw, scaled, events, fixations, truncated)
        write_summary(config.output_path + ".json", summary)

    if frac_truncated > config.truncation_cap:
        raise TruncationCapError(
            f"{dist.truncated_count}/{config.replicates} replicates hit the budget "
            f"(cap {config.truncation_cap:.2%})"
        )
    return dist, summary


def write_csv(path: str, raw, scaled, events, fixations, truncated) -> None:
    """Per-replicate records; float fields use repr for exact round-trips."""
    lines = ["replicate_index,raw_tau,scaled_tau,events,fixations,truncated"]
    for i in range(len(raw)):
        lines.append(
            f"{i},{float(raw[i])!r},{float(scaled[i])!r},"
            f"{int(events[i])},{int(fixations[i])},{int(truncated[i])}"
        )
    _atomic_write(path, "\n".join(lines) + "\n")


def write_summary(path: str, summary: dict) -> None:
    _atomic_write(path, json.dumps(summary, indent=2, sort_keys=True) + "\n")


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def read_csv(path: str):
    """Inverse of write_csv; returns dict of column arrays."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    cols = {name: [r[i] for r in rows] for i, name in enumerate(header)}
    return {
        "replicate_index": np.array(cols["replicate_index"], dtype=np.int64),
        "raw_tau": np.array(cols["raw_tau"], dtype=np.float64),
        "scaled_tau": np.array(cols["scaled_tau"], dtype=np.float64),
        "events": np.array(cols["events"], dtype=np.int64),
        "fixations": np.array(cols["fixations"], dtype=np.int64),
        "truncated": np.array(cols["truncated"], dtype=np.int64).astype(bool),
    }
