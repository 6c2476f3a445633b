"""Command-line front end: simulation, classification, law evaluation, comparison.

Subcommands
  simulate   run a waiting-time experiment, write CSV + summary JSON
  regime     classify (n, mu, m) and print the regime with its limit law
  limit-cdf  evaluate the limit CDF of a classified regime on a time grid
  compare    simulate and test the scaled samples against a law (KS vs DKW)
  lambda     evaluate the borderline exponential rate lambda_j(A)
  qm         evaluate the lineage success probability (exact or asymptotic)

A JSON config file (flat keys named like the long flags) can seed any
subcommand; explicit flags win.  Exit codes: 0 success, 1 runtime or
statistical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import harness, limits, model
from .limits import UnclassifiableRegimeError

USAGE_ERROR = 2
RUNTIME_ERROR = 1


def _int_value(s) -> int:
    """Integer flag that accepts scientific notation (1e6 -> 1000000).

    Plain integer strings are parsed exactly (64-bit seeds stay intact);
    only non-integer strings go through float.
    """
    try:
        return int(s)
    except ValueError:
        pass
    v = float(s)
    if not v.is_integer():
        raise argparse.ArgumentTypeError(f"expected an integer, got {s!r}")
    return int(v)


def _float_value(s) -> float:
    return float(s)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mwt",
        description="Moran-model mutation waiting times: simulate, classify, validate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON file with flat keys matching the flags")

    def add_model_flags(p):
        p.add_argument("--n", type=_int_value, help="population size")
        p.add_argument("--mu", type=_float_value, help="mutation rate per individual")
        p.add_argument("--m", type=_int_value, help="target number of mutations")

    def add_sim_flags(p):
        add_model_flags(p)
        p.add_argument("--replicates", type=_int_value, help="number of replicates")
        p.add_argument("--seed", type=_int_value, help="base seed (default 0)")
        p.add_argument("--budget-events", type=_int_value, help="event cap per replicate")
        p.add_argument("--budget-time", type=float, help="model-time cap per replicate")
        p.add_argument("--out", help="output prefix; writes <out>.csv and <out>.json")
        p.add_argument("--scale", help="'auto' or an explicit scaling factor")
        p.add_argument("--band", type=float, help="border band in log units (default 0.25)")
        p.add_argument("--trunc-cap", type=float, help="max tolerated truncation fraction")
        p.add_argument("--engine", choices=["auto", "event", "aggregate", "python"])
        p.add_argument("--threads", type=_int_value, help="worker threads (default: all; env MWT_THREADS)")

    p = sub.add_parser("simulate", help="run a waiting-time experiment")
    add_common(p)
    add_sim_flags(p)

    p = sub.add_parser("regime", help="classify (n, mu, m)")
    add_common(p)
    add_model_flags(p)
    p.add_argument("--band", type=float)

    p = sub.add_parser("limit-cdf", help="evaluate the limit CDF on a grid")
    add_common(p)
    add_model_flags(p)
    p.add_argument("--band", type=float)
    p.add_argument("--t-grid", help="comma list '0.1,0.5,1' or range 'lo:hi:count'")
    p.add_argument("--out", help="write the CSV here instead of stdout")

    p = sub.add_parser("compare", help="simulate and KS-test against a law")
    add_common(p)
    add_sim_flags(p)
    p.add_argument("--law", help="'auto' (default), gamma:K, exp:RATE, powerexp:K, "
                                 "hypoexp:K:LAMBDA, or quadrature:A:M:J")
    p.add_argument("--alpha", type=float, help="DKW confidence level (default 0.01)")

    p = sub.add_parser("lambda", help="borderline exponential rate lambda_j(A)")
    add_common(p)
    p.add_argument("--A", type=float, help="border constant")
    p.add_argument("--j", type=_int_value, help="border index (>= 2)")

    p = sub.add_parser("qm", help="lineage success probability q_m")
    add_common(p)
    p.add_argument("--mu", type=_float_value)
    p.add_argument("--m", type=_int_value)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", help="level recursion (default)")
    mode.add_argument("--asymptotic", action="store_true", help="mu^(1 - 2^-(m-1))")

    return parser


REQUIRED = object()


def _merge(args: argparse.Namespace, keys: dict):
    """Resolve each key as: explicit flag > config file > default."""
    file_cfg = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            file_cfg = json.load(fh)
    resolved = {}
    missing = []
    for key, default in keys.items():
        flag_val = getattr(args, key, None)
        if flag_val is None or flag_val is False:
            flag_val = None
        value = flag_val if flag_val is not None else file_cfg.get(key, default)
        if value is REQUIRED:
            missing.append(key)
            value = None
        resolved[key] = value
    if missing:
        raise CliUsageError(f"missing required parameter(s): {', '.join(missing)}")
    return resolved


class CliUsageError(Exception):
    pass


def _default_threads() -> int | None:
    env = os.environ.get("MWT_THREADS")
    return int(env) if env else None


def _law_from_spec(spec: str, n, mu, m, band) -> limits.LimitLaw:
    if spec == "auto":
        _, _, law = harness.resolve_scaling(n, mu, m, band)
        return law
    parts = spec.split(":")
    kind = parts[0]
    try:
        if kind == "gamma":
            return limits.GammaLaw(int(parts[1]))
        if kind == "exp":
            return limits.ExponentialLaw(float(parts[1]))
        if kind == "powerexp":
            return limits.PowerExpLaw(int(parts[1]))
        if kind == "hypoexp":
            return limits.HypoexpGammaPlusExpLaw(int(parts[1]), float(parts[2]))
        if kind == "quadrature":
            return limits.QuadratureLaw(float(parts[1]), int(parts[2]), int(parts[3]))
    except (IndexError, ValueError) as exc:
        raise CliUsageError(f"bad law spec {spec!r}: {exc}") from exc
    raise CliUsageError(f"unknown law kind {kind!r}")


def _parse_grid(spec: str):
    if ":" in spec:
        lo, hi, count = spec.split(":")
        return np.linspace(float(lo), float(hi), int(float(count)))
    return np.array([float(x) for x in spec.split(",")])


SIM_KEYS = {
    "n": REQUIRED,
    "mu": REQUIRED,
    "m": REQUIRED,
    "replicates": REQUIRED,
    "seed": 0,
    "budget_events": 2**62,
    "budget_time": math.inf,
    "out": "",
    "scale": "auto",
    "band": limits.DEFAULT_BAND,
    "trunc_cap": 0.01,
    "engine": "auto",
    "threads": None,
}


def _experiment_config(vals, comparison=None) -> harness.ExperimentConfig:
    scale = vals["scale"]
    if isinstance(scale, str) and scale != "auto":
        scale = float(scale)
    threads = vals["threads"] if vals["threads"] is not None else _default_threads()
    return harness.ExperimentConfig(
        n=int(vals["n"]),
        mu=float(vals["mu"]),
        m=int(vals["m"]),
        replicates=int(vals["replicates"]),
        base_seed=int(vals["seed"]),
        budget=model.SimBudget(
            max_events=int(vals["budget_events"]),
            max_time=float(vals["budget_time"]),
        ),
        scale=scale,
        comparison=comparison,
        band=float(vals["band"]),
        truncation_cap=float(vals["trunc_cap"]),
        output_path=vals["out"] or None,
        engine=vals["engine"],
        threads=threads,
    )


def cmd_simulate(args) -> int:
    vals = _merge(args, SIM_KEYS)
    config = _experiment_config(vals)
    _, summary = harness.run_experiment(config)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_regime(args) -> int:
    vals = _merge(args, {"n": REQUIRED, "mu": REQUIRED, "m": REQUIRED, "band": limits.DEFAULT_BAND})
    n, mu, m, band = int(vals["n"]), float(vals["mu"]), int(vals["m"]), float(vals["band"])
    timescale, report, law = harness.resolve_scaling(n, mu, m, band)
    out = {
        "config": {"n": n, "mu": mu, "m": m, "band": band},
        "regime": report,
        "law": law.to_dict(),
        "timescale": timescale,
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_limit_cdf(args) -> int:
    vals = _merge(
        args,
        {"n": REQUIRED, "mu": REQUIRED, "m": REQUIRED, "band": limits.DEFAULT_BAND, "t_grid": REQUIRED, "out": ""},
    )
    n, mu, m, band = int(vals["n"]), float(vals["mu"]), int(vals["m"]), float(vals["band"])
    grid = _parse_grid(vals["t_grid"])
    timescale, report, law = harness.resolve_scaling(n, mu, m, band)
    header = {
        "config": {"n": n, "mu": mu, "m": m, "band": band, "t_grid": vals["t_grid"]},
        "regime": report,
        "law": law.to_dict(),
        "timescale": timescale,
    }
    lines = ["# " + json.dumps(header, sort_keys=True), "t,cdf"]
    for t in grid:
        lines.append(f"{float(t)!r},{float(law.cdf(float(t)))!r}")
    text = "\n".join(lines) + "\n"
    if vals["out"]:
        with open(vals["out"], "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_compare(args) -> int:
    keys = dict(SIM_KEYS)
    keys.update({"law": "auto", "alpha": 0.01})
    vals = _merge(args, keys)
    law = _law_from_spec(
        vals["law"], int(vals["n"]), float(vals["mu"]), int(vals["m"]), float(vals["band"])
    )
    config = _experiment_config(vals, comparison=law)
    dist, summary = harness.run_experiment(config)
    bound = harness.dkw_bound(len(dist.samples), float(vals["alpha"]))
    passed = summary["ks"] is not None and summary["ks"] <= bound
    out = {
        "config": summary["config"],
        "law": summary["law"],
        "regime": summary["regime"],
        "ks": summary["ks"],
        "dkw_bound": bound,
        "alpha": float(vals["alpha"]),
        "n_samples": summary["n_samples"],
        "pass": bool(passed),
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0 if passed else RUNTIME_ERROR


def cmd_lambda(args) -> int:
    vals = _merge(args, {"A": REQUIRED, "j": REQUIRED})
    A, j = float(vals["A"]), int(vals["j"])
    value = limits.lambda_j(A, j)
    print(json.dumps({"config": {"A": A, "j": j}, "lambda": value}, sort_keys=True))
    return 0


def cmd_qm(args) -> int:
    vals = _merge(args, {"mu": REQUIRED, "m": REQUIRED, "exact": False, "asymptotic": False})
    mu, m = float(vals["mu"]), int(vals["m"])
    asymptotic = bool(vals["asymptotic"])
    q = limits.q_asymptotic(mu, m) if asymptotic else limits.p_recursion(mu, m)
    out = {
        "config": {"mu": mu, "m": m, "mode": "asymptotic" if asymptotic else "exact"},
        "q": q,
    }
    print(json.dumps(out, sort_keys=True))
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "regime": cmd_regime,
    "limit-cdf": cmd_limit_cdf,
    "compare": cmd_compare,
    "lambda": cmd_lambda,
    "qm": cmd_qm,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR
    try:
        return _COMMANDS[args.command](args)
    except CliUsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except UnclassifiableRegimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    except (model.StalledError, harness.TruncationCapError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
