"""Mutation waiting times in the Moran model.

Exact event-driven simulation of the time for an individual to accumulate
m neutral mutations in a fixed-size population, analytic evaluation of the
4m-3 limiting distributions of the scaled waiting time, independent
branching-process oracles, and a Monte Carlo harness that ties the three
together with distribution-free goodness-of-fit gates.
"""

from .branching import (
    Model5Estimate,
    QEstimate,
    estimate_model5,
    estimate_q,
    estimate_two_type_mutation,
    simulate_model5,
    simulate_q,
    simulate_two_type_mutation,
)
from .harness import (
    EmpiricalDistribution,
    ExperimentConfig,
    TruncationCapError,
    dkw_bound,
    ecdf,
    ks_distance,
    resolve_scaling,
    run_experiment,
)
from .limits import (
    ExponentialLaw,
    GammaLaw,
    HypoexpGammaPlusExpLaw,
    LimitLaw,
    PowerExpLaw,
    PowerLawAsymptote,
    QuadratureLaw,
    Regime,
    RegimeKind,
    UnclassifiableRegimeError,
    UnsupportedRegimeError,
    bigmu_border_survival,
    boundary_exponents,
    classify_regime,
    hypoexp_gamma_cdf,
    lambda_j,
    limit_law,
    p_recursion,
    q_asymptotic,
    small_t_asymptote,
)
from .model import (
    AbsorbedStateError,
    Mutation,
    Outcome,
    PopulationState,
    RateTable,
    Replacement,
    SimBudget,
    StalledError,
    TauSample,
    effective_rates,
    new_population,
    observe_trajectory,
    simulate_single_mutant,
    simulate_tau,
    simulate_tau_batch,
    simulate_two_type_occupation,
    step,
)
from .rng import SplitMix64, seed_for_replicate

__version__ = "0.1.0"

__all__ = [
    "AbsorbedStateError",
    "EmpiricalDistribution",
    "ExperimentConfig",
    "ExponentialLaw",
    "GammaLaw",
    "HypoexpGammaPlusExpLaw",
    "LimitLaw",
    "Model5Estimate",
    "Mutation",
    "Outcome",
    "PopulationState",
    "PowerExpLaw",
    "PowerLawAsymptote",
    "QEstimate",
    "QuadratureLaw",
    "RateTable",
    "Regime",
    "RegimeKind",
    "Replacement",
    "SimBudget",
    "SplitMix64",
    "StalledError",
    "TauSample",
    "TruncationCapError",
    "UnclassifiableRegimeError",
    "UnsupportedRegimeError",
    "bigmu_border_survival",
    "boundary_exponents",
    "classify_regime",
    "dkw_bound",
    "ecdf",
    "effective_rates",
    "estimate_model5",
    "estimate_q",
    "estimate_two_type_mutation",
    "hypoexp_gamma_cdf",
    "ks_distance",
    "lambda_j",
    "limit_law",
    "new_population",
    "observe_trajectory",
    "p_recursion",
    "q_asymptotic",
    "resolve_scaling",
    "run_experiment",
    "seed_for_replicate",
    "simulate_model5",
    "simulate_q",
    "simulate_single_mutant",
    "simulate_tau",
    "simulate_tau_batch",
    "simulate_two_type_mutation",
    "simulate_two_type_occupation",
    "small_t_asymptote",
    "step",
]
