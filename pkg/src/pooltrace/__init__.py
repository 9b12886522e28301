"""Optimal Dorfman-style pool designs for the traced contacts of a diagnosed
individual, when secondary infections follow a truncated overdispersed
negative binomial, with paired Monte-Carlo validation against the classical
independence-based baseline."""

from .cost import (
    CostTable,
    ModelParams,
    PenaltyWeights,
    PoolCompositionDist,
    TestCharacteristics,
    build_cost_table,
    build_cost_table_from_prior,
    build_cost_table_independent,
    expected_false_negatives,
    expected_false_positives,
    expected_tests,
    pool_composition,
)
from .dist import (
    NegBinParams,
    TruncatedPrior,
    binom_pmf,
    build_truncated_prior,
    hypergeom_pmf,
    negbinom_log_pmf,
    sample_truncated,
)
from .errors import NumericError, ParameterError, PoolTraceError
from .optimizer import PoolDesign, brute_force_design, optimal_design
from .sim import (
    ExperimentSummary,
    InfectionState,
    MethodSummary,
    PairedRun,
    ReplicateRecord,
    paired_designs,
    replicate_rng,
    run_paired_experiment,
    sample_infection_state,
    simulate_design,
)

__version__ = "0.1.0"

__all__ = [
    "CostTable",
    "ExperimentSummary",
    "InfectionState",
    "MethodSummary",
    "ModelParams",
    "NegBinParams",
    "NumericError",
    "PairedRun",
    "ParameterError",
    "PenaltyWeights",
    "PoolCompositionDist",
    "PoolDesign",
    "PoolTraceError",
    "ReplicateRecord",
    "TestCharacteristics",
    "TruncatedPrior",
    "binom_pmf",
    "brute_force_design",
    "build_cost_table",
    "build_cost_table_from_prior",
    "build_cost_table_independent",
    "build_truncated_prior",
    "expected_false_negatives",
    "expected_false_positives",
    "expected_tests",
    "hypergeom_pmf",
    "negbinom_log_pmf",
    "optimal_design",
    "paired_designs",
    "pool_composition",
    "replicate_rng",
    "run_paired_experiment",
    "sample_infection_state",
    "sample_truncated",
    "simulate_design",
]
