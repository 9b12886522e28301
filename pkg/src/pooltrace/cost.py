"""Analytic per-pool expectations and the penalized objective.

For two-stage pooled testing, the expected number of tests, false negatives
and false positives of a pool depend only on its size, through the
distribution of the number of infected members. Under the contact model
that distribution is a hypergeometric mixture of the truncated prior; under
the classical independence assumption it is binomial. Both variants share
the same expectation formulas, so the table builders differ only in the
composition vector they feed in.

Expectations are exact sums, never Monte-Carlo estimates: the partition
optimizer needs a noiseless objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dist import (
    NegBinParams,
    TruncatedPrior,
    binom_pmf_vector,
    build_truncated_prior,
    hypergeom_composition_matrix,
)
from .errors import ParameterError


@dataclass(frozen=True)
class TestCharacteristics:
    """Sensitivity and specificity of a single test.

    Pool tests are assumed to have the same characteristics regardless of
    how many infected samples the pool contains (no dilution effect).
    """

    __test__ = False  # keep pytest from collecting this as a test class

    s_e: float
    s_p: float

    def __post_init__(self) -> None:
        for name, value in (("s_e", self.s_e), ("s_p", self.s_p)):
            if not (math.isfinite(value) and 0.0 <= value <= 1.0):
                raise ParameterError(f"{name} must be in [0, 1], got {value}")


@dataclass(frozen=True)
class PenaltyWeights:
    """Objective weights for false negatives (lambda1) and false positives (lambda2)."""

    lambda1: float = 0.0
    lambda2: float = 0.0

    def __post_init__(self) -> None:
        for name, value in (("lambda1", self.lambda1), ("lambda2", self.lambda2)):
            if not (math.isfinite(value) and value >= 0.0):
                raise ParameterError(f"{name} must be non-negative and finite, got {value}")


@dataclass(frozen=True)
class ModelParams:
    """Full scenario: contact count, infection distribution, test quality."""

    n: int
    r: float
    k: float
    s_e: float
    s_p: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ParameterError(f"contact count n must be >= 1, got {self.n}")
        self.negbin()
        self.tc()

    def negbin(self) -> NegBinParams:
        return NegBinParams(r=self.r, k=self.k)

    def tc(self) -> TestCharacteristics:
        return TestCharacteristics(s_e=self.s_e, s_p=self.s_p)


@dataclass(frozen=True, eq=False)
class PoolCompositionDist:
    """Distribution of the number of infected members of one pool."""

    pool_size: int
    probs: np.ndarray


def pool_composition(pool_size: int, prior: TruncatedPrior) -> PoolCompositionDist:
    """Mix hypergeometric draws over the prior: probs[j] = P(j infected in pool)."""
    if not 1 <= pool_size <= prior.n_max:
        raise ParameterError(f"pool_size must be in [1, {prior.n_max}], got {pool_size}")
    weights = hypergeom_composition_matrix(pool_size, prior.n_max)
    probs = np.sum(weights * prior.pmf[None, :], axis=1)
    return PoolCompositionDist(pool_size=pool_size, probs=probs)


def _tests_from_probs(s: int, probs: np.ndarray, tc: TestCharacteristics) -> float:
    if s == 1:
        return 1.0
    tail = float(np.sum(probs[1:]))
    return 1.0 + s * (1.0 - (1.0 - tc.s_e) * tail - tc.s_p * float(probs[0]))


def _fneg_from_probs(s: int, probs: np.ndarray, tc: TestCharacteristics, rate: float) -> float:
    # rate = marginal infection probability of one contact; only the
    # singleton case needs it.
    if s == 1:
        return (1.0 - tc.s_e) * rate
    j = np.arange(1, s + 1)
    return float((1.0 - tc.s_e**2) * np.sum(j * probs[1:]))


def _fpos_from_probs(s: int, probs: np.ndarray, tc: TestCharacteristics, rate: float) -> float:
    if s == 1:
        return (1.0 - tc.s_p) * (1.0 - rate)
    clean = (1.0 - tc.s_p) ** 2 * s * float(probs[0])
    j = np.arange(1, s)
    mixed = float(np.sum(tc.s_e * (s - j) * (1.0 - tc.s_p) * probs[1:s]))
    return clean + mixed


def expected_tests(pool_size: int, prior: TruncatedPrior, tc: TestCharacteristics) -> float:
    """Expected tests spent on one pool: 1 group test plus, if it fires,
    one individual test per member. Singletons always cost exactly 1."""
    probs = pool_composition(pool_size, prior).probs
    return _tests_from_probs(pool_size, probs, tc)


def expected_false_negatives(
    pool_size: int, prior: TruncatedPrior, tc: TestCharacteristics
) -> float:
    """Expected infected members of one pool that end up marked negative."""
    probs = pool_composition(pool_size, prior).probs
    return _fneg_from_probs(pool_size, probs, tc, prior.mean / prior.n_max)


def expected_false_positives(
    pool_size: int, prior: TruncatedPrior, tc: TestCharacteristics
) -> float:
    """Expected healthy members of one pool that end up marked positive."""
    probs = pool_composition(pool_size, prior).probs
    return _fpos_from_probs(pool_size, probs, tc, prior.mean / prior.n_max)


@dataclass(frozen=True, eq=False)
class CostTable:
    """Per-pool-size expectations, indexed by pool size (entry 0 unused).

    ``objective[s] = tests[s] + lambda1 * fneg[s] + lambda2 * fpos[s]``.
    """

    n_max: int
    tests: np.ndarray
    fneg: np.ndarray
    fpos: np.ndarray
    objective: np.ndarray
    weights: PenaltyWeights


def _assemble_table(
    n_max: int,
    rows: list[tuple[float, float, float]],
    weights: PenaltyWeights,
) -> CostTable:
    tests = np.full(n_max + 1, np.nan)
    fneg = np.full(n_max + 1, np.nan)
    fpos = np.full(n_max + 1, np.nan)
    for s, (t, fn, fp) in enumerate(rows, start=1):
        tests[s], fneg[s], fpos[s] = t, fn, fp
    objective = tests + weights.lambda1 * fneg + weights.lambda2 * fpos
    return CostTable(
        n_max=n_max, tests=tests, fneg=fneg, fpos=fpos, objective=objective, weights=weights
    )


def build_cost_table_from_prior(
    prior: TruncatedPrior, tc: TestCharacteristics, weights: PenaltyWeights
) -> CostTable:
    """Tabulate tests, FN, FP and objective for every pool size 1..N.

    Each composition row is computed once and shared by the three
    expectation formulas.
    """
    rate = prior.mean / prior.n_max
    rows = []
    for s in range(1, prior.n_max + 1):
        probs = pool_composition(s, prior).probs
        rows.append(
            (
                _tests_from_probs(s, probs, tc),
                _fneg_from_probs(s, probs, tc, rate),
                _fpos_from_probs(s, probs, tc, rate),
            )
        )
    return _assemble_table(prior.n_max, rows, weights)


def build_cost_table(params: ModelParams, weights: PenaltyWeights) -> CostTable:
    """Cost table under the truncated overdispersed contact model."""
    prior = build_truncated_prior(params.negbin(), params.n)
    return build_cost_table_from_prior(prior, params.tc(), weights)


def build_cost_table_independent(
    pool_max: int, p: float, tc: TestCharacteristics, weights: PenaltyWeights
) -> CostTable:
    """Cost table under the classical independence assumption.

    Identical formulas with the composition vector replaced by a
    Binomial(s, p) pmf; this is the Dorfman baseline with the marginal
    infection probability p (conventionally the prior mean over N).
    """
    if pool_max < 1:
        raise ParameterError(f"pool_max must be >= 1, got {pool_max}")
    rows = []
    for s in range(1, pool_max + 1):
        probs = binom_pmf_vector(s, p)
        rows.append(
            (
                _tests_from_probs(s, probs, tc),
                _fneg_from_probs(s, probs, tc, p),
                _fpos_from_probs(s, probs, tc, p),
            )
        )
    return _assemble_table(pool_max, rows, weights)
