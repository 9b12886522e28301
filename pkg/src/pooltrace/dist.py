"""Probability kernels for the contact-infection model.

The number of secondary infections among the N contacts of a diagnosed
individual is modeled as a generalized negative binomial with mean ``r`` and
dispersion ``k``, right-truncated at N. Small dispersion values (down to
k = 0.01) combined with N up to a few hundred produce probability masses
spanning hundreds of orders of magnitude, so every pmf here is evaluated in
log space via ``math.lgamma`` and binomial coefficients come from a cached
log-factorial table. The truncation normalizer is obtained by direct
summation of the N+1 terms after a max-log shift, which keeps the tabulated
pmf exactly consistent with its own normalizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .errors import NumericError, ParameterError

# Below this, the truncation normalizer is considered underflowed: the prior
# puts essentially no mass on [0, N], i.e. r vastly exceeds N.
_LOG_NORMALIZER_FLOOR = math.log(1e-300)


@lru_cache(maxsize=None)
def _log_factorials(n: int) -> np.ndarray:
    """log(i!) for i = 0..n."""
    return np.array([math.lgamma(i + 1.0) for i in range(n + 1)])


def _log_choose(n: int, k: int, table: np.ndarray) -> float:
    return float(table[n] - table[k] - table[n - k])


@dataclass(frozen=True)
class NegBinParams:
    """Mean/dispersion parameterization of the generalized negative binomial.

    ``r`` is the mean number of secondary infections (the effective
    reproduction number); ``k`` is the dispersion parameter, with small
    values producing the heavy-tailed, superspreading-like regime.
    """

    r: float
    k: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.k) and self.k > 0):
            raise ParameterError(f"dispersion k must be positive and finite, got {self.k}")
        if not (math.isfinite(self.r) and self.r >= 0):
            raise ParameterError(f"mean r must be non-negative and finite, got {self.r}")

    @property
    def p(self) -> float:
        """Success probability r / (k + r), in [0, 1)."""
        return self.r / (self.k + self.r)


def negbinom_log_pmf(n: int, params: NegBinParams) -> float:
    """Log pmf of the generalized negative binomial at count ``n``.

    The r = 0 case is a point mass at zero (the pmf formula would need
    log(0) for the success probability).
    """
    if n < 0:
        raise ParameterError(f"count must be non-negative, got {n}")
    r, k = params.r, params.k
    if r == 0.0:
        return 0.0 if n == 0 else -math.inf
    # log p and log(1-p) expanded as log differences: stable for r >> k
    # (p near 1) and r << k (p near 0) alike.
    log_p = math.log(r) - math.log(k + r)
    log_1mp = math.log(k) - math.log(k + r)
    return math.lgamma(n + k) - math.lgamma(k) - math.lgamma(n + 1.0) + n * log_p + k * log_1mp


@dataclass(frozen=True, eq=False)
class TruncatedPrior:
    """Distribution of the infected-contact count, conditioned on being <= N.

    ``pmf[n]`` is the probability of exactly n infected among the n_max
    contacts; entries sum to one. ``params`` records the untruncated
    parameters when the table came from a negative binomial, and is None
    for priors injected directly from a pmf vector.
    """

    params: NegBinParams | None
    n_max: int
    pmf: np.ndarray
    mean: float

    @classmethod
    def from_pmf(cls, pmf, params: NegBinParams | None = None) -> "TruncatedPrior":
        arr = np.asarray(pmf, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise ParameterError("pmf must be a 1-D vector of length >= 2")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ParameterError("pmf entries must be finite and non-negative")
        total = float(np.sum(arr))
        if abs(total - 1.0) > 1e-9:
            raise ParameterError(f"pmf must sum to 1, got {total!r}")
        arr = arr / total
        n_max = arr.size - 1
        mean = float(np.sum(np.arange(n_max + 1) * arr))
        return cls(params=params, n_max=n_max, pmf=arr, mean=mean)

    @cached_property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.pmf)


def build_truncated_prior(params: NegBinParams, n_max: int) -> TruncatedPrior:
    """Tabulate the negative binomial conditioned on the count being <= n_max."""
    if n_max < 1:
        raise ParameterError(f"n_max must be >= 1, got {n_max}")
    if params.r == 0.0:
        pmf = np.zeros(n_max + 1)
        pmf[0] = 1.0
        return TruncatedPrior(params=params, n_max=n_max, pmf=pmf, mean=0.0)
    logs = np.array([negbinom_log_pmf(n, params) for n in range(n_max + 1)])
    shift = float(np.max(logs))
    weights = np.exp(logs - shift)
    total = float(np.sum(weights))
    if shift + math.log(total) < _LOG_NORMALIZER_FLOOR:
        raise NumericError(
            f"P(X <= {n_max}) underflowed for r={params.r}, k={params.k}; "
            "the truncated model cannot represent this regime"
        )
    pmf = weights / total
    mean = float(np.sum(np.arange(n_max + 1) * pmf))
    return TruncatedPrior(params=params, n_max=n_max, pmf=pmf, mean=mean)


def hypergeom_pmf(s_inf: int, n_inf: int, pool: int, total: int) -> float:
    """P(drawing s_inf infected in a pool of ``pool`` from ``total`` contacts
    of which ``n_inf`` are infected). Infeasible compositions have mass 0."""
    if not 0 <= s_inf <= pool <= total:
        raise ParameterError(f"need 0 <= s_inf <= pool <= total, got ({s_inf}, {pool}, {total})")
    if not 0 <= n_inf <= total:
        raise ParameterError(f"n_inf must be in [0, {total}], got {n_inf}")
    if s_inf > n_inf or pool - s_inf > total - n_inf:
        return 0.0
    table = _log_factorials(total)
    return math.exp(
        _log_choose(n_inf, s_inf, table)
        + _log_choose(total - n_inf, pool - s_inf, table)
        - _log_choose(total, pool, table)
    )


def binom_pmf(s_inf: int, pool: int, p: float) -> float:
    """Binomial pmf, supporting the independence baseline."""
    if not 0 <= s_inf <= pool:
        raise ParameterError(f"need 0 <= s_inf <= pool, got ({s_inf}, {pool})")
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"p must be in [0, 1], got {p}")
    if p == 0.0:
        return 1.0 if s_inf == 0 else 0.0
    if p == 1.0:
        return 1.0 if s_inf == pool else 0.0
    table = _log_factorials(pool)
    return math.exp(
        _log_choose(pool, s_inf, table) + s_inf * math.log(p) + (pool - s_inf) * math.log1p(-p)
    )


def sample_truncated(prior: TruncatedPrior, rng: np.random.Generator) -> int:
    """Draw an infected-contact count by inverse CDF over the pmf table."""
    u = rng.random()
    idx = int(np.searchsorted(prior.cdf, u, side="right"))
    return min(idx, prior.n_max)


def hypergeom_composition_matrix(pool: int, total: int) -> np.ndarray:
    """Matrix W with W[j, n] = hypergeom_pmf(j, n, pool, total).

    Row-mixing W against a prior pmf gives the pool-composition
    distribution; computed vectorized from the log-factorial table.
    """
    if not 1 <= pool <= total:
        raise ParameterError(f"need 1 <= pool <= total, got ({pool}, {total})")
    table = _log_factorials(total)
    n = np.arange(total + 1)[None, :]
    j = np.arange(pool + 1)[:, None]
    feasible = (j <= n) & (pool - j <= total - n)
    na, ja = np.broadcast_arrays(n, j)
    na, ja = na[feasible], ja[feasible]
    log_w = (
        table[na] - table[ja] - table[na - ja]
        + table[total - na] - table[pool - ja] - table[total - na - (pool - ja)]
        - _log_choose(total, pool, table)
    )
    out = np.zeros((pool + 1, total + 1))
    out[feasible] = np.exp(log_w)
    return out


def binom_pmf_vector(pool: int, p: float) -> np.ndarray:
    """Binomial pmf over 0..pool as a vector (log-space evaluation)."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"p must be in [0, 1], got {p}")
    out = np.zeros(pool + 1)
    if p == 0.0:
        out[0] = 1.0
        return out
    if p == 1.0:
        out[pool] = 1.0
        return out
    table = _log_factorials(pool)
    j = np.arange(pool + 1)
    log_pmf = (
        table[pool] - table[j] - table[pool - j] + j * math.log(p) + (pool - j) * math.log1p(-p)
    )
    return np.exp(log_pmf)
