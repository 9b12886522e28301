"""Optimal pool-size selection.

Minimizing the summed per-pool objective over all ways of partitioning the
N contacts into pools is an integer-partition problem, solved exactly by a
dynamic program over ``h(n) = min_j [g(j) + h(n - j)]``. A brute-force
partition enumerator is kept alongside as an optimality oracle for small N.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .cost import CostTable
from .errors import ParameterError

# Partition counts explode past here (p(30) = 5604, p(60) ~ 1e6).
_BRUTE_FORCE_LIMIT = 30


@dataclass(frozen=True)
class PoolDesign:
    """A partition of the contact set into pools, identified by sizes only.

    Sizes are canonically non-increasing; pool membership is exchangeable
    so the sizes fully determine all expectations.
    """

    sizes: tuple[int, ...]
    total: int
    objective_value: float

    def __post_init__(self) -> None:
        if not self.sizes or any(s < 1 for s in self.sizes):
            raise ParameterError("sizes must be non-empty positive integers")
        if list(self.sizes) != sorted(self.sizes, reverse=True):
            raise ParameterError("sizes must be in non-increasing order")
        if sum(self.sizes) != self.total:
            raise ParameterError(f"sizes must sum to {self.total}, got {sum(self.sizes)}")

    @property
    def mean_pool_size(self) -> float:
        return self.total / len(self.sizes)


def optimal_design(cost: CostTable) -> PoolDesign:
    """Globally optimal design by dynamic programming, O(N^2) time.

    Argmin ties break toward the smallest candidate pool size, making the
    result deterministic.
    """
    n_max = cost.n_max
    if n_max < 1 or cost.objective.size != n_max + 1:
        raise ParameterError("cost table is empty or inconsistent")
    g = cost.objective.tolist()
    h = [0.0] * (n_max + 1)
    parent = [0] * (n_max + 1)
    for n in range(1, n_max + 1):
        best = float("inf")
        best_j = 0
        for j in range(1, n + 1):
            value = g[j] + h[n - j]
            if value < best:
                best = value
                best_j = j
        h[n] = best
        parent[n] = best_j
    sizes = []
    n = n_max
    while n > 0:
        sizes.append(parent[n])
        n -= parent[n]
    sizes.sort(reverse=True)
    return PoolDesign(sizes=tuple(sizes), total=n_max, objective_value=h[n_max])


def _partitions(n: int, max_part: int) -> Iterator[tuple[int, ...]]:
    """All partitions of n as non-increasing tuples with parts <= max_part."""
    if n == 0:
        yield ()
        return
    for first in range(min(n, max_part), 0, -1):
        for rest in _partitions(n - first, first):
            yield (first,) + rest


def brute_force_design(cost: CostTable) -> PoolDesign:
    """Exhaustive-enumeration minimizer, for verifying the dynamic program.

    Ties break to the lexicographically smallest non-increasing sequence,
    matching the smallest-pool-first preference of the DP.
    """
    n_max = cost.n_max
    if n_max < 1 or cost.objective.size != n_max + 1:
        raise ParameterError("cost table is empty or inconsistent")
    if n_max > _BRUTE_FORCE_LIMIT:
        raise ParameterError(
            f"brute force enumeration refused for N={n_max} > {_BRUTE_FORCE_LIMIT}"
        )
    g = cost.objective.tolist()
    best_sizes: tuple[int, ...] | None = None
    best_value = float("inf")
    for sizes in _partitions(n_max, n_max):
        value = sum(g[s] for s in sizes)
        if value < best_value or (value == best_value and (best_sizes is None or sizes < best_sizes)):
            best_value = value
            best_sizes = sizes
    assert best_sizes is not None
    return PoolDesign(sizes=best_sizes, total=n_max, objective_value=best_value)
