"""Adaptive sample size with finite population correction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Z_95 = 1.96
LIKERT_SIGMA = 1.0
MARGIN = 0.2
FLOOR = 30


def adaptive_sample_size(M: int, Z: float = Z_95, sigma: float = LIKERT_SIGMA, E: float = MARGIN) -> int:
    """Sample size for judging a population of ``M``.

    ``n0 = (Z * sigma / E) ** 2`` is the infinite-population size; the
    corrected value ``n0 / (1 + (n0 - 1) / M)`` is rounded up, floored at 30
    and capped at ``M``.
    """
    if M < 1:
        raise ValueError("population size must be >= 1")
    if E <= 0:
        raise ValueError("margin of error must be positive")
    n0 = (Z * sigma / E) ** 2
    corrected = n0 / (1 + (n0 - 1) / M)
    return min(M, max(FLOOR, math.ceil(corrected)))


@dataclass(frozen=True)
class SamplingPlan:
    M: int
    Z: float = Z_95
    sigma: float = LIKERT_SIGMA
    E: float = MARGIN

    @property
    def n(self) -> int:
        return adaptive_sample_size(self.M, self.Z, self.sigma, self.E)

    def draw(self, seed: int = 0) -> list[int]:
        """Sorted indices of a uniform sample of size ``n`` without replacement."""
        rng = np.random.default_rng(seed)
        return sorted(int(i) for i in rng.choice(self.M, size=self.n, replace=False))
