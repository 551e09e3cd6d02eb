"""Small shared statistics helpers: binomial CIs and mean CIs."""

from __future__ import annotations

import math
from dataclasses import dataclass

Z95 = 1.959963984540054


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be >= 1")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def binom_sigma(phat: float, trials: int) -> float:
    return math.sqrt(max(phat * (1.0 - phat), 0.0) / trials)


@dataclass(frozen=True)
class MeanCI:
    point: float
    ci_low: float
    ci_high: float
    trials: int

    def overlaps(self, other: "MeanCI") -> bool:
        return self.ci_low <= other.ci_high and other.ci_low <= self.ci_high


def mean_ci(values, z: float = Z95) -> MeanCI:
    """Normal-approximation CI for a sample mean."""
    n = len(values)
    if n == 0:
        raise ValueError("need at least one value")
    m = sum(values) / n
    if n == 1:
        return MeanCI(m, m, m, 1)
    var = sum((v - m) ** 2 for v in values) / (n - 1)
    half = z * math.sqrt(var / n)
    return MeanCI(m, m - half, m + half, n)
