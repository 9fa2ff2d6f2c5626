"""Moment aggregates with an exact, order-fixed merge."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as _st


@dataclass(frozen=True)
class StatSummary:
    """Count, mean and central moment sums ``M_k = sum (x - mean)^k``."""

    count: int
    mean: float
    m2: float
    m3: float
    m4: float

    @classmethod
    def empty(cls) -> "StatSummary":
        return cls(0, 0.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_samples(cls, x: Sequence[float]) -> "StatSummary":
        x = np.asarray(x, dtype=float).ravel()
        if x.size == 0:
            return cls.empty()
        mean = float(np.mean(x))
        d = x - mean
        d2 = d * d
        return cls(int(x.size), mean, float(d2.sum()), float((d2 * d).sum()), float((d2 * d2).sum()))

    def merge(self, other: "StatSummary") -> "StatSummary":
        """Combine two disjoint sample sets (Pebay's pairwise update)."""
        na, nb = self.count, other.count
        if na == 0:
            return other
        if nb == 0:
            return self
        n = na + nb
        delta = other.mean - self.mean
        dn = delta / n
        mean = self.mean + nb * dn
        m2 = self.m2 + other.m2 + delta * dn * na * nb
        m3 = (
            self.m3
            + other.m3
            + delta * dn * dn * na * nb * (na - nb)
            + 3.0 * dn * (na * other.m2 - nb * self.m2)
        )
        m4 = (
            self.m4
            + other.m4
            + delta * dn**3 * na * nb * (na * na - na * nb + nb * nb)
            + 6.0 * dn * dn * (na * na * other.m2 + nb * nb * self.m2)
            + 4.0 * dn * (na * other.m3 - nb * self.m3)
        )
        return StatSummary(n, mean, m2, m3, m4)

    @property
    def variance(self) -> float:
        """Unbiased sample variance (0 for fewer than two samples)."""
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def std(self) -> float:
        return math.sqrt(max(self.variance, 0.0))

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count > 1 else math.inf

    @property
    def third_central(self) -> float:
        return self.m3 / self.count if self.count else 0.0

    @property
    def fourth_central(self) -> float:
        return self.m4 / self.count if self.count else 0.0

    def ci(self, level: float = 0.95) -> tuple[float, float]:
        """Normal-approximation confidence interval for the mean."""
        z = _st.norm.ppf(0.5 + level / 2)
        return self.mean - z * self.stderr, self.mean + z * self.stderr

    def as_dict(self) -> dict:
        return dict(count=self.count, mean=self.mean, variance=self.variance, stderr=self.stderr,
                    m3=self.third_central, m4=self.fourth_central)


def merge_all(parts: Iterable[StatSummary]) -> StatSummary:
    """Pairwise tree reduction in the given order (deterministic rounding)."""
    level = list(parts)
    if not level:
        return StatSummary.empty()
    while len(level) > 1:
        nxt = [level[i].merge(level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]
