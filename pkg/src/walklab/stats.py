"""Replica-level sufficient statistics and the :class:`Estimate` record."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["Moments", "Estimate"]


@dataclass
class Moments:
    """Running (count, sum, sum of squares) for one or more columns.

    Merging is plain addition, so chunk results can be combined in any
    grouping as long as the order is fixed.
    """

    count: int
    total: np.ndarray
    total_sq: np.ndarray

    @classmethod
    def of(cls, values: np.ndarray) -> "Moments":
        """Moments of ``values`` along axis 0 (rows are replicas)."""
        v = np.asarray(values, dtype=float)
        return cls(v.shape[0], v.sum(axis=0), np.square(v).sum(axis=0))

    @classmethod
    def merge(cls, parts) -> "Moments":
        parts = list(parts)
        out = cls(0, np.zeros_like(parts[0].total), np.zeros_like(parts[0].total_sq))
        for p in parts:
            out.count += p.count
            out.total = out.total + p.total
            out.total_sq = out.total_sq + p.total_sq
        return out

    @property
    def mean(self) -> np.ndarray:
        return self.total / self.count

    @property
    def stderr(self) -> np.ndarray:
        n = self.count
        if n < 2:
            return np.zeros_like(np.asarray(self.total, dtype=float))
        m = self.total / n
        var = np.maximum(self.total_sq / n - m * m, 0.0) * n / (n - 1)
        return np.sqrt(var / n)


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo value with its standard error and provenance."""

    value: float
    stderr: float
    replicas: int
    seed: int = 0
    config_hash: str = ""

    def __post_init__(self):
        if self.stderr < 0 or not math.isfinite(self.stderr):
            raise ValueError(f"invalid stderr {self.stderr}")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")

    @property
    def rel_stderr(self) -> float:
        return self.stderr / abs(self.value) if self.value else math.inf

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.value - target) <= k * self.stderr

    def agrees(self, other: "Estimate", k: float = 3.0) -> bool:
        """Two independent estimates agree within ``k`` combined stderr."""
        return abs(self.value - other.value) <= k * math.hypot(self.stderr, other.stderr)
