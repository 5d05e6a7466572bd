"""Increment models and random-walk path functionals.

Conventions: ``S_0`` is the start value, ``L_n = min(S_1..S_n)`` and
``M_n = max(S_1..S_n)`` exclude ``S_0``, and ``tau_n`` is the first index
``k in 0..n`` with ``S_k = min(0, L_n)``.  The last definition only makes
sense for walks started at 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from . import stable
from .rng import RandomStream
from .stable import ScalingSequence, StableParams

__all__ = [
    "IncrementModel",
    "ExactStable",
    "Gaussian",
    "TailEquivalent",
    "LogisticLogit",
    "exact_stable",
    "gaussian",
    "tail_equivalent",
    "logistic_logit",
    "sample_increment",
    "PathSummary",
    "summarize",
    "generate_path",
    "reverse_path",
    "BatchSummary",
    "summarize_batch",
]


class IncrementModel:
    """Base class for step laws in the domain of attraction of ``attraction``."""

    kind: str = ""
    attraction: StableParams

    @property
    def scaling(self) -> ScalingSequence:
        return stable.scaling_for(self.attraction)

    @property
    def alpha(self) -> float:
        return self.attraction.alpha

    @property
    def rho(self) -> float:
        return stable.positivity_rho(self.attraction)

    @property
    def symmetric(self) -> bool:
        return False

    def sample(self, gen: np.random.Generator, size=None):
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def spec(self) -> dict:
        """Flat description used in config digests and report headers."""
        raise NotImplementedError


@dataclass(frozen=True)
class ExactStable(IncrementModel):
    params: StableParams
    kind: str = field(default="exact_stable", init=False)

    @property
    def attraction(self) -> StableParams:
        return self.params

    @property
    def symmetric(self) -> bool:
        return self.params.beta == 0.0

    def sample(self, gen, size=None):
        return stable.sample_stable(self.params, gen, size)

    def pdf(self, x):
        return stable.density(self.params, x)

    def spec(self):
        p = self.params
        return {"family": self.kind, "alpha": p.alpha, "beta": p.beta, "c": p.c}


@dataclass(frozen=True)
class Gaussian(IncrementModel):
    sigma2: float = 1.0
    kind: str = field(default="gaussian", init=False)

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be > 0")

    @property
    def attraction(self) -> StableParams:
        return StableParams(2.0, 0.0, self.sigma2 / 2.0)

    @property
    def symmetric(self) -> bool:
        return True

    def sample(self, gen, size=None):
        return math.sqrt(self.sigma2) * gen.standard_normal(size)

    def pdf(self, x):
        return stats.norm.pdf(x, scale=math.sqrt(self.sigma2))

    def spec(self):
        return {"family": self.kind, "sigma2": self.sigma2}


@dataclass(frozen=True)
class LogisticLogit(IncrementModel):
    """``X = log((1 - p) / p)`` with ``p`` uniform: the standard logistic law.

    Under the geometric offspring link ``p = 1 / (1 + e^X)`` this makes the
    success parameter of each generation uniform on (0, 1).
    """

    kind: str = field(default="logistic_logit", init=False)

    @property
    def attraction(self) -> StableParams:
        return StableParams(2.0, 0.0, math.pi**2 / 6.0)

    @property
    def symmetric(self) -> bool:
        return True

    def sample(self, gen, size=None):
        return special.logit(gen.random(size))

    def pdf(self, x):
        return stats.logistic.pdf(x)

    def spec(self):
        return {"family": self.kind}


def _tail_constants(p: StableParams) -> tuple[float, float]:
    """``(C+, C-)`` with ``P(Y > t) ~ C+ t^-alpha`` and ``P(Y < -t) ~ C- t^-alpha``."""
    a, b, c = p.alpha, p.beta, p.c
    if a == 1.0:
        k = c / math.pi
        return k, k
    k = c / (2.0 * math.gamma(1.0 - a) * math.cos(math.pi * a / 2.0))
    return k * (1.0 + b), k * (1.0 - b)


@dataclass(frozen=True)
class TailEquivalent(IncrementModel):
    """Beta(a, b) body on ``[-h, h]`` glued to exact Pareto tails beyond ``h``.

    The tails are ``P(X > t) = C+ t^-alpha`` and ``P(X < -t) = C- t^-alpha``
    for ``t >= h`` with the constants of the target stable law, so
    ``S_n / n^(1/alpha)`` converges to that law.  For ``alpha > 1`` the body
    is skewed to make the mean exactly zero.
    """

    params: StableParams
    crossover: float
    kind: str = field(default="tail_equivalent", init=False)
    p_right: float = field(init=False)
    p_left: float = field(init=False)
    body_a: float = field(init=False)
    body_b: float = field(init=False)

    def __post_init__(self):
        p, h = self.params, float(self.crossover)
        if p.alpha >= 2.0:
            raise ValueError("tail_equivalent needs alpha < 2")
        if not h > 0:
            raise ValueError("crossover must be > 0")
        cp, cm = _tail_constants(p)
        pr, pl = cp * h ** -p.alpha, cm * h ** -p.alpha
        if pr + pl >= 1.0:
            raise ValueError(f"crossover {h} too small: tail mass {pr + pl:.3f} >= 1")
        body_mean = 0.0
        if p.alpha > 1.0:
            tail_mean = (pr - pl) * h * p.alpha / (p.alpha - 1.0)
            body_mean = -tail_mean / (1.0 - pr - pl)
        a = 2.0 * (1.0 + body_mean / h)
        if not 1.0 < a < 3.0:
            raise ValueError("crossover too small to centre the body")
        object.__setattr__(self, "p_right", pr)
        object.__setattr__(self, "p_left", pl)
        object.__setattr__(self, "body_a", a)
        object.__setattr__(self, "body_b", 4.0 - a)

    @property
    def attraction(self) -> StableParams:
        return self.params

    @property
    def symmetric(self) -> bool:
        return self.params.beta == 0.0

    @property
    def tail_constants(self) -> tuple[float, float]:
        return _tail_constants(self.params)

    def tail_prob(self, t) -> float:
        """``P(|X| > t)`` for ``t >= crossover``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < self.crossover):
            raise ValueError("closed-form tail only holds beyond the crossover")
        cp, cm = self.tail_constants
        return (cp + cm) * t ** -self.params.alpha

    def sample(self, gen, size=None):
        h, a = self.crossover, self.params.alpha
        u = gen.random(size)
        mag = h * gen.random(size) ** (-1.0 / a)
        body = h * (2.0 * gen.beta(self.body_a, self.body_b, size) - 1.0)
        out = np.where(u < self.p_right, mag, np.where(u < self.p_right + self.p_left, -mag, body))
        return out if size is not None else float(out)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        h, a = self.crossover, self.params.alpha
        cp, cm = self.tail_constants
        q = 1.0 - self.p_right - self.p_left
        ax = np.maximum(np.abs(x), h)
        body = q * stats.beta.pdf((x + h) / (2 * h), self.body_a, self.body_b) / (2 * h)
        out = np.where(x > h, cp * a * ax ** (-a - 1), np.where(x < -h, cm * a * ax ** (-a - 1), body))
        return out if out.ndim else float(out)

    def spec(self):
        p = self.params
        return {"family": self.kind, "alpha": p.alpha, "beta": p.beta, "c": p.c, "crossover": self.crossover}


def exact_stable(alpha: float, beta: float = 0.0, c: float = 1.0) -> ExactStable:
    return ExactStable(stable.make_stable_params(alpha, beta, c))


def gaussian(sigma2: float = 1.0) -> Gaussian:
    return Gaussian(float(sigma2))


def tail_equivalent(alpha: float, beta: float, crossover: float, c: float = 1.0) -> TailEquivalent:
    return TailEquivalent(stable.make_stable_params(alpha, beta, c), float(crossover))


def logistic_logit() -> LogisticLogit:
    return LogisticLogit()


def sample_increment(model: IncrementModel, stream: RandomStream, size=None):
    return model.sample(stream.generator(), size)


# --- single paths ---------------------------------------------------------

@dataclass(frozen=True)
class PathSummary:
    """Partial sums and extremal functionals of one path."""

    n: int
    partial_sums: np.ndarray
    L: float
    M: float
    tau: int | None
    S_tau: float | None
    start: float = 0.0

    @property
    def S_n(self) -> float:
        return float(self.partial_sums[-1])


def summarize(increments, start_x: float = 0.0, with_tau: bool = True) -> PathSummary:
    """Build a :class:`PathSummary` from an explicit increment sequence."""
    x = np.asarray(increments, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("need a nonempty 1-d increment sequence")
    if with_tau and start_x != 0.0:
        raise ValueError("tau_n is only defined for walks started at 0")
    s = start_x + np.cumsum(x)
    tau = s_tau = None
    if with_tau:
        full = np.concatenate(([0.0], s))
        tau = int(np.argmin(full))  # first occurrence of min(0, L_n)
        s_tau = float(full[tau])
    return PathSummary(x.size, s, float(s.min()), float(s.max()), tau, s_tau, float(start_x))


def generate_path(model: IncrementModel, n: int, start_x: float = 0.0,
                  stream: RandomStream | None = None, with_tau: bool = True) -> PathSummary:
    if n < 1:
        raise ValueError("n must be >= 1")
    if with_tau and start_x != 0.0:
        raise ValueError("tau_n is only defined for walks started at 0")
    gen = (stream or RandomStream(0)).generator()
    return summarize(model.sample(gen, n), start_x, with_tau)


def reverse_path(increments) -> np.ndarray:
    """Time-reversed increments ``(X_n, ..., X_1)``."""
    x = np.asarray(increments, dtype=float)
    if x.size == 0:
        raise ValueError("empty increment sequence")
    return x[::-1].copy()


# --- replica batches ------------------------------------------------------

@dataclass
class BatchSummary:
    """Per-replica functionals of walks from 0 at one horizon ``n``."""

    n: int
    S: np.ndarray
    L: np.ndarray
    M: np.ndarray
    tau: np.ndarray
    S_tau: np.ndarray


def summarize_batch(model: IncrementModel, checkpoints, size: int, gen: np.random.Generator,
                    block: int = 64) -> dict[int, BatchSummary]:
    """Simulate ``size`` walks from 0 and snapshot them at each checkpoint.

    Increments are drawn in ``(size, block)`` slabs, so memory stays
    ``O(size * block)`` whatever the horizon.  ``tau`` keeps the earliest
    index attaining ``min(0, L_n)``.
    """
    cps = sorted(set(int(c) for c in checkpoints))
    if not cps or cps[0] < 1:
        raise ValueError("checkpoints must be positive")
    s = np.zeros(size)
    lo = np.full(size, np.inf)
    hi = np.full(size, -np.inf)
    m0 = np.zeros(size)  # running min(0, S_1..S_k)
    arg = np.zeros(size, dtype=np.int64)
    out: dict[int, BatchSummary] = {}
    t = 0
    rows = np.arange(size)
    for cp in cps:
        while t < cp:
            width = min(block, cp - t)
            path = s[:, None] + np.cumsum(model.sample(gen, (size, width)), axis=1)
            bmin_idx = np.argmin(path, axis=1)
            bmin = path[rows, bmin_idx]
            better = bmin < m0
            m0 = np.where(better, bmin, m0)
            arg = np.where(better, t + 1 + bmin_idx, arg)
            np.minimum(lo, bmin, out=lo)
            np.maximum(hi, path.max(axis=1), out=hi)
            s = path[:, -1].copy()
            t += width
        out[cp] = BatchSummary(cp, s.copy(), lo.copy(), hi.copy(), arg.copy(), m0.copy())
    return out
