"""Critical branching processes in a random environment.

Each generation draws an offspring law ``F_k`` with mean ``e^{X_k}``, where
``X_k`` comes from the driver increment model, so the associated walk
``S_k = X_1 + ... + X_k`` is exactly ``sum log F_k'(1)``.  Two links are
supported:

* ``geometric``: ``F({j}) = p (1 - p)^j`` with ``p = 1 / (1 + e^X)``;
* ``poisson``: Poisson with mean ``e^X``.

Populations above ``cap`` are advanced by their conditional mean
``Z e^X`` instead of being sampled (a per-replica flag records this).
Saturating at the cap instead would bias survival down: a clipped
population can die out later in a bad stretch that the true one survives.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special, stats

from .parallel import DEFAULT_CHUNK, run_chunks
from .renewal import RenewalTable
from .rng import RandomStream
from .stats import Estimate, Moments
from .walk import IncrementModel

__all__ = [
    "EnvironmentModel",
    "OffspringLaw",
    "SurvivalReport",
    "WTrack",
    "DEFAULT_CAP",
    "sample_environment",
    "step_population",
    "b2_diagnostic",
    "quenched_mean_check",
    "survival_constrained",
    "survival_unconstrained",
    "plus_measure_expectation",
    "minus_measure_expectation",
    "martingale_W_track",
    "ConstantOne",
    "EmbeddedSurvival",
]

DEFAULT_CAP = 10**12
POISSON_LIMIT = 1e15
FLOAT_CEIL = 1e300
FAMILIES = ("geometric", "poisson")


@dataclass(frozen=True)
class OffspringLaw:
    """One generation's offspring distribution, parameterised by its mean."""

    family: str
    mean: float

    @property
    def p(self) -> float:
        """Success parameter of the geometric law (``P(0) = p``)."""
        return 1.0 / (1.0 + self.mean)

    def pmf(self, k):
        k = np.asarray(k)
        if self.family == "geometric":
            return stats.geom.pmf(k + 1, self.p)
        return stats.poisson.pmf(k, self.mean)

    def second_moment(self) -> float:
        m = self.mean
        return m + 2 * m * m if self.family == "geometric" else m + m * m

    def gamma(self, b: int = 1) -> float:
        """``sum_{k >= b} k^2 F({k}) / (sum_i i F({i}))^2``."""
        head = sum(k * k * float(self.pmf(k)) for k in range(1, b))
        return (self.second_moment() - head) / self.mean**2

    def sample(self, gen: np.random.Generator, size=None):
        if self.family == "geometric":
            return gen.geometric(self.p, size) - 1
        return gen.poisson(self.mean, size)


@dataclass(frozen=True)
class EnvironmentModel:
    """Offspring family plus the driver law of ``X = log F'(1)``."""

    offspring_family: str
    driver: IncrementModel

    def __post_init__(self):
        if self.offspring_family not in FAMILIES:
            raise ValueError(f"offspring family must be one of {FAMILIES}")

    def law(self, x: float) -> OffspringLaw:
        return OffspringLaw(self.offspring_family, math.exp(x))

    def spec(self) -> dict:
        return {"offspring": self.offspring_family, **self.driver.spec()}


def sample_environment(model: EnvironmentModel, stream: RandomStream) -> tuple[OffspringLaw, float]:
    x = float(model.driver.sample(stream.generator()))
    return model.law(x), x


def _offspring_sum(family, z, mean, gen, cap):
    """Vectorised sum of ``z`` i.i.d. offspring draws with the given means.

    Geometric sums are drawn as a gamma mixture of Poissons.  Populations
    above ``cap`` (and Poisson intensities above ``POISSON_LIMIT``) are
    advanced by their conditional mean, whose relative fluctuation there is
    below 1e-6; the second return value flags those replicas.
    """
    out = np.zeros_like(z)
    flag = np.zeros(z.shape, dtype=bool)
    live = z > 0
    big = live & (z > cap)
    out[big] = np.minimum(z[big] * mean[big], FLOAT_CEIL)
    flag[big] = True
    small = live & ~big
    if small.any():
        zs, ms = z[small], mean[small]
        lam = gen.gamma(zs, ms) if family == "geometric" else zs * ms
        huge = lam > POISSON_LIMIT
        draw = np.where(huge, np.minimum(lam, FLOAT_CEIL), 0.0)
        draw[~huge] = gen.poisson(lam[~huge])
        out[small] = draw
        flag[small] = huge
    return out, flag


def step_population(z: int, law: OffspringLaw, stream: RandomStream | np.random.Generator,
                    cap: int = DEFAULT_CAP) -> tuple[int, bool]:
    """Next generation size from ``z`` parents; returns ``(size, mean_field)``.

    ``mean_field`` is True when ``z`` exceeded ``cap`` and the step used the
    conditional mean ``z e^X``.
    """
    if z < 0:
        raise ValueError("population must be >= 0")
    if z == 0:
        return 0, False
    gen = stream.generator() if isinstance(stream, RandomStream) else stream
    out, capped = _offspring_sum(law.family, np.array([float(z)]), np.array([law.mean]), gen, float(cap))
    return int(out[0]), bool(capped[0])


def b2_diagnostic(model: EnvironmentModel, replicas: int, stream: RandomStream, b: int = 1,
                  eps: float = 0.5) -> Estimate:
    """Monte Carlo ``E[(log+ gamma(b))^(alpha + eps)]`` over the environment."""
    x = model.driver.sample(stream.generator(), replicas)
    m = np.exp(x)
    second = m + 2 * m * m if model.offspring_family == "geometric" else m + m * m
    head = np.zeros_like(m)
    for k in range(1, b):
        head += k * k * np.array([float(model.law(xi).pmf(k)) for xi in x])
    g = (second - head) / m**2
    vals = np.log(np.maximum(g, 1.0)) ** (model.driver.alpha + eps)
    mom = Moments.of(vals)
    return Estimate(float(mom.mean), float(mom.stderr), replicas, stream.seed)


def quenched_mean_check(model: EnvironmentModel, n: int, environments: int, runs: int,
                        stream: RandomStream, cap: int = DEFAULT_CAP):
    """Average ``Z_n`` over ``runs`` populations in each of ``environments`` fixed environments.

    Returns ``(mean, stderr, exp_S_n)`` arrays, one entry per environment.
    """
    gen = stream.generator()
    means, errs, targets = [], [], []
    for _ in range(environments):
        x = model.driver.sample(gen, n)
        z = np.ones(runs)
        for xk in x:
            z, _ = _offspring_sum(model.offspring_family, z, np.full(runs, math.exp(xk)), gen, float(cap))
        mom = Moments.of(z)
        means.append(float(mom.mean))
        errs.append(float(mom.stderr))
        targets.append(math.exp(float(np.sum(x))))
    return np.array(means), np.array(errs), np.array(targets)


# --- joint environment/population simulation -----------------------------

def _bpre_kernel(gen, size, model, checkpoints, K, J_list, cap, q):
    """Columns per checkpoint (replica means):

    alive, alive & S_n<=K, per J the bucket masses (left, mid, right) of that
    event followed by their quenched counterparts, e^{S_tau} 1{S_n<=K},
    capped & alive, alive & S_n<0, quenched P(Z_n>0|env) (geometric only)
    and the same restricted to S_n<=K.
    """
    fam = model.offspring_family
    s = np.zeros(size)
    m0 = np.zeros(size)
    tau = np.zeros(size, dtype=np.int64)
    log_inv = np.zeros(size)  # log sum_{k<=t} e^{-S_k}
    z = np.full(size, float(q))
    capped = np.zeros(size, dtype=bool)
    out = []
    t = 0
    for cp in checkpoints:
        while t < cp:
            x = model.driver.sample(gen, size)
            s = s + x
            t += 1
            better = s < m0
            m0 = np.where(better, s, m0)
            tau = np.where(better, t, tau)
            log_inv = np.logaddexp(log_inv, -s)
            z, cap_now = _offspring_sum(fam, z, np.exp(x), gen, float(cap))
            capped |= cap_now
        alive = z > 0
        low = s <= K
        event = alive & low
        quenched = np.exp(-log_inv) if fam == "geometric" else np.zeros(size)
        cols = [alive, event]
        for J in J_list:
            parts = [tau <= J, (tau > J) & (tau <= cp - J), tau > cp - J]
            cols += [event & b for b in parts] + [quenched * low * b for b in parts]
        cols += [np.exp(m0) * low, capped & alive, alive & (s < 0), quenched, quenched * low]
        out.append(Moments.of(np.column_stack([np.asarray(c, dtype=float) for c in cols])))
    return out


@dataclass
class SurvivalReport:
    """``P(Z_n > 0, S_n <= K)`` over an ``n`` grid with tau-bucket attribution."""

    n_grid: list[int]
    K: float
    J: int
    raw: list[Estimate]
    normalized: list[float]
    bucket_left: list[float]
    bucket_mid: list[float]
    bucket_right: list[float]
    capped_frac: list[float]
    bound: list[Estimate]
    quenched: list[Estimate | None]
    quenched_buckets: list[tuple[Estimate, Estimate, Estimate] | None]
    seed: int = 0

    HEADER = ["n", "K", "J", "raw", "raw_stderr", "normalized", "bucket_left", "bucket_mid", "bucket_right",
              "capped_frac", "replicas", "seed"]

    def __post_init__(self):
        for i in range(len(self.n_grid)):
            total = self.bucket_left[i] + self.bucket_mid[i] + self.bucket_right[i]
            if not math.isclose(total, self.raw[i].value, rel_tol=1e-12, abs_tol=1e-15):
                raise AssertionError("tau buckets must partition the survival event")

    def mid_fraction(self, i: int = -1) -> float:
        return self.bucket_mid[i] / self.raw[i].value if self.raw[i].value else math.nan

    def quenched_mid_fraction(self, i: int = -1) -> float:
        """Middle-bucket share from the quenched survival probabilities (geometric link only)."""
        qb, q = self.quenched_buckets[i], self.quenched[i]
        if qb is None or not q.value:
            return math.nan
        return qb[1].value / q.value

    def rows(self):
        for i, n in enumerate(self.n_grid):
            e = self.raw[i]
            yield [n, repr(float(self.K)), self.J, repr(e.value), repr(e.stderr), repr(float(self.normalized[i])),
                   repr(float(self.bucket_left[i])), repr(float(self.bucket_mid[i])),
                   repr(float(self.bucket_right[i])), repr(float(self.capped_frac[i])), e.replicas, self.seed]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(self.HEADER)
            wr.writerows(self.rows())


def _run_bpre(model, n_grid, K, J_list, replicas, stream, cap, workers, chunk, q=1):
    cps = sorted(int(n) for n in n_grid)
    if not cps or cps[0] < 1:
        raise ValueError("n_grid must hold positive horizons")
    parts = run_chunks(_bpre_kernel, stream, replicas, (model, cps, float(K), tuple(J_list), cap, q),
                       chunk=chunk, workers=workers)
    return cps, [Moments.merge(p[k] for p in parts) for k in range(len(cps))]


def survival_constrained(model: EnvironmentModel, n_grid, K: float, replicas: int, J: int | Sequence[int],
                         stream: RandomStream, cap: int = DEFAULT_CAP, workers=None,
                         chunk: int = DEFAULT_CHUNK):
    """Frequency of ``{Z_n > 0, S_n <= K}`` with tau_n buckets ``[0,J]``, ``(J,n-J]``, ``(n-J,n]``.

    ``J`` may be a sequence; one report per ``J`` is returned then (same
    replicas).  ``normalized`` divides by ``b_n`` of the driver.
    """
    J_list = [int(J)] if np.isscalar(J) else [int(j) for j in J]
    n_list = [int(n)] if np.isscalar(n_grid) else list(n_grid)
    for n in n_list:
        for j in J_list:
            if n <= 2 * j:
                raise ValueError(f"need n > 2J, got n={n}, J={j}")
    cps, moms = _run_bpre(model, n_list, K, J_list, replicas, stream, cap, workers, chunk)
    nJ = len(J_list)
    reports = []
    for ji, j in enumerate(J_list):
        raw, norm, bl, bm, br, capf, bound, quen, qb = [], [], [], [], [], [], [], [], []
        for n, mom in zip(cps, moms):
            mean, se = mom.mean, mom.stderr
            raw.append(Estimate(float(mean[1]), float(se[1]), mom.count, stream.seed))
            norm.append(float(mean[1]) / model.driver.scaling.b(n))
            base = 2 + 6 * ji
            bl.append(float(mom.total[base]) / mom.count)
            bm.append(float(mom.total[base + 1]) / mom.count)
            br.append(float(mom.total[base + 2]) / mom.count)
            qb.append(tuple(Estimate(float(mean[base + 3 + i]), float(se[base + 3 + i]), mom.count, stream.seed)
                            for i in range(3)) if model.offspring_family == "geometric" else None)
            k = 2 + 6 * nJ
            bound.append(Estimate(float(mean[k]), float(se[k]), mom.count, stream.seed))
            capf.append(float(mean[k + 1]))
            quen.append(Estimate(float(mean[k + 4]), float(se[k + 4]), mom.count, stream.seed)
                        if model.offspring_family == "geometric" else None)
        reports.append(SurvivalReport(cps, float(K), j, raw, norm, bl, bm, br, capf, bound, quen, qb, stream.seed))
    return reports[0] if np.isscalar(J) else reports


@dataclass
class UnconstrainedSurvival:
    n_grid: list[int]
    survival: list[Estimate]
    negative_fraction: list[float]
    quenched: list[Estimate | None]

    def slope(self) -> float:
        """Least-squares slope of log survival against log n."""
        return float(np.polyfit(np.log(self.n_grid), np.log([e.value for e in self.survival]), 1)[0])


def survival_unconstrained(model: EnvironmentModel, n, replicas: int, stream: RandomStream,
                           cap: int = DEFAULT_CAP, workers=None, chunk: int = DEFAULT_CHUNK):
    """``P(Z_n > 0)``.  A scalar ``n`` gives an :class:`Estimate`; a grid gives nested estimates."""
    n_list = [int(n)] if np.isscalar(n) else list(n)
    cps, moms = _run_bpre(model, n_list, math.inf, [0], replicas, stream, cap, workers, chunk)
    surv, neg, quen = [], [], []
    for mom in moms:
        surv.append(Estimate(float(mom.mean[0]), float(mom.stderr[0]), mom.count, stream.seed))
        neg.append(float(mom.mean[-3] / mom.mean[0]) if mom.mean[0] else math.nan)
        quen.append(Estimate(float(mom.mean[-2]), float(mom.stderr[-2]), mom.count, stream.seed)
                    if model.offspring_family == "geometric" else None)
    if np.isscalar(n):
        return surv[0]
    return UnconstrainedSurvival(cps, surv, neg, quen)


# --- conditioned measures -------------------------------------------------

@dataclass
class PathBatch:
    """Explicit paths for h-transform functionals: ``S[:, k] = x + X_1 + ... + X_k``."""

    start: float
    increments: np.ndarray

    @property
    def S(self) -> np.ndarray:
        return self.start + np.concatenate([np.zeros((self.increments.shape[0], 1)),
                                            np.cumsum(self.increments, axis=1)], axis=1)


@dataclass(frozen=True)
class ConstantOne:
    def __call__(self, paths: PathBatch, gen) -> np.ndarray:
        return np.ones(paths.increments.shape[0])


@dataclass(frozen=True)
class EmbeddedSurvival:
    """``1{Z_n > 0}`` for a BPRE started from ``q`` particles in the path's environment."""

    family: str = "geometric"
    q: int = 1
    cap: int = DEFAULT_CAP

    def __call__(self, paths: PathBatch, gen) -> np.ndarray:
        z = np.full(paths.increments.shape[0], float(self.q))
        for k in range(paths.increments.shape[1]):
            z, _ = _offspring_sum(self.family, z, np.exp(paths.increments[:, k]), gen, float(self.cap))
        return (z > 0).astype(float)


def _measure_kernel(gen, size, driver, g, x, n, table, sign):
    incr = driver.sample(gen, (size, n))
    paths = PathBatch(x, incr)
    s = paths.S
    if sign > 0:
        ok = s[:, 1:].min(axis=1) >= 0
        w = np.where(ok, table(np.maximum(s[:, -1], 0.0)), 0.0) / table(x)
    else:
        ok = s[:, 1:].max(axis=1) < 0
        w = np.where(ok, table(np.abs(np.minimum(s[:, -1], 0.0))), 0.0) / table(abs(x))
    return Moments.of(w * g(paths, gen))


def _measure(driver, g, x, n, replicas, table, stream, sign, workers, chunk):
    if n < 1:
        raise ValueError("n must be >= 1")
    table._require_tail()
    mom = Moments.merge(run_chunks(_measure_kernel, stream, replicas, (driver, g, float(x), int(n), table, sign),
                                   chunk=chunk, workers=workers))
    return Estimate(float(mom.mean), float(mom.stderr), mom.count, stream.seed)


def plus_measure_expectation(driver: IncrementModel, g, x: float, n: int, replicas: int,
                             U_table: RenewalTable, stream: RandomStream, workers=None,
                             chunk: int = 1 << 14) -> Estimate:
    """``E_x^+[g] = E_x[g U(S_n); L_n >= 0] / U(x)`` for ``x >= 0``."""
    if x < 0:
        raise ValueError("P+ starts from x >= 0")
    if U_table.which != "U":
        raise ValueError("plus measure needs a U-table")
    return _measure(driver, g, x, n, replicas, U_table, stream, +1, workers, chunk)


def minus_measure_expectation(driver: IncrementModel, g, x: float, n: int, replicas: int,
                              V_table: RenewalTable, stream: RandomStream, workers=None,
                              chunk: int = 1 << 14) -> Estimate:
    """``E_x^-[g] = E_x[g V(S_n); M_n < 0] / V(x)`` for ``x <= 0`` (``V(-0) = 1`` at the origin)."""
    if x > 0:
        raise ValueError("P- starts from x <= 0")
    if V_table.which != "V":
        raise ValueError("minus measure needs a V-table")
    return _measure(driver, g, x, n, replicas, V_table, stream, -1, workers, chunk)


@dataclass
class WTrack:
    checkpoints: list[int]
    means: list[Estimate]
    positive_frac: Estimate
    threshold: float

    def __iter__(self):
        return iter(self.means)

    def __len__(self):
        return len(self.means)


def _w_kernel(gen, size, model, x, ks, table, threshold, cap):
    fam = model.offspring_family
    s = np.full(size, x)
    ok = np.ones(size, dtype=bool)
    z = np.ones(size)
    ux = table(x)
    cols = {}
    t = 0
    for k in sorted(set(ks)):
        while t < k:
            inc = model.driver.sample(gen, size)
            s = s + inc
            ok &= s >= 0
            z, _ = _offspring_sum(fam, z, np.exp(inc), gen, float(cap))
            t += 1
        w = np.where(ok, table(np.maximum(s, 0.0)), 0.0) / ux
        W = z * np.exp(-(s - x))
        cols[k] = (w * W, w * (W > threshold))
    last = max(ks)
    return Moments.of(np.column_stack([cols[k][0] for k in ks] + [cols[last][1]]))


def martingale_W_track(model: EnvironmentModel, x: float, checkpoints: Sequence[int], replicas: int,
                       U_table: RenewalTable, stream: RandomStream, threshold: float = 1e-3,
                       cap: int = DEFAULT_CAP, workers=None, chunk: int = DEFAULT_CHUNK) -> WTrack:
    """``E_x^+[W_j]`` at each checkpoint ``j`` with ``W_j = Z_[j/2] exp(-(S_[j/2] - x))``.

    The walk offset ``x`` is removed so ``W`` starts at ``Z_0 = 1``.  Also
    reports ``P_x^+(W > threshold)`` at the last checkpoint.
    """
    cps = list(checkpoints)
    if cps != sorted(cps) or len(set(cps)) != len(cps):
        raise ValueError("checkpoints must be strictly increasing")
    if x < 0:
        raise ValueError("P+ starts from x >= 0")
    U_table._require_tail()
    ks = [j // 2 for j in cps]
    mom = Moments.merge(run_chunks(_w_kernel, stream, replicas,
                                   (model, float(x), tuple(ks), U_table, threshold, cap),
                                   chunk=chunk, workers=workers))
    means = [Estimate(float(mom.mean[i]), float(mom.stderr[i]), mom.count, stream.seed) for i in range(len(cps))]
    frac = Estimate(float(mom.mean[-1]), float(mom.stderr[-1]), mom.count, stream.seed)
    return WTrack(cps, means, frac, threshold)
