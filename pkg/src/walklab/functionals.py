"""Monte Carlo functionals of walks under extreme constraints and their asymptotics.

Every left-hand side is the replica mean of a bounded path integrand
evaluated on :class:`~walklab.walk.BatchSummary` snapshots, so one batch of
walks can feed all of them at once (:func:`lhs_panel`).  Right-hand sides
are plug-in products of ``g(0)``, ``b_n`` and integrals of renewal tables.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import stable
from .parallel import DEFAULT_CHUNK, run_chunks
from .renewal import ExpDecay, RenewalTable, integral_against_table
from .rng import RandomStream
from .stats import Estimate, Moments
from .walk import BatchSummary, IncrementModel, summarize_batch

__all__ = [
    "ConstraintSpec",
    "Estimate",
    "RatioReport",
    "BudgetRefused",
    "Functional",
    "Theorem1",
    "Theorem2",
    "CorollaryVatVat",
    "Theorem3",
    "Theorem4",
    "MaxSmall",
    "ConditionedProb",
    "StayNonneg",
    "StayNeg",
    "MinExp",
    "lhs_panel",
    "lhs_theorem1",
    "lhs_theorem2",
    "lhs_corollary_vatvat",
    "lhs_theorem3",
    "lhs_theorem4",
    "lhs_maxsmall",
    "conditioned_prob",
    "rhs_theorem1",
    "rhs_theorem2",
    "rhs_corollary_vatvat",
    "rhs_theorem3",
    "rhs_theorem4",
    "rhs_maxsmall",
    "rhs_integvw",
    "duality_pathwise",
    "pilot_replicas",
    "run_ratio_experiment",
    "ratio_reports",
    "MAX_REPLICAS",
]

MAX_REPLICAS = 10**9


class BudgetRefused(RuntimeError):
    """The pilot run says the requested precision needs too many replicas."""

    def __init__(self, message, needed=None, pilot=None):
        super().__init__(message)
        self.needed = needed
        self.pilot = pilot


# --- constraints ---------------------------------------------------------

_KINDS = ("phi", "psi", "K")
_FAMILIES = ("power", "log_power", "constant")


@dataclass(frozen=True)
class ConstraintSpec:
    """A threshold sequence: ``phi(n) -> +inf``, ``psi(n) -> -inf`` or fixed ``K``.

    ``family`` is ``power`` (``n**p``), ``log_power`` (``log(n)**p``) or
    ``constant``.  Power families must satisfy ``p < 1/alpha`` so that the
    threshold is ``o(a_n)``.
    """

    kind: str
    family: str
    param: float
    alpha: float = 2.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"constraint kind must be one of {_KINDS}")
        if self.family not in _FAMILIES:
            raise ValueError(f"constraint family must be one of {_FAMILIES}")
        if (self.kind == "K") != (self.family == "constant"):
            raise ValueError("fixed K uses the constant family and only it")
        if self.family in ("power", "log_power") and not self.param > 0:
            raise ValueError("growth exponent must be > 0")
        if self.family == "power" and self.param >= 1.0 / self.alpha:
            raise ValueError(f"n^{self.param} is not o(a_n) for alpha={self.alpha}: need exponent < {1 / self.alpha:.4g}")

    @classmethod
    def phi(cls, family="power", param=None, alpha=2.0):
        return cls("phi", family, _default_param(family, param, alpha), alpha)

    @classmethod
    def psi(cls, family="power", param=None, alpha=2.0):
        return cls("psi", family, _default_param(family, param, alpha), alpha)

    @classmethod
    def fixed(cls, K):
        return cls("K", "constant", float(K))

    def value(self, n: int) -> float:
        if self.family == "constant":
            return self.param
        mag = n**self.param if self.family == "power" else math.log(n) ** self.param
        return mag if self.kind == "phi" else -mag

    def describe(self) -> str:
        if self.family == "constant":
            return f"K={self.param!r}"
        sign = "" if self.kind == "phi" else "-"
        body = f"n^{self.param!r}" if self.family == "power" else f"log(n)^{self.param!r}"
        return f"{self.kind}={sign}{body}"


def _default_param(family, param, alpha):
    if param is not None:
        return float(param)
    if family == "power":
        return min(0.3, 0.8 / alpha)
    return 2.0


def _require(constraint: ConstraintSpec, kind: str):
    if constraint.kind != kind:
        raise ValueError(f"expected a {kind}-constraint, got {constraint.kind}")


# --- path integrands -----------------------------------------------------

class Functional:
    """Bounded per-replica integrand evaluated on a batch snapshot."""

    name = "functional"

    def values(self, b: BatchSummary) -> np.ndarray:
        raise NotImplementedError


def _masked_exp(arg, mask):
    # exponentiate only where the indicator holds; avoids inf * 0 on heavy tails
    return np.exp(np.where(mask, arg, -np.inf))


def _min_exp(theta, b):
    if np.any(b.S_tau > 0):
        raise AssertionError("S_tau must be <= 0 on every replica")
    return np.exp(theta * b.S_tau)


@dataclass(frozen=True)
class Theorem1(Functional):
    theta: float
    constraint: ConstraintSpec
    name = "theorem1"

    def values(self, b):
        return _min_exp(self.theta, b) * (b.S <= self.constraint.value(b.n))


@dataclass(frozen=True)
class Theorem2(Functional):
    """``E_x[e^{theta S_n}; S_n <= psi(n), M_n < 0]`` via the shift ``S -> x + S``."""

    theta: float
    x: float
    constraint: ConstraintSpec
    name = "theorem2"

    def values(self, b):
        s = self.x + b.S
        return _masked_exp(self.theta * s, (s <= self.constraint.value(b.n)) & (self.x + b.M < 0))


@dataclass(frozen=True)
class CorollaryVatVat(Functional):
    theta: float
    constraint: ConstraintSpec
    name = "corollary_vatvat"

    def values(self, b):
        return _masked_exp(self.theta * b.S, (b.S <= self.constraint.value(b.n)) & (b.tau == b.n))


@dataclass(frozen=True)
class Theorem3(Functional):
    theta: float
    constraint: ConstraintSpec
    name = "theorem3"

    def values(self, b):
        return _min_exp(self.theta, b) * (b.S <= self.constraint.value(b.n))


@dataclass(frozen=True)
class Theorem4(Functional):
    theta: float
    K: float
    name = "theorem4"

    def values(self, b):
        return _min_exp(self.theta, b) * (b.S <= self.K)


@dataclass(frozen=True)
class MinExp(Functional):
    """``e^{theta S_tau}`` with no constraint on ``S_n``."""

    theta: float
    name = "min_exp"

    def values(self, b):
        return _min_exp(self.theta, b)


@dataclass(frozen=True)
class MaxSmall(Functional):
    theta: float
    x: float
    name = "maxsmall"

    def values(self, b):
        return _masked_exp(self.theta * (self.x + b.S), self.x + b.M < 0)


@dataclass(frozen=True)
class ConditionedProb(Functional):
    """Indicator of ``{S_n <= x, L_n >= 0}``; ``x`` may be a phi-constraint."""

    x: float | ConstraintSpec
    name = "integvw"

    def upper(self, n):
        return self.x.value(n) if isinstance(self.x, ConstraintSpec) else float(self.x)

    def values(self, b):
        return ((b.S <= self.upper(b.n)) & (b.L >= 0)).astype(float)


@dataclass(frozen=True)
class StayNonneg(Functional):
    name = "stay_nonneg"

    def values(self, b):
        return (b.L >= 0).astype(float)


@dataclass(frozen=True)
class StayNeg(Functional):
    name = "stay_neg"

    def values(self, b):
        return (b.M < 0).astype(float)


def _panel_kernel(gen, size, model, n_grid, functionals, block):
    snaps = summarize_batch(model, n_grid, size, gen, block=block)
    cols = [np.column_stack([f.values(snaps[n]) for f in functionals]) for n in n_grid]
    return [Moments.of(c) for c in cols]


def lhs_panel(model: IncrementModel, functionals: Sequence[Functional], n_grid: Sequence[int],
              replicas: int, stream: RandomStream, workers: int | None = None,
              chunk: int = DEFAULT_CHUNK, block: int = 64) -> dict[tuple[int, int], Estimate]:
    """Estimate every functional at every horizon from one shared batch.

    Returns a mapping ``(functional index, n) -> Estimate``.  Horizons are
    checkpoints of the same walks, so estimates at different ``n`` share
    replicas.
    """
    n_grid = sorted(int(n) for n in n_grid)
    if not n_grid:
        raise ValueError("empty n_grid")
    functionals = tuple(functionals)
    parts = run_chunks(_panel_kernel, stream, replicas, (model, n_grid, functionals, block),
                       chunk=chunk, workers=workers)
    out = {}
    for k, n in enumerate(n_grid):
        mom = Moments.merge(p[k] for p in parts)
        for i in range(len(functionals)):
            out[(i, n)] = Estimate(float(mom.mean[i]), float(mom.stderr[i]), mom.count, stream.seed)
    return out


def _single(model, functional, n, replicas, stream, workers):
    if n < 1:
        raise ValueError("n must be >= 1")
    return lhs_panel(model, [functional], [n], replicas, stream, workers)[(0, int(n))]


def lhs_theorem1(model, theta, constraint, n, replicas, stream, workers=None) -> Estimate:
    """``E[e^{theta S_tau}; S_n <= phi(n)]``."""
    _require(constraint, "phi")
    return _single(model, Theorem1(float(theta), constraint), n, replicas, stream, workers)


def lhs_theorem2(model, theta, x, constraint, n, replicas, stream, workers=None) -> Estimate:
    """``E_x[e^{theta S_n}; S_n <= psi(n), M_n < 0]`` for a start ``x <= 0``."""
    if x > 0:
        raise ValueError("start x must be <= 0")
    _require(constraint, "psi")
    return _single(model, Theorem2(float(theta), float(x), constraint), n, replicas, stream, workers)


def lhs_corollary_vatvat(model, theta, constraint, n, replicas, stream, workers=None) -> Estimate:
    """``E[e^{theta S_n}; S_n <= psi(n), tau_n = n]``."""
    _require(constraint, "psi")
    return _single(model, CorollaryVatVat(float(theta), constraint), n, replicas, stream, workers)


def lhs_theorem3(model, theta, constraint, n, replicas, stream, workers=None) -> Estimate:
    """``E[e^{theta S_tau}; S_n <= psi(n)]``."""
    _require(constraint, "psi")
    return _single(model, Theorem3(float(theta), constraint), n, replicas, stream, workers)


def lhs_theorem4(model, theta, K, n, replicas, stream, workers=None) -> Estimate:
    """``E[e^{theta S_tau}; S_n <= K]`` for fixed ``K``."""
    return _single(model, Theorem4(float(theta), float(K)), n, replicas, stream, workers)


def lhs_maxsmall(model, theta, x, n, replicas, stream, workers=None) -> Estimate:
    """``E_x[e^{theta S_n}; M_n < 0]`` for ``x <= 0``."""
    if x > 0:
        raise ValueError("start x must be <= 0")
    return _single(model, MaxSmall(float(theta), float(x)), n, replicas, stream, workers)


def conditioned_prob(model, n, x_upper, replicas, stream, workers=None) -> Estimate:
    """``P(S_n <= x_upper, L_n >= 0)``."""
    if not (isinstance(x_upper, ConstraintSpec) or x_upper > 0):
        raise ValueError("x_upper must be > 0")
    return _single(model, ConditionedProb(x_upper), n, replicas, stream, workers)


# --- asymptotic right-hand sides ----------------------------------------

def _g0(model: IncrementModel, mirrored: bool = False) -> float:
    p = model.attraction
    return stable.density_at_zero(p.mirrored() if mirrored else p)


def _with_error(fn, tables):
    """Value of ``fn(*tables)`` and a bound from shifting each table by one stderr."""
    base = fn(*tables)
    err = 0.0
    for i, t in enumerate(tables):
        if t is None or not np.any(t.stderr):
            continue
        shifted = list(tables)
        dev = 0.0
        for sign in (1.0, -1.0):
            shifted[i] = replace(t, values=np.maximum(t.values + sign * t.stderr, 0.0),
                                 tail_fit=_scaled_fit(t, sign))
            dev = max(dev, abs(fn(*shifted) - base))
        err += dev
    return base, err


def _scaled_fit(t, sign):
    if t.tail_fit is None:
        return None
    kappa, coef = t.tail_fit
    return kappa, coef * (1.0 + sign * t.stderr[-1] / t.values[-1])


def _rhs1(model, theta, phi, n, U, V):
    iu, _ = integral_against_table(U, ExpDecay(theta))
    iv, _ = integral_against_table(V, None, phi)
    return theta * _g0(model) * model.scaling.b(n) * iv * iu


def rhs_theorem1(model, theta, constraint, n, U_table, V_table, with_error=False):
    """``theta g(0) b_n int_0^phi V(-w) dw int_0^inf e^{-theta z} U(z) dz``."""
    _require(constraint, "phi")
    phi = constraint.value(n)
    out = _with_error(lambda U, V: _rhs1(model, theta, phi, n, U, V), (U_table, V_table))
    return out if with_error else out[0]


def _rhs2(model, theta, x, psi, n, U, V):
    return (_g0(model, mirrored=True) * model.scaling.b(n) * V(abs(x)) * U(-psi)
            * math.exp(theta * psi) / theta)


def rhs_theorem2(model, theta, x, constraint, n, U_table, V_table, with_error=False):
    """``g_{alpha,-beta}(0) b_n V(x) U(-psi) e^{theta psi} / theta``.

    ``V(x)`` at ``x = 0`` is read as ``V(-0) = 1``.
    """
    if x > 0:
        raise ValueError("start x must be <= 0")
    _require(constraint, "psi")
    psi = constraint.value(n)
    out = _with_error(lambda U, V: _rhs2(model, theta, x, psi, n, U, V), (U_table, V_table))
    return out if with_error else out[0]


def rhs_corollary_vatvat(model, theta, constraint, n, U_table, with_error=False):
    """``g_{alpha,-beta}(0) b_n U(-psi) e^{theta psi} / theta``."""
    _require(constraint, "psi")
    psi = constraint.value(n)
    out = _with_error(lambda U: _g0(model, True) * model.scaling.b(n) * U(-psi) * math.exp(theta * psi) / theta,
                      (U_table,))
    return out if with_error else out[0]


def _rhs3(model, theta, psi, n, U, V0):
    iv, _ = integral_against_table(V0, ExpDecay(theta))
    return _g0(model, True) * model.scaling.b(n) * U(-psi) * math.exp(theta * psi) * iv


def rhs_theorem3(model, theta, constraint, n, U_table, V0_table, with_error=False):
    """``g_{alpha,-beta}(0) b_n U(-psi) e^{theta psi} int_0^inf e^{-theta z} V0(-z) dz``."""
    _require(constraint, "psi")
    psi = constraint.value(n)
    out = _with_error(lambda U, V0: _rhs3(model, theta, psi, n, U, V0), (U_table, V0_table))
    return out if with_error else out[0]


def _antiderivative(table: RenewalTable, ys: np.ndarray, step: float = 0.01) -> np.ndarray:
    """``int_0^y table(w) dw`` for each ``y`` (fine trapezoid over the interpolant)."""
    top = float(np.max(ys)) if ys.size else 0.0
    fine = np.union1d(np.arange(0.0, top + step, step), table.grid[table.grid <= top + step])
    vals = table(fine)
    cum = np.concatenate(([0.0], np.cumsum(np.diff(fine) * (vals[1:] + vals[:-1]) / 2)))
    return np.interp(ys, fine, cum)


def _rhs4_constant(model, theta, K, U, V, V0, step=0.02, span=40.0):
    z0 = max(-K, 0.0)
    z = np.arange(z0, z0 + span / theta + step, step)
    mid = (z[1:] + z[:-1]) / 2
    du = np.diff(U(z))
    # Stieltjes part over U(dz) on z >= z0, with the unit atom of U at 0
    first = np.sum(np.exp(-theta * mid) * _antiderivative(V, K + mid) * du)
    if K >= 0:
        first += U(0.0) * float(_antiderivative(V, np.array([K]))[0])
    # ordinary part: V0 evaluated at -(K - x) = -(K + z)
    f = np.exp(-theta * z) * U(z) * V0(K + z)
    second = float(np.sum((f[1:] + f[:-1]) / 2 * np.diff(z)))
    return _g0(model) * first + _g0(model, True) * second


def rhs_theorem4(model, theta, K, U_table, V_table, V0_table, n=None, with_error=False):
    """Limit of ``E[e^{theta S_tau}; S_n <= K] / b_n``; times ``b_n`` when ``n`` is given.

    First term: Stieltjes sum against ``U(-dx)`` for ``x <= min(K, 0)``,
    including the unit atom at ``x = 0`` when ``K >= 0``.  Second term:
    ``int e^{theta x} U(-x) V0(-(K - x)) dx``, where the second renewal
    factor sums ``P(S_t <= K - x, L_t >= 0)`` over ``t >= 0``.
    """
    if U_table.grid[1] - U_table.grid[0] > 0.25 + 1e-12:
        raise ValueError("U-table grid step near 0 must be <= 0.25 for the Stieltjes sum")
    scale = 1.0 if n is None else model.scaling.b(n)
    out = _with_error(lambda U, V, V0: scale * _rhs4_constant(model, theta, float(K), U, V, V0),
                      (U_table, V_table, V0_table))
    return out if with_error else out[0]


def rhs_maxsmall(model, theta, x, n, U_table, V_table, with_error=False):
    """``g(0) b_n V(x) int_0^inf e^{-theta z} U(z) dz``."""
    if x > 0:
        raise ValueError("start x must be <= 0")

    def f(U, V):
        iu, _ = integral_against_table(U, ExpDecay(theta))
        return _g0(model) * model.scaling.b(n) * V(abs(x)) * iu

    out = _with_error(f, (U_table, V_table))
    return out if with_error else out[0]


def rhs_integvw(model, n, x_upper, V_table, with_error=False):
    """``g(0) b_n int_0^x V(-w) dw``."""
    x = x_upper.value(n) if isinstance(x_upper, ConstraintSpec) else float(x_upper)
    out = _with_error(lambda V: _g0(model) * model.scaling.b(n) * integral_against_table(V, None, x)[0], (V_table,))
    return out if with_error else out[0]


# --- duality ---------------------------------------------------------------

def duality_pathwise(increments: np.ndarray, theta: float, psi: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-replica integrands of the ``{tau_n = n}`` and reversed ``{M_n < 0}`` estimators.

    Row ``i`` of ``increments`` is one path.  The first array is
    ``e^{theta S_n} 1{S_n <= psi, tau_n = n}`` on the path, the second is
    ``e^{theta S'_n} 1{S'_n <= psi, M'_n < 0}`` on the reversed path.  Partial
    sums are formed with ``math.fsum`` (exactly rounded), so both sides see
    the same real numbers and must agree exactly.
    """
    x = np.asarray(increments, dtype=float)
    if x.ndim != 2:
        raise ValueError("increments must be (replicas, n)")
    reps, n = x.shape
    a = np.zeros(reps)
    b = np.zeros(reps)
    for i in range(reps):
        row = x[i].tolist()
        rev = row[::-1]
        s_n = math.fsum(row)
        # tau_n = n  <=>  S_n < S_j for all j < n  <=>  sum(X_{j+1..n}) < 0
        tau_end = all(math.fsum(row[j:]) < 0 for j in range(n))
        # M'_n < 0  <=>  every prefix of the reversed path is negative
        max_neg = all(math.fsum(rev[:k]) < 0 for k in range(1, n + 1))
        s_rev = math.fsum(rev)
        a[i] = math.exp(theta * s_n) if (tau_end and s_n <= psi) else 0.0
        b[i] = math.exp(theta * s_rev) if (max_neg and s_rev <= psi) else 0.0
    return a, b


# --- budgets and reports --------------------------------------------------

def pilot_replicas(model, functional: Functional, n: int, target_rel: float, stream: RandomStream,
                   pilot: int = 1 << 16, workers=None, cap: int = MAX_REPLICAS) -> int:
    """Replicas needed for relative stderr ``target_rel``, from a pilot batch.

    Raises :class:`BudgetRefused` when the need exceeds ``cap`` (or the pilot
    sees no mass at all).
    """
    est = _single(model, functional, n, pilot, stream.child("pilot"), workers)
    if est.value <= 0:
        raise BudgetRefused(f"pilot of {pilot} replicas saw no mass for {functional.name} at n={n}",
                            needed=math.inf, pilot=est)
    needed = math.ceil(pilot * (est.rel_stderr / target_rel) ** 2)
    if needed > cap:
        raise BudgetRefused(
            f"{functional.name} at n={n}: pilot rel. stderr {est.rel_stderr:.3g} from {pilot} replicas "
            f"implies {needed:.3g} replicas for {target_rel:.3g} (cap {cap:.0e})", needed=needed, pilot=est)
    return max(needed, pilot)


@dataclass
class RatioReport:
    """LHS estimates against RHS asymptotics over an ``n`` grid."""

    theorem: str
    n_grid: list[int]
    lhs: list[Estimate]
    rhs: list[float]
    rhs_err: list[float] = field(default_factory=list)
    theta: float = float("nan")
    constraint_desc: str = ""
    seed: int = 0

    def __post_init__(self):
        if not (len(self.n_grid) == len(self.lhs) == len(self.rhs)):
            raise ValueError("n_grid, lhs and rhs lengths differ")
        if any(r <= 0 for r in self.rhs):
            raise ValueError("rhs must be positive")
        if not self.rhs_err:
            self.rhs_err = [0.0] * len(self.rhs)

    @property
    def ratio(self) -> list[float]:
        return [e.value / r for e, r in zip(self.lhs, self.rhs)]

    @property
    def ratio_stderr(self) -> list[float]:
        out = []
        for e, r, re in zip(self.lhs, self.rhs, self.rhs_err):
            q = e.value / r
            out.append(abs(q) * math.hypot(e.stderr / e.value if e.value else 0.0, re / r))
        return out

    def approaches_one(self, k: float = 2.0) -> bool:
        """``|ratio - 1|`` is non-increasing along ``n`` up to ``k`` combined stderr."""
        r, s = self.ratio, self.ratio_stderr
        return all(abs(r[i + 1] - 1) <= abs(r[i] - 1) + k * math.hypot(s[i], s[i + 1])
                   for i in range(len(r) - 1))

    def rows(self):
        for n, e, rh, q, qs in zip(self.n_grid, self.lhs, self.rhs, self.ratio, self.ratio_stderr):
            yield [self.theorem, n, repr(float(self.theta)), self.constraint_desc, repr(e.value), repr(e.stderr),
                   repr(float(rh)), repr(float(q)), repr(float(qs)), e.replicas, self.seed]

    HEADER = ["theorem", "n", "theta", "constraint_desc", "lhs", "lhs_stderr", "rhs", "ratio", "ratio_stderr",
              "replicas", "seed"]

    def to_csv(self, path, append: bool = False) -> None:
        write_header = not append
        with open(path, "a" if append else "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            if write_header:
                wr.writerow(self.HEADER)
            wr.writerows(self.rows())


def _rhs_for(theorem, model, p, n, tables):
    U, V, V0 = tables.get("U"), tables.get("V"), tables.get("V0")
    th = p.get("theta", 1.0)
    if theorem == "theorem1":
        return rhs_theorem1(model, th, p["constraint"], n, U, V, with_error=True)
    if theorem == "theorem2":
        return rhs_theorem2(model, th, p.get("x", 0.0), p["constraint"], n, U, V, with_error=True)
    if theorem == "corollary_vatvat":
        return rhs_corollary_vatvat(model, th, p["constraint"], n, U, with_error=True)
    if theorem == "theorem3":
        return rhs_theorem3(model, th, p["constraint"], n, U, V0, with_error=True)
    if theorem == "theorem4":
        return rhs_theorem4(model, th, p["K"], U, V, V0, n=n, with_error=True)
    if theorem == "maxsmall":
        return rhs_maxsmall(model, th, p.get("x", 0.0), n, U, V, with_error=True)
    if theorem == "integvw":
        return rhs_integvw(model, n, p["x_upper"], V, with_error=True)
    raise ValueError(f"unknown theorem id {theorem!r}")


def functional_for(theorem: str, p: dict) -> Functional:
    th = float(p.get("theta", 1.0))
    if theorem == "theorem1":
        _require(p["constraint"], "phi")
        return Theorem1(th, p["constraint"])
    if theorem == "theorem2":
        if p.get("x", 0.0) > 0:
            raise ValueError("start x must be <= 0")
        _require(p["constraint"], "psi")
        return Theorem2(th, float(p.get("x", 0.0)), p["constraint"])
    if theorem == "corollary_vatvat":
        _require(p["constraint"], "psi")
        return CorollaryVatVat(th, p["constraint"])
    if theorem == "theorem3":
        _require(p["constraint"], "psi")
        return Theorem3(th, p["constraint"])
    if theorem == "theorem4":
        return Theorem4(th, float(p["K"]))
    if theorem == "maxsmall":
        return MaxSmall(th, float(p.get("x", 0.0)))
    if theorem == "integvw":
        return ConditionedProb(p["x_upper"])
    raise ValueError(f"unknown theorem id {theorem!r}")


def _describe(theorem, p):
    if theorem == "theorem4":
        return f"K={float(p['K'])!r}"
    if theorem == "maxsmall":
        return f"x={float(p.get('x', 0.0))!r}"
    if theorem == "integvw":
        x = p["x_upper"]
        return x.describe() if isinstance(x, ConstraintSpec) else f"x={float(x)!r}"
    desc = p["constraint"].describe()
    if theorem == "theorem2":
        desc += f";x={float(p.get('x', 0.0))!r}"
    return desc


def ratio_reports(model, experiments: Sequence[tuple[str, dict]], n_grid, replicas: int, tables: dict,
                  stream: RandomStream, workers=None) -> list[RatioReport]:
    """Several ratio experiments evaluated on one shared batch of walks."""
    n_grid = sorted(int(n) for n in n_grid)
    if not n_grid:
        raise ValueError("empty n_grid")
    funcs = [functional_for(t, p) for t, p in experiments]
    est = lhs_panel(model, funcs, n_grid, replicas, stream, workers)
    reports = []
    for i, (t, p) in enumerate(experiments):
        try:
            rhs = [_rhs_for(t, model, p, n, tables) for n in n_grid]
        except Exception as exc:
            raise RuntimeError(f"{t}: right-hand side failed: {exc}") from exc
        reports.append(RatioReport(t, list(n_grid), [est[(i, n)] for n in n_grid], [r[0] for r in rhs],
                                   [r[1] for r in rhs], float(p.get("theta", float("nan"))), _describe(t, p),
                                   stream.seed))
    return reports


def run_ratio_experiment(theorem_id: str, model: IncrementModel, params: dict, n_grid, budget: int,
                         stream: RandomStream, tables: dict | None = None, workers=None) -> RatioReport:
    """LHS/RHS ratios of one theorem over ``n_grid``.

    ``params`` carries ``theta`` and, as needed, ``constraint``, ``x``,
    ``K`` or ``x_upper``.  ``tables`` maps ``"U"``, ``"V"``, ``"V0"`` to
    renewal tables; they are required for every theorem.
    """
    if not list(n_grid):
        raise ValueError("empty n_grid")
    if list(n_grid) != sorted(n_grid):
        raise ValueError("n_grid must be increasing")
    if budget < 1:
        raise ValueError("budget must be positive")
    if tables is None:
        raise ValueError("renewal tables are required")
    return ratio_reports(model, [(theorem_id, params)], n_grid, budget, tables, stream, workers)[0]
