"""Monte Carlo renewal functions U, V and V0.

``U(x) = 1 + sum_n P(S_n >= -x, M_n < 0)`` is one plus the expected number
of visits to ``[-x, 0)`` before the walk first becomes nonnegative.
Symmetrically ``V(-w)`` (resp. ``V0(-w)``) is one plus the expected number
of visits to ``[0, w)`` (resp. ``[0, w]``) before the walk first becomes
negative.  One simulated excursion therefore serves the whole grid.

Excursion lengths have infinite mean, so paths are cut at ``n_max``.  The
missing tail ``sum_{n > n_max}`` behaves like ``n_max^(-1/alpha)``, which
makes it ``1 / (10^(1/alpha) - 1)`` times the count collected over the last
decade of steps ``(n_max/10, n_max]``.  That multiple is added per replica,
so the reported stderr already covers the extrapolated part.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, special

from .parallel import run_chunks
from .rng import RandomStream
from .stats import Moments
from .walk import IncrementModel

__all__ = [
    "RenewalTable",
    "TruncationError",
    "ExpDecay",
    "ZETA",
    "estimate_U",
    "estimate_V",
    "estimate_V0",
    "integral_against_table",
    "fit_tail",
    "RENEWAL_CHUNK",
    "DEFAULT_N_MAX",
]

RENEWAL_CHUNK = 1 << 13
DEFAULT_N_MAX = 100_000
TAIL_EXP_SLACK = 0.15

# P(S_1 = 0) + sum_n P(S_1 > 0, ..., S_{n-1} > 0, S_n = 0) vanishes for the
# absolutely continuous step laws shipped here, so V0(0) = 1 / (1 - ZETA) = 1.
ZETA = 0.0


class TruncationError(RuntimeError):
    """The n_max cut leaves more bias than the table's statistical error."""


@dataclass(frozen=True)
class ExpDecay:
    theta: float

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be > 0")


def fit_tail(grid: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Least-squares power fit ``value ~ A w^kappa`` over the top decade of ``grid``.

    The returned coefficient anchors the curve at the last grid point so
    extrapolation is continuous.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    top = grid[-1]
    sel = (grid >= top / 10.0) & (grid > 0)
    if sel.sum() < 3:
        raise ValueError("need at least 3 positive grid points in the top decade")
    kappa = float(np.polyfit(np.log(grid[sel]), np.log(values[sel]), 1)[0])
    return kappa, float(values[-1] / top**kappa)


@dataclass(frozen=True)
class RenewalTable:
    """Grid table of one renewal function.

    ``grid`` holds magnitudes ``w >= 0``; entry ``i`` is ``U(w_i)`` for
    ``which == "U"`` and ``V(-w_i)`` or ``V0(-w_i)`` otherwise.
    """

    which: str
    grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    replicas: int
    n_max: int
    censor_frac: float = 0.0
    raw_values: np.ndarray | None = None
    truncation_bound: np.ndarray | None = None
    expected_exponent: float | None = None
    tail_fit: tuple[float, float] | None = field(default=None)

    def __post_init__(self):
        if self.which not in ("U", "V", "V0"):
            raise ValueError(f"unknown renewal function {self.which!r}")
        g = np.asarray(self.grid, dtype=float)
        if g.ndim != 1 or g.size < 2 or np.any(np.diff(g) <= 0) or g[0] < 0:
            raise ValueError("grid must be strictly increasing and nonnegative")
        if self.tail_fit is None and np.sum(g >= g[-1] / 10.0) >= 3:
            object.__setattr__(self, "tail_fit", fit_tail(g, self.values))

    @classmethod
    def synthetic(cls, which, grid, values, stderr=None, expected_exponent=None) -> "RenewalTable":
        """Table from known values (tests and plug-in checks)."""
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        se = np.zeros_like(values) if stderr is None else np.asarray(stderr, dtype=float)
        return cls(which, grid, values, se, 1, 0, expected_exponent=expected_exponent)

    @property
    def argument(self) -> np.ndarray:
        """Actual function arguments: ``w`` for U, ``-w`` for V and V0."""
        return self.grid if self.which == "U" else -self.grid

    def tail_exponent_ok(self) -> bool:
        if self.tail_fit is None:
            return False
        if self.expected_exponent is None:
            return True
        return abs(self.tail_fit[0] - self.expected_exponent) <= TAIL_EXP_SLACK

    def _require_tail(self):
        if self.tail_fit is None:
            raise ValueError(f"{self.which}-table has no tail fit")
        if not self.tail_exponent_ok():
            raise ValueError(
                f"{self.which}-table tail exponent {self.tail_fit[0]:.3f} is more than "
                f"{TAIL_EXP_SLACK} from the regular-variation index {self.expected_exponent:.3f}")

    def __call__(self, w):
        """Evaluate at magnitudes ``w >= 0`` (linear inside, power tail outside)."""
        w = np.asarray(w, dtype=float)
        if np.any(w < 0):
            raise ValueError("renewal tables are evaluated at magnitudes w >= 0")
        out = np.interp(w, self.grid, self.values)
        beyond = w > self.grid[-1]
        if np.any(beyond):
            self._require_tail()
            kappa, coef = self.tail_fit
            out = np.where(beyond, coef * np.maximum(w, self.grid[-1]) ** kappa, out)
        return out if out.ndim else float(out)

    def stderr_at(self, w):
        w = np.asarray(w, dtype=float)
        rel = self.stderr[-1] / self.values[-1]
        out = np.where(w > self.grid[-1], rel * self(np.maximum(w, 0)),
                       np.interp(w, self.grid, self.stderr))
        return out if out.ndim else float(out)

    def check_truncation(self, factor: float = 0.25) -> None:
        """Raise if ``factor * extrapolated remainder`` exceeds one stderr anywhere.

        ``factor`` is the assumed relative error of the remainder extrapolation.
        """
        if self.truncation_bound is None:
            return
        bad = factor * self.truncation_bound > np.maximum(self.stderr, 1e-300)
        bad &= self.truncation_bound > 0
        if np.any(bad):
            i = int(np.argmax(bad))
            raise TruncationError(
                f"{self.which}-table: truncation at n_max={self.n_max} leaves bias bound "
                f"{factor * self.truncation_bound[i]:.3g} > stderr {self.stderr[i]:.3g} at w={self.grid[i]}")

    def to_csv(self, path) -> None:
        kappa, coef = self.tail_fit if self.tail_fit else (float("nan"), float("nan"))
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["which", "x", "value", "stderr", "replicas", "n_max", "censor_frac", "tail_exp", "tail_coef"])
            for x, v, s in zip(self.argument, self.values, self.stderr):
                wr.writerow([self.which, repr(float(x) + 0.0), repr(float(v)), repr(float(s)), self.replicas,
                             self.n_max, repr(float(self.censor_frac)), repr(float(kappa)), repr(float(coef))])

    @classmethod
    def from_csv(cls, path) -> "RenewalTable":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: empty table")
        which = rows[0]["which"]
        grid = np.array([abs(float(r["x"])) for r in rows])
        vals = np.array([float(r["value"]) for r in rows])
        se = np.array([float(r["stderr"]) for r in rows])
        kappa, coef = float(rows[0]["tail_exp"]), float(rows[0]["tail_coef"])
        fit = None if math.isnan(kappa) else (kappa, coef)
        return cls(which, grid, vals, se, int(rows[0]["replicas"]), int(rows[0]["n_max"]),
                   float(rows[0]["censor_frac"]), tail_fit=fit)


# --- estimation ----------------------------------------------------------

def _renewal_kernel(gen, size, model, grid, which, n_max):
    g = grid.size
    counts = np.zeros(size * g)
    late = np.zeros(size * g)
    late_from = n_max // 10  # steps k > late_from form the last decade
    alive = np.arange(size)
    s = np.zeros(size)
    t, width = 0, 8
    top = grid[-1]
    while alive.size and t < n_max:
        w = min(width, n_max - t)
        path = s[alive][:, None] + np.cumsum(model.sample(gen, (alive.size, w)), axis=1)
        exited = path >= 0.0 if which == "U" else path < 0.0
        has_exit = exited.any(axis=1)
        first = np.where(has_exit, exited.argmax(axis=1), w)
        before = np.arange(w)[None, :] < first[:, None]
        if which == "U":
            val = -path
            keep = before & (val <= top)
            side = "left"
        else:
            val = path
            keep = before & ((val < top) if which == "V" else (val <= top))
            side = "right" if which == "V" else "left"
        r, j = np.nonzero(keep)
        if r.size:
            idx = np.searchsorted(grid, val[r, j], side=side)
            flat = alive[r] * g + idx
            counts += np.bincount(flat, minlength=size * g)
            lt = (t + 1 + j) > late_from
            if lt.any():
                late += np.bincount(flat[lt], minlength=size * g)
        s[alive] = path[:, -1]
        alive = alive[~has_exit]
        t += w
        width = min(2 * width, 4096)
    counts = np.cumsum(counts.reshape(size, g), axis=1)
    late = np.cumsum(late.reshape(size, g), axis=1)
    kappa = 1.0 / (10.0 ** (1.0 / model.alpha) - 1.0)
    return Moments.of(counts + kappa * late), Moments.of(kappa * late), int(alive.size)


def _estimate(which, model, grid, replicas, n_max, stream, workers, chunk):
    grid = np.asarray(grid, dtype=float)
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be sorted strictly increasing")
    if grid[0] < 0:
        raise ValueError("grid magnitudes must be >= 0")
    if n_max < 10:
        raise ValueError("n_max must be >= 10")
    parts = run_chunks(_renewal_kernel, stream.child("renewal", which), replicas,
                       (model, grid, which, int(n_max)), chunk=chunk, workers=workers)
    main = Moments.merge(p[0] for p in parts)
    tail = Moments.merge(p[1] for p in parts)
    censored = sum(p[2] for p in parts)
    raw = 1.0 + main.mean
    se = main.stderr
    rho = model.rho
    expected = model.alpha * rho if which == "U" else model.alpha * (1.0 - rho)
    iso = optimize.isotonic_regression(raw, weights=1.0 / np.maximum(se, 1e-12) ** 2).x
    return RenewalTable(which, grid, iso, se, int(replicas), int(n_max), censored / replicas,
                        raw_values=raw, truncation_bound=tail.mean, expected_exponent=expected)


def estimate_U(model: IncrementModel, grid, replicas: int, n_max: int = DEFAULT_N_MAX,
               stream: RandomStream | None = None, workers: int | None = None,
               chunk: int = RENEWAL_CHUNK) -> RenewalTable:
    """Estimate ``U(x)`` on ``grid`` (values ``x >= 0``)."""
    return _estimate("U", model, grid, replicas, n_max, stream or RandomStream(0), workers, chunk)


def estimate_V(model: IncrementModel, grid, replicas: int, n_max: int = DEFAULT_N_MAX,
               stream: RandomStream | None = None, workers: int | None = None,
               chunk: int = RENEWAL_CHUNK) -> RenewalTable:
    """Estimate ``V(-w)`` for magnitudes ``w`` in ``grid``."""
    return _estimate("V", model, grid, replicas, n_max, stream or RandomStream(0), workers, chunk)


def estimate_V0(model: IncrementModel, grid, replicas: int, n_max: int = DEFAULT_N_MAX,
                stream: RandomStream | None = None, workers: int | None = None,
                chunk: int = RENEWAL_CHUNK) -> RenewalTable:
    """Estimate ``V0(-w)`` for magnitudes ``w`` in ``grid``."""
    return _estimate("V0", model, grid, replicas, n_max, stream or RandomStream(0), workers, chunk)


# --- integrals -----------------------------------------------------------

def _panel_weights(x: np.ndarray, theta: float | None) -> np.ndarray:
    """Coefficients ``c_i`` with ``int w(x) f(x) dx = sum c_i f_i`` for piecewise-linear ``f``."""
    h = np.diff(x)
    c = np.zeros_like(x)
    if theta is None:
        c[:-1] += h / 2
        c[1:] += h / 2
        return c
    e0, e1 = np.exp(-theta * x[:-1]), np.exp(-theta * x[1:])
    i0 = (e0 - e1) / theta
    i1 = -h * e1 / theta + (e0 - e1) / theta**2
    c[:-1] += i0 - i1 / h
    c[1:] += i1 / h
    return c


def _power_tail(coef, kappa, lo, hi, theta):
    """``int_lo^hi coef w^kappa e^{-theta w} dw`` (``theta=None`` means unit weight)."""
    s = kappa + 1.0
    if theta is None:
        if math.isinf(hi):
            raise ValueError("unit weight needs a finite upper limit")
        return coef * (hi**s - lo**s) / s
    full = coef * special.gamma(s) / theta**s
    upper = 0.0 if math.isinf(hi) else special.gammaincc(s, theta * hi)
    return full * (special.gammaincc(s, theta * lo) - upper)


def integral_against_table(table: RenewalTable, weight: ExpDecay | None = None,
                           upper: float = math.inf) -> tuple[float, float]:
    """Integrate the tabulated function against ``weight`` over ``[0, upper]``.

    Inside the grid the table is treated as piecewise linear and each panel
    is integrated exactly; beyond it the regular-variation tail fit is
    integrated in closed form.  Returns ``(value, error)`` where the error
    adds per-point stderr with absolute weights (a full-correlation bound).
    """
    theta = None if weight is None else weight.theta
    if theta is None and math.isinf(upper):
        raise ValueError("unit weight needs a finite upper limit")
    if upper <= 0:
        return 0.0, 0.0
    grid = table.grid
    below = grid < upper
    if below.sum() < 4:
        raise ValueError(f"table too coarse: fewer than 4 grid points below {upper}")
    xs = grid[below]
    vs = table.values[below]
    ses = table.stderr[below]
    edge = min(upper, grid[-1])
    if edge > xs[-1]:
        xs = np.append(xs, edge)
        vs = np.append(vs, table(edge))
        ses = np.append(ses, table.stderr_at(edge))
    c = _panel_weights(xs, theta)
    value = float(c @ vs)
    err = float(np.abs(c) @ ses)
    if upper > grid[-1]:
        table._require_tail()
        kappa, coef = table.tail_fit
        tail = float(_power_tail(coef, kappa, grid[-1], upper, theta))
        value += tail
        err += abs(tail) * table.stderr[-1] / table.values[-1]
    return value, err
