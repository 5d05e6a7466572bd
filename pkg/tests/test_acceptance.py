"""Acceptance gate: each criterion runs at its stated tolerance and prints one PASS/FAIL line."""

import math

import numpy as np
import pytest
from scipy import special

from walklab import bpre, harness, stable
from walklab.functionals import (ConstraintSpec, CorollaryVatVat, StayNeg, StayNonneg, Theorem2, duality_pathwise,
                                 functional_for, lhs_panel, pilot_replicas, ratio_reports)
from walklab.renewal import estimate_U, estimate_V, estimate_V0
from walklab.rng import RandomStream
from walklab.walk import exact_stable, gaussian, logistic_logit

pytestmark = pytest.mark.slow

G = gaussian()
ROOT = RandomStream(20240611)
GRID = np.arange(0.0, 40.0 + 1e-9, 0.25)
N_GRID = [64, 128, 256, 512]
PHI, PSI = ConstraintSpec.phi(), ConstraintSpec.psi()

RATIO_WINDOWS = [
    ("theorem1", dict(theta=1.0, constraint=PHI), (0.85, 1.15)),
    ("maxsmall", dict(theta=1.0, x=0.0), (0.85, 1.15)),
    ("theorem2", dict(theta=1.0, x=0.0, constraint=PSI), (0.85, 1.15)),
    ("theorem2", dict(theta=1.0, x=-2.0, constraint=PSI), (0.85, 1.15)),
    ("theorem3", dict(theta=1.0, constraint=PSI), (0.85, 1.15)),
    ("theorem4", dict(theta=1.0, K=-1.0), (0.8, 1.2)),
    ("theorem4", dict(theta=1.0, K=0.0), (0.8, 1.2)),
    ("theorem4", dict(theta=1.0, K=1.0), (0.8, 1.2)),
]
INTEGVW = ("integvw", dict(x_upper=ConstraintSpec.phi(param=0.3)))


def _fmt(values):
    return ",".join(f"{v:.3f}" for v in values)


@pytest.fixture(scope="module")
def tables():
    st = ROOT.child("tables")
    out = {w: f(G, GRID, 1 << 20, 10**6, st.child(w))
           for w, f in (("U", estimate_U), ("V", estimate_V), ("V0", estimate_V0))}
    for t in out.values():
        t.check_truncation()
    return out


@pytest.fixture(scope="module")
def panel(tables):
    """All ratio experiments on one shared batch sized by the auto-budget."""
    st = ROOT.child("panel")
    exps = [(t, p) for t, p, _ in RATIO_WINDOWS] + [INTEGVW]
    needs = [pilot_replicas(G, functional_for(t, p), N_GRID[-1], 0.05, st.child("pilot", i))
             for i, (t, p) in enumerate(exps)]
    replicas = max(needs + [1 << 22])
    reports = ratio_reports(G, exps, N_GRID, replicas, tables, st.child("run"))
    return reports, needs, replicas


def test_criterion_01_density_oracle(criterion):
    errs = [abs(stable.density_at_zero(stable.make_stable_params(2, 0, 0.5)) - 1 / math.sqrt(2 * math.pi)),
            abs(stable.density_at_zero(stable.make_stable_params(1, 0, 1)) - 1 / math.pi)]
    closed = []
    for a in (0.5, 0.75, 1.5, 1.9):
        g = stable.density_at_zero(stable.make_stable_params(a, 0, 1))
        closed.append(abs(g - special.gamma(1 + 1 / a) / math.pi))
    ok = max(errs) <= 1e-9 and max(closed) <= 1e-8
    criterion(1, "density at zero", ok, f"max err named {max(errs):.1e}, closed form {max(closed):.1e}")
    assert ok


def test_criterion_02_sparre_andersen(criterion):
    worst, ok = 0.0, True
    for name, model in (("gaussian", G), ("stable", exact_stable(1.5, 0, 1))):
        est = lhs_panel(model, [StayNonneg()], range(1, 21), 10**6, ROOT.child("sa", name))
        for n in range(1, 21):
            e = est[(0, n)]
            z = abs(e.value - special.comb(2 * n, n) / 4**n) / e.stderr
            worst = max(worst, z)
            ok &= z <= 3
    criterion(2, "Sparre-Andersen P(L_n >= 0), n = 1..20", ok, f"max |z| = {worst:.2f}")
    assert ok


def test_criterion_03_renewal_structure(criterion, tables):
    U, V, V0 = tables["U"], tables["V"], tables["V0"]
    checks = {"U(0)=1": U.values[0] == 1.0}
    v0 = [(V0.values[0], V0.stderr[0])]
    for name, model in (("stable", exact_stable(1.5, 0, 1)), ("logistic", logistic_logit())):
        t = estimate_V0(model, np.arange(0.0, 5.0 + 1e-9, 0.5), 1 << 16, 100_000, ROOT.child("v0", name))
        v0.append((t.values[0], t.stderr[0]))
    checks["V0(0)~1"] = all(abs(v - 1) <= 3 * se for v, se in v0)
    pts = np.linspace(2.0, 20.0, 10)
    sub = True
    for u in pts:
        for w in pts:
            slack = 3 * math.sqrt(V.stderr_at(u + w) ** 2 + V.stderr_at(u) ** 2 + V.stderr_at(w) ** 2)
            sub &= V(u + w) <= V(u) + V(w) + slack
    checks["subadditive"] = bool(sub)
    slope = U.tail_fit[0]
    checks["U slope"] = abs(slope - 1.0) <= 0.1
    ok = all(checks.values())
    bad = [k for k, v in checks.items() if not v]
    criterion(3, "renewal boundary and structure", ok,
              f"V0(0) {_fmt(v for v, _ in v0)}, U slope {slope:.3f}" + (f", failing {bad}" if bad else ""))
    assert ok


def test_criterion_04_persistence_exponent(criterion):
    ns = [16, 32, 64, 128, 256, 512, 1024]
    slopes = {}
    for name, model in (("gaussian", G), ("stable", exact_stable(1.5, 0, 1)), ("logistic", logistic_logit())):
        est = lhs_panel(model, [StayNeg()], ns, 1 << 19, ROOT.child("persist", name))
        slopes[name] = float(np.polyfit(np.log(ns), np.log([est[(0, n)].value for n in ns]), 1)[0])
    ok = all(abs(s + 0.5) <= 0.05 for s in slopes.values())
    criterion(4, "slope of log P(M_n < 0)", ok, ", ".join(f"{k} {v:.3f}" for k, v in slopes.items()))
    assert ok


def test_criterion_05_integvw_ratio(criterion, panel):
    rep = panel[0][-1]
    r = rep.ratio
    ok = 0.9 <= r[-1] <= 1.1 and rep.approaches_one()
    criterion(5, "conditioned probability ratio at n=512", ok,
              f"ratios {_fmt(r)} over n={N_GRID}, drift toward 1: {rep.approaches_one()}")
    assert ok


def test_criterion_06_theorem_ratios(criterion, panel):
    reports, needs, replicas = panel
    parts, ok = [], True
    for rep, (t, p, (lo, hi)) in zip(reports, RATIO_WINDOWS):
        r = rep.ratio[-1]
        good = lo <= r <= hi and rep.approaches_one()
        ok &= good
        parts.append(f"{t}({rep.constraint_desc}) {r:.3f}+-{rep.ratio_stderr[-1]:.3f}"
                     f"{'' if lo <= r <= hi else ' out'}{'' if rep.approaches_one() else ' drift'}")
    criterion(6, "theorem ratio windows at n=512", ok,
              f"replicas {replicas} (auto need {max(needs)}); " + "; ".join(parts))
    assert ok


def test_criterion_07_duality(criterion):
    inc = G.sample(ROOT.child("dual").generator(), (10_000, 64))
    a, b = duality_pathwise(inc, 1.0, PSI.value(64))
    exact = bool(np.array_equal(a, b))
    e1 = lhs_panel(G, [CorollaryVatVat(1.0, PSI)], N_GRID, 1 << 21, ROOT.child("dual", "vatvat"))
    e2 = lhs_panel(G, [Theorem2(1.0, 0.0, PSI)], N_GRID, 1 << 21, ROOT.child("dual", "maxim"))
    zs = [abs(e1[(0, n)].value - e2[(0, n)].value) / math.hypot(e1[(0, n)].stderr, e2[(0, n)].stderr)
          for n in N_GRID]
    ok = exact and max(zs) <= 3
    criterion(7, "duality", ok, f"pathwise exact {exact}, independent pair max |z| {max(zs):.2f}")
    assert ok


def test_criterion_08_harmonicity(criterion, tables):
    st = ROOT.child("harmonic")
    zs = []
    for n in (1, 64):
        for x in (0.0, 1.0):
            e = bpre.plus_measure_expectation(G, bpre.ConstantOne(), x, n, 1 << 18, tables["U"],
                                              st.child("plus", n, int(x)))
            zs.append(abs(e.value - 1) / e.stderr)
            e = bpre.minus_measure_expectation(G, bpre.ConstantOne(), -x, n, 1 << 18, tables["V"],
                                               st.child("minus", n, int(x)))
            zs.append(abs(e.value - 1) / e.stderr)
    track = bpre.martingale_W_track(bpre.EnvironmentModel("geometric", G), 1.0, [2, 16, 64, 128], 1 << 18,
                                    tables["U"], st.child("W"))
    wz = [abs(e.value - 1) / e.stderr for e in track]
    ok = max(zs) <= 3 and max(wz) <= 3
    criterion(8, "h-transform harmonicity", ok,
              f"measures max |z| {max(zs):.2f}; W means {_fmt(e.value for e in track)}, max |z| {max(wz):.2f}")
    assert ok


def test_criterion_09_bpre(criterion):
    env = bpre.EnvironmentModel("geometric", G)
    st = ROOT.child("bpre")
    un = bpre.survival_unconstrained(env, [32, 64, 128, 256, 512], 1 << 20, st.child("free"))
    slope = un.slope()
    reps = bpre.survival_constrained(env, [128, 256, 512], 0.0, 1 << 22, [8, 16, 32], st.child("low"))
    r16 = reps[1]
    change = abs(r16.normalized[2] / r16.normalized[1] - 1)
    mid = r16.mid_fraction(1)
    bound_ok = all(r.value <= b.value + 3 * math.hypot(r.stderr, b.stderr) for r, b in zip(r16.raw, r16.bound))
    checks = {"slope": abs(slope + 0.5) <= 0.1, "normalized": change < 0.25, "mid": mid < 0.2, "bound": bound_ok}
    ok = all(checks.values())
    sweep = ", ".join(f"J={r.J} {r.mid_fraction(1):.3f}" for r in reps)
    criterion(9, "BPRE survival", ok,
              f"slope {slope:.3f}; normalized {_fmt(r16.normalized)} (change {change:.3f}); "
              f"mid share n=256 {sweep}; quenched J=16 {r16.quenched_mid_fraction(1):.3f}; bound {bound_ok}")
    assert ok


def test_criterion_10_determinism(criterion):
    codes = [harness.verify_reference(w, log=lambda m: None) for w in (1, 2)]
    ok = codes == [0, 0]
    criterion(10, "verify-reference at workers 1 and 2", ok, f"exit codes {codes}")
    assert ok
