import math

import numpy as np
import pytest
from scipy import integrate, stats

from walklab import bpre
from walklab.bpre import (ConstantOne, EmbeddedSurvival, EnvironmentModel, OffspringLaw, SurvivalReport,
                          UnconstrainedSurvival)
from walklab.rng import RandomStream
from walklab.stats import Estimate
from walklab.walk import gaussian

G = gaussian()
GEO = EnvironmentModel("geometric", G)
POI = EnvironmentModel("poisson", G)


def test_link_examples():
    law = GEO.law(0.0)
    assert law.p == 0.5 and law.mean == 1.0
    assert law.pmf(0) == pytest.approx(0.5)
    two = GEO.law(math.log(2))
    assert two.mean == pytest.approx(2.0) and two.p == pytest.approx(1 / 3)
    k = np.arange(400)
    for lw in (two, POI.law(math.log(2))):
        assert np.sum(lw.pmf(k)) == pytest.approx(1.0)
        assert np.sum(k * lw.pmf(k)) == pytest.approx(2.0)
        assert np.sum(k * k * lw.pmf(k)) == pytest.approx(lw.second_moment())


def test_gamma_closed_forms():
    for x in (-1.0, 0.0, 0.7):
        m = math.exp(x)
        assert GEO.law(x).gamma() == pytest.approx(2 + 1 / m)
        assert POI.law(x).gamma() == pytest.approx(1 + 1 / m)
        geo = GEO.law(x)
        assert geo.gamma(2) == pytest.approx(2 + 1 / m - float(geo.pmf(1)) / m**2)


def test_unknown_family():
    with pytest.raises(ValueError):
        EnvironmentModel("binomial", G)


def test_sample_mean():
    gen = RandomStream(1).generator()
    for lw in (GEO.law(0.4), POI.law(0.4)):
        d = lw.sample(gen, 200_000)
        assert d.min() >= 0
        assert abs(d.mean() - lw.mean) < 4 * d.std() / math.sqrt(d.size)


def test_sample_environment_is_a_law():
    law, x = bpre.sample_environment(GEO, RandomStream(2))
    assert law.mean == pytest.approx(math.exp(x))


def test_geometric_sum_is_negative_binomial():
    gen = RandomStream(3).generator()
    z = np.full(100_000, 3.0)
    out, flag = bpre._offspring_sum("geometric", z, np.full(z.size, 1.5), gen, 1e12)
    assert not flag.any()
    k = np.arange(60)
    obs = np.bincount(out.astype(int), minlength=k.size)[: k.size]
    exp = stats.nbinom.pmf(k, 3, 1 / 2.5) * z.size
    keep = exp > 5
    chi2 = np.sum((obs[keep] - exp[keep]) ** 2 / exp[keep])
    assert stats.chi2.sf(chi2, keep.sum() - 1) > 1e-4


def test_step_population():
    st = RandomStream(4)
    assert bpre.step_population(0, GEO.law(3.0), st) == (0, False)
    with pytest.raises(ValueError):
        bpre.step_population(-1, GEO.law(0.0), st)
    gen = st.child(1).generator()
    draws = np.array([bpre.step_population(10_000, GEO.law(0.2), gen)[0] for _ in range(400)])
    sd = math.sqrt(10_000 * (math.exp(0.2) + math.exp(0.4)))
    assert abs(draws.mean() - 10_000 * math.exp(0.2)) < 4 * sd / 20
    z, mf = bpre.step_population(10**13, GEO.law(0.5), gen)
    assert mf and z == int(10**13 * math.exp(0.5))


def test_quenched_mean_equals_product_of_means():
    means, errs, target = bpre.quenched_mean_check(GEO, 5, 20, 20_000, RandomStream(5))
    z = (means - target) / errs
    assert np.all(np.abs(z) < 4.5)
    assert abs(z.mean()) < 4.5 / math.sqrt(20)


def test_linear_fractional_survival_formula():
    # fixed environment; P(Z_n > 0) = 1 / sum_{k<=n} e^{-S_k}
    x = np.array([0.3, -0.8, 0.1, 0.5])
    s = np.concatenate([[0.0], np.cumsum(x)])
    oracle = 1 / np.sum(np.exp(-s))
    gen = RandomStream(6).generator()
    z = np.ones(1 << 17)
    for xk in x:
        z, _ = bpre._offspring_sum("geometric", z, np.full(z.size, math.exp(xk)), gen, 1e12)
    p = np.mean(z > 0)
    assert abs(p - oracle) < 4 * math.sqrt(oracle * (1 - oracle) / z.size)


def test_b2_diagnostic_matches_quadrature():
    e = bpre.b2_diagnostic(GEO, 1 << 17, RandomStream(7))
    f = lambda x: math.log(2 + math.exp(-x)) ** 2.5 * math.exp(-x * x / 2) / math.sqrt(2 * math.pi)
    oracle = integrate.quad(f, -40, 40)[0]
    assert e.within(oracle, 4)


@pytest.fixture(scope="module")
def survival():
    return bpre.survival_constrained(GEO, [32, 64], 0.0, 1 << 16, [4, 8], RandomStream(8))


def test_bucket_partition_and_fields(survival):
    r4, r8 = survival
    assert r4.J == 4 and r8.J == 8
    for r in survival:
        for i, n in enumerate(r.n_grid):
            parts = r.bucket_left[i] + r.bucket_mid[i] + r.bucket_right[i]
            assert parts == pytest.approx(r.raw[i].value, rel=1e-12)
            assert r.normalized[i] == pytest.approx(r.raw[i].value * n**1.5)
            assert 0 <= r.mid_fraction(i) <= 1
            assert 0 <= r.quenched_mid_fraction(i) <= 1
    # same replicas behind every J
    assert r4.raw[0].value == r8.raw[0].value
    assert r4.bucket_mid[1] >= r8.bucket_mid[1]


def test_direct_and_quenched_agree_and_respect_bound(survival):
    r = survival[0]
    for i in range(len(r.n_grid)):
        assert r.raw[i].agrees(r.quenched[i], 4)
        assert r.quenched[i].value <= r.bound[i].value
        assert r.raw[i].value <= r.bound[i].value + 4 * r.raw[i].stderr


def test_constrained_nested_in_unconstrained(survival):
    un = bpre.survival_unconstrained(GEO, [32, 64], 1 << 16, RandomStream(8))
    r = survival[0]
    for i in range(2):
        assert r.raw[i].value <= un.survival[i].value
    assert un.survival[1].value <= un.survival[0].value
    assert 0 <= un.negative_fraction[1] <= 1
    single = bpre.survival_unconstrained(GEO, 32, 1 << 12, RandomStream(9))
    assert isinstance(single, Estimate)


def test_worker_count_invariance():
    a = bpre.survival_constrained(POI, [20], -1.0, 1 << 13, 4, RandomStream(10), chunk=1 << 11)
    b = bpre.survival_constrained(POI, [20], -1.0, 1 << 13, 4, RandomStream(10), chunk=1 << 11, workers=2)
    assert a.raw[0] == b.raw[0] and a.bucket_mid == b.bucket_mid
    assert a.quenched[0] is None and math.isnan(a.quenched_mid_fraction())


def test_horizon_must_exceed_two_J():
    with pytest.raises(ValueError):
        bpre.survival_constrained(GEO, [16], 0.0, 100, 8, RandomStream(1))


def test_report_rejects_broken_partition(tmp_path):
    e = Estimate(0.1, 0.01, 100)
    with pytest.raises(AssertionError):
        SurvivalReport([10], 0.0, 2, [e], [1.0], [0.05], [0.01], [0.01], [0.0], [e], [None], [None])
    r = SurvivalReport([10], 0.0, 2, [e], [1.0], [0.05], [0.03], [0.02], [0.0], [e], [None], [None])
    r.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].split(",") == SurvivalReport.HEADER and len(lines) == 2


def test_slope_recovers_power():
    n = [64, 128, 256]
    s = UnconstrainedSurvival(n, [Estimate(3 * k**-0.5, 0.0, 1) for k in n], [0.0] * 3, [None] * 3)
    assert s.slope() == pytest.approx(-0.5)


def test_plus_and_minus_measures_are_probability_measures(gauss_tables):
    st = RandomStream(11)
    U, V = gauss_tables["U"], gauss_tables["V"]
    for x in (0.0, 1.5):
        e = bpre.plus_measure_expectation(G, ConstantOne(), x, 4, 1 << 16, U, st.child(x))
        assert e.within(1.0, 4.5)
    for x in (0.0, -1.5):
        e = bpre.minus_measure_expectation(G, ConstantOne(), x, 4, 1 << 16, V, st.child(-x, 1))
        assert e.within(1.0, 4.5)
    with pytest.raises(ValueError):
        bpre.plus_measure_expectation(G, ConstantOne(), -1.0, 4, 10, U, st)
    with pytest.raises(ValueError):
        bpre.minus_measure_expectation(G, ConstantOne(), 1.0, 4, 10, V, st)
    with pytest.raises(ValueError):
        bpre.plus_measure_expectation(G, ConstantOne(), 1.0, 4, 10, V, st)


def test_embedded_survival_increases_with_q(gauss_tables):
    U = gauss_tables["U"]
    vals = [bpre.plus_measure_expectation(G, EmbeddedSurvival("geometric", q), 0.0, 16, 1 << 14, U,
                                          RandomStream(12)) for q in (1, 4)]
    assert 0 < vals[0].value < vals[1].value <= 1.0 + 4 * vals[1].stderr


def test_W_track_starts_at_one(gauss_tables):
    tr = bpre.martingale_W_track(GEO, 0.5, [1, 8, 32], 1 << 14, gauss_tables["U"], RandomStream(13))
    assert len(tr) == 3 and tr.checkpoints == [1, 8, 32]
    first = list(tr)[0]
    assert first.value == 1.0 and first.stderr == 0.0
    assert 0 < tr.positive_frac.value <= 1
    with pytest.raises(ValueError):
        bpre.martingale_W_track(GEO, 0.5, [8, 4], 10, gauss_tables["U"], RandomStream(13))
