import math

import numpy as np
import pytest
from scipy import integrate

from walklab import renewal
from walklab.renewal import ExpDecay, RenewalTable, integral_against_table
from walklab.rng import RandomStream
from walklab.walk import gaussian


def test_boundary_values_exact(gauss_tables):
    U, V, V0 = gauss_tables["U"], gauss_tables["V"], gauss_tables["V0"]
    assert U.values[0] == 1.0 and U.stderr[0] == 0.0
    assert V.values[0] == 1.0
    # zeta = 0 for continuous laws: V0(-0) = 1 / (1 - zeta) = 1
    assert abs(V0.values[0] - 1.0) <= 3 * V0.stderr[0] + 1e-15
    assert renewal.ZETA == 0.0


def test_monotone_and_projection_small(gauss_tables):
    for t in gauss_tables.values():
        assert np.all(np.diff(t.values) >= 0)
        moved = np.abs(t.values - t.raw_values)
        assert np.all(moved <= 3 * t.stderr + 1e-12)


def test_weak_inequality_table_dominates_and_agrees(gauss_tables):
    V, V0 = gauss_tables["V"], gauss_tables["V0"]
    # both tables come from different streams; with continuous steps they estimate the same function
    assert np.all(np.abs(V0.values - V.values) <= 3 * np.hypot(V.stderr, V0.stderr))


def test_weak_inequality_dominates_on_shared_stream():
    m, st, grid = gaussian(), RandomStream(3), np.arange(0, 5.01, 0.5)
    V = renewal.estimate_V(m, grid, 4096, 10_000, st)
    V0 = renewal.estimate_V0(m, grid, 4096, 10_000, st)
    assert np.all(V0.raw_values >= V.raw_values)


def test_symmetric_reflection(gauss_tables):
    U, V = gauss_tables["U"], gauss_tables["V"]
    assert np.all(np.abs(U.values - V.values) <= 3 * np.hypot(U.stderr, V.stderr) + 1e-12)


def test_gaussian_loglog_slope(gauss_tables):
    U = gauss_tables["U"]
    sel = (U.grid >= 5) & (U.grid <= 40)
    slope = np.polyfit(np.log(U.grid[sel]), np.log(U.values[sel]), 1)[0]
    assert abs(slope - 1.0) < 0.1
    assert U.tail_exponent_ok()


def test_subadditivity(stable_U, gauss_tables):
    for t in (stable_U, gauss_tables["V"]):
        g = t.grid[: min(len(t.grid), 21)]
        for u in g:
            for w in g:
                if u + w > t.grid[-1]:
                    continue
                se = math.sqrt(t.stderr_at(u) ** 2 + t.stderr_at(w) ** 2 + t.stderr_at(u + w) ** 2)
                assert t(u + w) <= t(u) + t(w) + 3 * se


def test_regular3_integral_ratio(gauss_tables):
    V = gauss_tables["V"]
    for y in (20.0, 30.0, 40.0):
        num, _ = integral_against_table(V, None, y)
        assert num / (y * V(y) / (2 * 0.5 + 1)) == pytest.approx(1.0, abs=0.1)


def test_stderr_scales_with_replicas():
    m, grid = gaussian(), np.array([0.0, 1.0, 2.0, 4.0])
    a = renewal.estimate_U(m, grid, 1 << 14, 20_000, RandomStream(4))
    b = renewal.estimate_U(m, grid, 1 << 15, 20_000, RandomStream(5))
    ratio = a.stderr[1:] / b.stderr[1:]
    assert np.all(np.abs(ratio / math.sqrt(2) - 1) < 0.1)


def test_truncation_insensitive_to_n_max():
    m, grid = gaussian(), np.arange(0, 20.01, 2.0)
    a = renewal.estimate_U(m, grid, 1 << 14, 10_000, RandomStream(6))
    b = renewal.estimate_U(m, grid, 1 << 14, 100_000, RandomStream(6))
    a.check_truncation()
    b.check_truncation()
    assert np.all(np.abs(a.values - b.values) <= np.hypot(a.stderr, b.stderr) + 1e-12)


def test_truncation_check_fires_when_n_max_tiny():
    t = renewal.estimate_U(gaussian(), np.arange(0, 30.01, 3.0), 1 << 14, 20, RandomStream(7))
    with pytest.raises(renewal.TruncationError):
        t.check_truncation()


def test_estimator_argument_checks():
    with pytest.raises(ValueError):
        renewal.estimate_U(gaussian(), [0.0, 1.0], 0)
    with pytest.raises(ValueError):
        renewal.estimate_U(gaussian(), [1.0, 0.0], 10)


def test_synthetic_linear_exp_integral():
    grid = np.linspace(0, 100, 401)
    t = RenewalTable.synthetic("U", grid, 1 + grid, expected_exponent=1.0)
    val, _ = integral_against_table(t, ExpDecay(1.0))
    assert val == pytest.approx(2.0, abs=1e-6)


def test_synthetic_unit_weight():
    grid = np.linspace(0, 10, 11)
    t = RenewalTable.synthetic("V", grid, np.ones_like(grid), expected_exponent=0.0)
    assert integral_against_table(t, None, 7.3)[0] == pytest.approx(7.3, abs=1e-12)


def test_synthetic_power_table_against_quad():
    grid = np.linspace(0, 100, 2001)  # linear interpolation error ~ h^2 f'' / 12
    t = RenewalTable.synthetic("U", grid, (1 + grid) ** 1.3, expected_exponent=1.3)
    val, _ = integral_against_table(t, ExpDecay(2.0))
    ref, _ = integrate.quad(lambda z: math.exp(-2 * z) * (1 + z) ** 1.3, 0, math.inf, epsabs=1e-13)
    assert val == pytest.approx(ref, rel=1e-4)


def test_integral_errors():
    grid = np.linspace(0, 10, 11)
    t = RenewalTable.synthetic("V", grid, 1 + grid)
    with pytest.raises(ValueError):
        integral_against_table(t, None, 2.5)     # fewer than 4 points below upper
    with pytest.raises(ValueError):
        integral_against_table(t, None, math.inf)
    with pytest.raises(ValueError):
        ExpDecay(0.0)
    bad = RenewalTable.synthetic("U", grid, 1 + grid, expected_exponent=0.2)
    with pytest.raises(ValueError):
        integral_against_table(bad, ExpDecay(1.0))


def test_csv_round_trip(tmp_path, gauss_tables):
    V = gauss_tables["V"]
    V.to_csv(tmp_path / "v.csv")
    back = RenewalTable.from_csv(tmp_path / "v.csv")
    assert back.which == "V"
    assert np.array_equal(back.grid, V.grid)
    assert np.array_equal(back.values, V.values)
    assert back.tail_fit == V.tail_fit
    header = (tmp_path / "v.csv").read_text().splitlines()[0]
    assert header == "which,x,value,stderr,replicas,n_max,censor_frac,tail_exp,tail_coef"
    assert (tmp_path / "v.csv").read_text().splitlines()[2].startswith("V,-0.25,")
