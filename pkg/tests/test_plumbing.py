import numpy as np
import pytest

from walklab.parallel import chunk_sizes, run_chunks
from walklab.rng import RandomStream, label_to_int
from walklab.stats import Estimate, Moments


def _draw(gen, size, scale):
    return scale * gen.standard_normal(size)


def test_streams_are_reproducible_and_split():
    a = RandomStream(5).child("x", 3).generator().random(4)
    b = RandomStream(5).child("x", 3).generator().random(4)
    c = RandomStream(5).child("x", 4).generator().random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert label_to_int("tables") == label_to_int("tables")
    with pytest.raises(ValueError):
        RandomStream(-1)
    with pytest.raises(ValueError):
        label_to_int(-3)


def test_chunking_is_worker_independent():
    st = RandomStream(9)
    one = run_chunks(_draw, st, 1000, (2.0,), chunk=128, workers=1)
    two = run_chunks(_draw, st, 1000, (2.0,), chunk=128, workers=2)
    assert [len(x) for x in one] == chunk_sizes(1000, 128) == [128] * 7 + [104]
    for x, y in zip(one, two):
        assert np.array_equal(x, y)


def test_moments_merge_matches_direct():
    rng = np.random.default_rng(0)
    v = rng.normal(size=(1000, 3))
    whole = Moments.of(v)
    merged = Moments.merge([Moments.of(v[:300]), Moments.of(v[300:])])
    assert merged.count == 1000
    assert np.allclose(merged.mean, v.mean(axis=0))
    assert np.allclose(merged.stderr, v.std(axis=0, ddof=1) / np.sqrt(1000))
    assert np.allclose(whole.stderr, merged.stderr)


def test_estimate_validation():
    e = Estimate(2.0, 0.1, 10)
    assert e.within(2.25) and not e.within(2.35)
    assert e.agrees(Estimate(2.3, 0.1, 10))
    assert e.rel_stderr == pytest.approx(0.05)
    with pytest.raises(ValueError):
        Estimate(1.0, -0.1, 10)
    with pytest.raises(ValueError):
        Estimate(1.0, 0.1, 0)
