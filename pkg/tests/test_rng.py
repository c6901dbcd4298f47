"""Counter-based stream determinism, uniformity, and stochastic rounding."""

import numpy as np
import pytest

from landau_dsmc import rng


def test_identical_tuple_identical_value():
    tuples = [(1, 0, 0, 0), (42, 7, 123, 2), (2**63 - 1, 10**6, 2**40, 99)]
    for seed, step, pair, cnt in tuples:
        a = rng.RngStream(seed, step, pair, cnt).uniform()
        b = rng.RngStream(seed, step, pair, cnt).uniform()
        assert a == b
        assert 0.0 <= a < 1.0


def test_scalar_matches_vector_path():
    pairs = np.arange(100)
    vec = rng.uniforms(9, 3, pairs, 5)
    for p in (0, 17, 99):
        assert vec[p] == rng.uniforms(9, 3, p, 5)


def test_distinct_tuples_decorrelated():
    n = 200_000
    u = rng.uniforms(5, 11, np.arange(n), 0)
    v = rng.uniforms(5, 11, np.arange(n), 1)
    w = rng.uniforms(5, 12, np.arange(n), 0)
    se = 1.0 / np.sqrt(n)
    assert abs(np.corrcoef(u, v)[0, 1]) < 5 * se
    assert abs(np.corrcoef(u, w)[0, 1]) < 5 * se
    assert abs(np.corrcoef(u[:-1], u[1:])[0, 1]) < 5 * se


def test_uniform_moments():
    u = rng.uniforms(3, 0, np.arange(1_000_000), 0)
    assert abs(u.mean() - 0.5) < 5e-4
    assert abs(u.var() - 1.0 / 12.0) < 5e-4
    # tail mass sanity
    assert abs((u < 0.1).mean() - 0.1) < 1.5e-3


def test_sround_integer_input():
    for u in (0.0, 0.3, 0.999):
        assert rng.sround(3.0, u) == 3
        assert rng.sround(0.0, u) == 0


def test_sround_threshold():
    # rounds up iff u < frac(x)
    assert rng.sround(2.75, 0.5) == 3
    assert rng.sround(2.75, 0.9) == 2
    assert rng.sround(2.75, 0.7499) == 3
    assert rng.sround(2.75, 0.75) == 2


def test_sround_negative_rejected():
    with pytest.raises(ValueError):
        rng.sround(-0.1, 0.5)


def test_sround_unbiased_monte_carlo():
    # Var[sround(2.75, U)] = 0.75 * 0.25 = 0.1875
    n = 1_000_000
    u = rng.uniforms(17, 0, np.arange(n), 0)
    vals = 2 + (u < 0.75)
    sigma = np.sqrt(0.1875)
    assert abs(vals.mean() - 2.75) < 3 * sigma / np.sqrt(n)


def test_sround_mean_converges_at_sqrt_rate():
    errs = []
    for n in (10_000, 160_000):
        u = rng.uniforms(23, 0, np.arange(n), 0)
        errs.append(abs((2 + (u < 0.75)).mean() - 2.75))
    # 16x the samples should shrink the error about 4x; allow wide slack
    assert errs[1] < errs[0]


def test_normal_pairs_moments():
    a, b = rng.normal_pairs(29, 0, np.arange(500_000), 0)
    for x in (a, b):
        assert abs(x.mean()) < 5e-3
        assert abs(x.var() - 1.0) < 1e-2
    assert abs(np.corrcoef(a, b)[0, 1]) < 5e-3


def test_derive_seed_distinct():
    seeds = {rng.derive_seed(7, k) for k in range(1000)}
    assert len(seeds) == 1000
