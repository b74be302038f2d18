import math

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given

from onlineboost.core import (
    MASK64,
    BoostConfig,
    RngStream,
    Sample,
    clamp_unit,
    derive_trial_seed,
    sigma_m_from_target,
    splitmix64,
)


def test_clamp_examples():
    assert clamp_unit(0.5) == 0.5
    assert clamp_unit(3.0) == 1.0
    assert clamp_unit(-7.2) == -1.0


def test_clamp_rejects_nan():
    with pytest.raises(ValueError):
        clamp_unit(float("nan"))


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_clamp_idempotent(y):
    once = clamp_unit(y)
    assert -1.0 <= once <= 1.0
    assert clamp_unit(once) == once


def test_sigma_m_examples():
    assert sigma_m_from_target(0.1, 0.0) == 0.1
    assert sigma_m_from_target(0.1, 0.05) == pytest.approx(0.0526316, abs=1e-7)
    with pytest.raises(ValueError):
        sigma_m_from_target(0.2, 0.2)
    with pytest.raises(ValueError):
        sigma_m_from_target(0.5, 1.0)


@given(st.floats(0.0, 0.95), st.floats(0.0, 1.0))
def test_sigma_m_in_unit_interval(kappa, frac):
    sigma_d2 = kappa + (1.0 - kappa) * frac
    if not kappa < sigma_d2:
        return
    s = sigma_m_from_target(sigma_d2, kappa)
    assert 0.0 < s <= 1.0 + 1e-12
    # inverse map recovers the target
    assert (1 - kappa) * s + kappa == pytest.approx(sigma_d2)


def test_splitmix_reference_vector():
    # published outputs of SplitMix64 seeded with 1234567
    expected = [6457827717110365317, 3203168211198807973, 9817491932198370423,
                4593380528125082431, 16408922859458223821]
    state = 1234567
    for want in expected:
        state, out = splitmix64(state)
        assert out == want


def test_derive_trial_seed():
    s = 1234567
    assert derive_trial_seed(s, 0) == 6457827717110365317
    assert derive_trial_seed(s, 1) == 3203168211198807973
    assert derive_trial_seed(s, 0) != derive_trial_seed(s, 1)
    assert derive_trial_seed(s, 7) == derive_trial_seed(s, 7)
    with pytest.raises(ValueError):
        derive_trial_seed(s, -1)


@given(st.integers(0, MASK64), st.lists(st.integers(0, 10**6), min_size=2, max_size=20, unique=True))
def test_derive_trial_seed_distinct(base, trials):
    seeds = {derive_trial_seed(base, t) for t in trials}
    assert len(seeds) == len(trials)


def _xoshiro_reference(seed, n):
    """Plain-integer xoshiro256** used as an independent oracle."""
    s, words = seed, []
    for _ in range(4):
        s, out = splitmix64(s)
        words.append(out)

    def rotl(x, k):
        return ((x << k) | (x >> (64 - k))) & MASK64

    outs = []
    for _ in range(n):
        result = (rotl((words[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (words[1] << 17) & MASK64
        words[2] ^= words[0]
        words[3] ^= words[1]
        words[1] ^= words[2]
        words[0] ^= words[3]
        words[2] ^= t
        words[3] = rotl(words[3], 45)
        outs.append(result)
    return outs


@pytest.mark.parametrize("seed", [0, 1, 42, MASK64])
def test_rng_matches_reference(seed):
    rng = RngStream(seed)
    assert [rng.next_u64() for _ in range(50)] == _xoshiro_reference(seed, 50)


def test_rng_reproducible_and_copy():
    a, b = RngStream(9), RngStream(9)
    assert np.array_equal(a.normal(100), b.normal(100))
    c = a.copy()
    assert a.uniform() == c.uniform()
    assert RngStream(9).uniform() != RngStream(10).uniform()


def test_rng_moments():
    rng = RngStream(3)
    u = rng.uniforms(200_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 4 * math.sqrt(1 / 12 / u.size)
    z = rng.normal(200_000)
    assert abs(z.mean()) < 4 / math.sqrt(z.size)
    assert abs(z.var() - 1.0) < 4 * math.sqrt(2 / z.size)


@pytest.mark.parametrize("p", [0.0, 0.1, 0.5, 0.9, 1.0])
def test_bernoulli_mean(p):
    rng = RngStream(11)
    n = 20_000
    hits = sum(rng.bernoulli(p) for _ in range(n))
    if p in (0.0, 1.0):
        assert hits == p * n
    else:
        assert abs(hits - p * n) < 4 * math.sqrt(n * p * (1 - p))


@pytest.mark.parametrize("lam", [0.05, 0.5, 1.0])
def test_poisson_mean(lam):
    rng = RngStream(5)
    n = 20_000
    draws = np.array([rng.poisson(lam) for _ in range(n)])
    assert draws.min() >= 0
    assert abs(draws.mean() - lam) < 4 * math.sqrt(lam / n)


def test_sample_validation():
    s = Sample([1, 2], 3)
    assert s.x.dtype == float and s.d == 3.0
    with pytest.raises(ValueError):
        Sample([1, float("inf")], 0.0)
    with pytest.raises(ValueError):
        Sample(np.zeros((2, 2)), 0.0)


@pytest.mark.parametrize("bad", [dict(m=0), dict(K=0), dict(beta=0.0), dict(beta=1.5), dict(v=0),
                                 dict(mu=0), dict(mode="bagging"), dict(learner="svm"),
                                 dict(sigma2=1.5), dict(delta_floor=0)])
def test_config_rejects(bad):
    with pytest.raises(ValueError):
        BoostConfig(**bad)
