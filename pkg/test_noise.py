import math

import numpy as np
import pytest

from noise import NoiseSpec, NoisyObjective, noisy_wrap
from testfns import get

LAM = 1e-3
DRAWS = 100_000


def _draws(seed, lam=LAM, count=DRAWS):
    f = noisy_wrap(lambda x: 1.5, NoiseSpec(lam=lam, seed=seed))
    x = np.zeros(2)
    return np.array([f(x) for _ in range(count)]) - 1.5


def test_zero_noise_is_exact_passthrough():
    f = get("rosenbrock")
    wrapped = noisy_wrap(f, NoiseSpec(lam=0.0, seed=5))
    rng = np.random.default_rng(0)
    for _ in range(100):
        x = rng.uniform(-2, 2, size=2)
        assert wrapped(x) == f(x)


def test_sample_mean_and_variance():
    eps = _draws(seed=7)
    assert abs(eps.mean()) <= 3.0 * LAM / math.sqrt(DRAWS)
    assert eps.var(ddof=1) == pytest.approx(LAM**2, rel=0.05)


def test_repeated_points_draw_fresh_noise():
    eps = _draws(seed=8)
    lag1 = np.corrcoef(eps[:-1], eps[1:])[0, 1]
    assert abs(lag1) < 0.01
    assert len(np.unique(eps[:1000])) == 1000


def test_streams_are_seeded():
    a = _draws(seed=21, count=20_000)
    b = _draws(seed=21, count=20_000)
    c = _draws(seed=22, count=DRAWS)
    assert np.array_equal(a, b)
    assert abs(np.corrcoef(_draws(seed=21), c)[0, 1]) < 0.01


def test_wrapper_counts_calls_and_exposes_objective():
    f = get("sphere")
    wrapped = noisy_wrap(f, NoiseSpec(lam=LAM, seed=1))
    assert isinstance(wrapped, NoisyObjective)
    for _ in range(5):
        wrapped(np.ones(4))
    assert wrapped.calls == 5
    assert wrapped.name == "sphere"
    assert wrapped.dim == 4
    assert np.array_equal(wrapped.gradient([1.0, 2.0]), np.array([2.0, 4.0]))


def test_spec_accepts_lambda_alias_and_validates():
    assert NoiseSpec(**{"lambda": 0.5, "seed": 3}).lam == 0.5
    with pytest.raises(ValueError):
        NoiseSpec(lam=-1e-3)
    with pytest.raises(ValueError):
        NoiseSpec(lam=1e-3, seed=2**64)
