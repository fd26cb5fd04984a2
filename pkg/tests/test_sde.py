import math

import numpy as np
import pytest

from tvsmas import sde
from tvsmas.errors import NonFiniteState


def test_increments_deterministic():
    a = sde.brownian_increments(7, 3, 100, 1e-3)
    b = sde.brownian_increments(7, 3, 100, 1e-3)
    np.testing.assert_array_equal(a.increments, b.increments)
    c = sde.brownian_increments(7, 3, 100, 1e-3, realization=1)
    assert not np.array_equal(a.increments, c.increments)


def test_increment_variance_large_sample():
    dt, steps = 1e-3, 10**6
    inc = sde.brownian_increments(2024, 2, steps, dt).increments
    # var of the sample variance is 2 dt^2 / (steps - 1)
    sd = math.sqrt(2 / (steps - 1)) * dt
    for k in range(2):
        assert abs(inc[:, k].var(ddof=1) - dt) < 5 * sd
        assert abs(inc[:, k].mean()) < 5 * math.sqrt(dt / steps)


def test_increment_sqrt_dt_scaling():
    a = sde.brownian_increments(3, 1, 200000, 1e-3).increments
    b = sde.brownian_increments(3, 1, 200000, 4e-3).increments
    # same normals underneath, so the ratio is exact
    np.testing.assert_allclose(b / a, 2.0, rtol=1e-12)


def test_em_step_examples():
    s = sde.euler_maruyama_step(sde.SdeState(0.0, np.array([1.0, 2.0])), np.array([0.5, -1.0]), np.zeros((2, 2)),
                                0.1, np.array([3.0, 4.0]))
    np.testing.assert_array_equal(s.x, np.array([1.0, 2.0]) + np.array([0.5, -1.0]) * 0.1)
    s = sde.euler_maruyama_step(sde.SdeState(0.0, np.zeros(2)), np.zeros(2), np.eye(2), 0.01, np.array([0.3, -0.7]))
    np.testing.assert_array_equal(s.x, [0.3, -0.7])
    with pytest.raises(NonFiniteState):
        sde.euler_maruyama_step(sde.SdeState(0.0, np.zeros(1)), np.array([np.inf]), np.zeros((1, 1)), 0.1,
                                np.zeros(1))


def test_integrate_constant_and_drift():
    path = sde.brownian_increments(1, 2, 1000, 1e-3)
    t, x = sde.integrate(lambda t, x: np.zeros(2), lambda t, x: np.zeros((2, 2)), [1.0, -1.0], 1.0, 1e-3, path, 100)
    assert len(t) == 11 and t[-1] == pytest.approx(1.0)
    assert np.all(x == [1.0, -1.0])
    t, x = sde.integrate(lambda t, x: np.array([1.0, 0.0]), lambda t, x: np.zeros((2, 2)), [0.0, 0.0], 1.0, 1e-3,
                         path)
    np.testing.assert_allclose(x[-1], [1.0, 0.0], atol=1e-12)


def test_steps_for():
    assert sde.steps_for(10.0, 1e-3) == 10000
    with pytest.raises(ValueError):
        sde.steps_for(1.0, 0.3)


def ou_moments(paths=10**4, dt=1e-3, seed=11):
    """Vectorized EM for dx = -x dt + dB from x0 = 1 over t in [0, 1]."""
    steps = sde.steps_for(1.0, dt)
    x = np.ones(paths)
    rngs = [sde.brownian_increments(seed, 1, steps, dt, r).increments[:, 0] for r in range(paths)]
    dW = np.stack(rngs, axis=1)
    for k in range(steps):
        x = sde.em_update(x[:, None], -x[:, None], np.ones((paths, 1, 1)), dt, dW[k][:, None])[:, 0]
    return x


def test_ou_oracle():
    x = ou_moments()
    m = x.size
    mean_se = x.std(ddof=1) / math.sqrt(m)
    var = x.var(ddof=1)
    var_se = math.sqrt(np.var((x - x.mean()) ** 2, ddof=1) / m)
    assert abs(x.mean() - math.exp(-1)) <= 3 * mean_se
    assert abs(var - (1 - math.exp(-2)) / 2) <= 3 * var_se


def test_example_diffusion_norm():
    d = sde.example_diffusion()
    for t in np.linspace(0, 3, 7):
        assert np.linalg.norm(d(t, np.zeros(2))) == pytest.approx(0.5)
    assert d.sigma_bar == 0.5
