import math

import numpy as np
import pytest

from tvsmas import objectives as ob
from tvsmas import trajectory as tj
from tvsmas.errors import NoConvergence, SingularSystem


def test_weighted_mean_one_step():
    f1 = ob.tracking_quadratic([1, 1], [0, 0])
    f2 = ob.tracking_quadratic([3, 3], [4, 0])
    pt = tj.newton_minimizer([f1, f2], 0.0, [10.0, -7.0])
    np.testing.assert_allclose(pt.x_star, [3, 0], atol=1e-12)
    assert pt.iterations == 1


@pytest.mark.parametrize("t", [0.0, 0.33, 1.5, 7.25])
def test_example1_minimizer(t):
    pt = tj.newton_minimizer([ob.example1()], t, [0.0, 0.0])
    np.testing.assert_allclose(pt.x_star, [math.cos(math.pi * t), math.sin(math.pi * t)], atol=1e-8)


def test_table_closed_form_values():
    # hand-evaluated at t = 0: 3.5 / 20 and 0.5 / (55/6 + 19/2)
    np.testing.assert_allclose(tj.example2_table_optimum(0.0), [0.175, 0.5 / (55 / 6 + 9.5)], rtol=1e-15)
    np.testing.assert_allclose(tj.example2_reported_optimum(0.0), [2.5 / 21, -0.5 / (73 / 6 + 6 + 1 + 2.5)],
                               rtol=1e-15)


@pytest.mark.parametrize("t", [0.0, 0.5, 1.0, 2.0])
def test_example2_minimizer_matches_table_form(t):
    pt = tj.newton_minimizer(ob.example2_models(), t, [0.0, 0.0])
    np.testing.assert_allclose(pt.x_star, tj.example2_table_optimum(t), atol=1e-10)


def test_example2_reported_form_is_not_stationary():
    models = ob.example2_models()
    x = tj.example2_reported_optimum(0.5)
    g = np.sum([m.grad(0.5, x) for m in models], axis=0)
    assert np.linalg.norm(g) > 1.0


def test_trajectory_rate_examples():
    tq = ob.tracking_quadratic([1, 1], [ob.rational(1, 0, 0, 1), 0])
    np.testing.assert_allclose(tj.trajectory_rate([tq], 2.0, [2.0, 0.0]), [1.0, 0.0])
    static = ob.tracking_quadratic([2, 5], [1.0, -1.0])
    np.testing.assert_array_equal(tj.trajectory_rate([static], 3.0, [1.0, -1.0]), [0.0, 0.0])
    for t in (0.2, 1.1, 3.7):
        x = tj.example1_optimum(t)
        want = [-math.pi * math.sin(math.pi * t), math.pi * math.cos(math.pi * t)]
        np.testing.assert_allclose(tj.trajectory_rate([ob.example1()], t, x), want, atol=1e-6)
    with pytest.raises(ValueError):
        tj.trajectory_rate([ob.example1()], 0.0, [5.0, 5.0])


def test_track_optimal_example1_vs_ode():
    tr = tj.track_optimal([ob.example1()], np.round(np.arange(1001) * 0.01, 10))
    assert tr.max_gap <= 1e-4
    closed = np.array([tj.example1_optimum(t) for t in tr.times])
    assert np.max(np.abs(tr.x_star - closed)) <= 1e-6


def test_track_optimal_example2():
    tr = tj.track_optimal(ob.example2_models(), np.round(np.arange(501) * 0.01, 10))
    closed = np.array([tj.example2_table_optimum(t) for t in tr.times])
    assert np.max(np.abs(tr.x_star - closed)) <= 1e-6
    assert tr.max_gap <= 1e-4


def test_constant_minimizer_family():
    tr = tj.track_optimal([ob.tracking_quadratic([ob.expo() + ob.const(1.0), 2.0], [1.5, -0.5])],
                          np.linspace(0, 3, 31))
    assert np.all(tr.x_star == tr.x_star[0])


def test_uniqueness_from_random_starts():
    rng = np.random.default_rng(9)
    models = ob.example2_models()
    pts = [tj.newton_minimizer(models, 1.3, rng.uniform(-50, 50, 2)).x_star for _ in range(10)]
    np.testing.assert_allclose(pts, np.broadcast_to(pts[0], (10, 2)), atol=1e-8)


def test_failures():
    flat = ob.tracking_quadratic([0.0, 0.0], [0.0, 0.0], b=[1.0, 0.0])
    with pytest.raises(SingularSystem):
        tj.newton_minimizer([flat], 0.0, [0.0, 0.0])
    quartic = ob.CallableModel(1, lambda t, x: x**4, lambda t, x: 4 * x**3, lambda t, x: 12 * x[:, None] ** 2,
                               lambda t, x: 0 * x, lambda t, x: 0 * x[:, None])
    with pytest.raises(NoConvergence):
        tj.newton_minimizer([quartic], 0.0, [1.0], max_iter=3)
    with pytest.raises(ValueError):
        tj.track_optimal([ob.example1()], [0.0, 0.0])
