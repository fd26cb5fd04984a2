import math

import numpy as np
import pytest

from tvsmas import analysis as an
from tvsmas import sde
from tvsmas.errors import InvalidExponents, InvalidTheta


def test_centralized_examples():
    b = an.msgeub_centralized(2, 1, 1, 1, 1)
    assert (b.rate, b.offset, b.condition_holds) == (2.0, 0.5, True)
    b = an.msgeub_centralized(0.7, 1, 0.5, 1, 0.5)
    assert b.offset == 0.625 and b.rate == pytest.approx(0.4, rel=1e-15)
    assert an.msgeub_centralized(2, 1, 1, 1, 0).offset == 0


def test_centralized_condition_violated():
    b = an.msgeub_centralized(0.7, 1, 2, 1, 0.5)
    assert not b.condition_holds and b.offset == math.inf and b.rate < 0
    assert not an.msgeub_centralized(1, 1, 1, 0, 0.5).condition_holds


def test_T1_examples():
    assert an.fixed_time_T1(1, 1, 0.5, 2, 1, 1, 1, 1) == pytest.approx(math.sqrt(2) + 0.25, rel=1e-12)
    base = an.fixed_time_T1(1, 1e300, 0.5, 2, 3, 3, 2, 4)
    doubled = an.fixed_time_T1(2, 1e300, 0.5, 2, 3, 3, 2, 4)
    assert doubled == pytest.approx(base / 2, rel=1e-12)
    with pytest.raises(InvalidExponents):
        an.fixed_time_T1(1, 1, 1.2, 0.8, 1, 1, 1, 1)
    with pytest.raises(InvalidExponents):
        an.fixed_time_T1(1, 1, 0.5, 1.0, 1, 1, 1, 1)


def test_settling_constants_example():
    c = an.settling_constants(2, 2, 0.5, 0.5, 1.5, 0.5)
    # closed forms: delta = 2^(-4/3), m1 = 1, m2 = 2 - 2^(2/3), T2 = 8 / sqrt(m2)
    m2 = 2 - 2 ** (2 / 3)
    assert c.delta == pytest.approx(2 ** (-4 / 3), rel=1e-12)
    assert c.m1 == pytest.approx(1.0, rel=1e-12)
    assert c.m2 == pytest.approx(m2, rel=1e-12)
    assert c.T2 == pytest.approx(8 / math.sqrt(m2), rel=1e-12)
    assert c.applicable


def test_consensus_constants_zero_noise():
    c = an.consensus_constants(5, 5, 15, 0.8, 1.2, 4.0, 3.0, 3, 0, 2, 0, 1, 0, 0.01, 2, 15)
    assert c.k3 == 0 and c.delta == 0 and c.applicable
    assert c.k1 == pytest.approx(2**0.8 * 5 * 4.0**0.9, rel=1e-12)
    assert c.k2 == pytest.approx(2**1.2 * 5 * 2**-0.1 * 15**-0.2 * 3.0**1.1, rel=1e-12)


def test_consensus_constants_flags_inapplicable():
    # delta taken from the q-branch leaves m1 negative here
    c = an.settling_constants(1, 100, 50, 0.5, 1.5, 0.01)
    assert not c.applicable and c.T2 == math.inf and c.m1 <= 0 < c.m2
    with pytest.raises(InvalidTheta):
        an.settling_constants(1, 1, 1, 0.5, 1.5, 1.0)


def test_distributed_examples():
    b = an.msgeub_distributed(15, 1, 1, 0, 1, 0.5)
    assert (b.k4, b.k5) == (11.0, 0.125)
    assert b.asymptotic_bound == pytest.approx(1 / 44, rel=1e-15)
    assert an.msgeub_distributed(15, 1, 1, 0, 1, 0).asymptotic_bound == 0
    bad = an.msgeub_distributed(1, 1, 1, 0, 1, 0.5)
    assert not bad.condition_holds and bad.asymptotic_bound == math.inf


def test_generator_examples():
    sig = np.array([[0.3, 0.1], [0.0, 0.2]])
    assert an.generator_quadratic([1.0, 2.0], sig, [1.0, 1.0], [1.0, 1.0]) == pytest.approx(0.5 * 0.14)
    x, c = np.array([0.5, -1.5, 2.0]), np.array([0.0, 1.0, 1.0])
    assert an.generator_quadratic(-(x - c), np.eye(3), x, c) == pytest.approx(-np.sum((x - c) ** 2) + 1.5)


def test_generator_monte_carlo():
    x, c = np.array([0.8, -0.3]), np.array([0.1, 0.4])
    drift = np.array([-1.0, 0.5])
    sig = np.array([[0.6, 0.2], [-0.1, 0.9]])
    dt, m = 1e-2, 10**5
    dW = sde.brownian_increments(17, 2, m, dt).increments
    xn = sde.em_update(x, drift, sig, dt, dW)
    dv = (0.5 * np.sum((xn - c) ** 2, axis=1) - 0.5 * np.sum((x - c) ** 2)) / dt
    lv = an.generator_quadratic(drift, sig, x, c)
    # the one-step mean carries an O(dt) bias of 0.5 ||drift||^2 dt
    assert abs(dv.mean() - 0.5 * dt * drift @ drift - lv) <= 3 * dv.std(ddof=1) / math.sqrt(m)


def test_gain_conditions():
    assert an.centralized_condition(0.7, 1, 0.5, 1).holds
    assert not an.centralized_condition(0.7, 1, 2, 1).holds
    assert an.tracking_condition(15, 1, 1, 1).holds and not an.tracking_condition(3, 1, 1, 1).holds
    assert not an.tracking_condition(15, 1, 1, 0).holds
    c = an.estimator_condition(3, 2.0, 15, 6.5)
    assert c.threshold == pytest.approx(2 * math.sqrt(30) / math.sqrt(6.5))
    c = an.consensus_condition(3, 15, 3, 2, 1, 4)
    assert c.threshold == pytest.approx((90 + 4) / 4) and not c.holds
