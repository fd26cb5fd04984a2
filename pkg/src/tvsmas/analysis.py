"""Closed-form rates, offsets and settling times of the convergence results,
and the stochastic generator applied to quadratic Lyapunov functions."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InvalidExponents, InvalidTheta

INF = math.inf


def _q(x: float) -> Fraction:
    # shortest round-tripping decimal, so 0.7 is read as 7/10
    return Fraction(repr(float(x)))


def _safe_div(num: float, den: float) -> float:
    if num == 0:
        return 0.0
    if den == 0:
        return INF
    return num / den


@dataclass(frozen=True)
class CentralizedBound:
    rate: float
    offset: float
    condition_holds: bool


def msgeub_centralized(gamma1: float, l1: float, l2: float, h: float, sigma_bar: float) -> CentralizedBound:
    """rate = 2 gamma1 l1 - 2 l2 / h, offset = sigma_bar^2 h / (2 gamma1 l1 h - 2 l2).

    Evaluated in exact rational arithmetic on the decimal inputs, so
    ``(0.7, 1, 0.5, 1, 0.5)`` gives exactly 0.625.  A failed gain condition
    ``gamma1 > l2 / (h l1)`` yields an infinite offset, never a negative one.
    """
    if h <= 0:
        return CentralizedBound(-INF, INF, False)
    g, a, b, hh, s = map(_q, (gamma1, l1, l2, h, sigma_bar))
    rate = 2 * g * a - 2 * b / hh
    if rate <= 0:
        return CentralizedBound(float(rate), INF, False)
    offset = s * s * hh / (2 * g * a * hh - 2 * b)
    return CentralizedBound(float(rate), float(offset), True)


def fixed_time_T1(alpha1, beta1, p, q, lambda2_Lp, lambda2_Lq, n, N) -> float:
    if not 0 < p < 1 < q:
        raise InvalidExponents(f"need 0 < p < 1 < q, got p={p}, q={q}")
    if min(alpha1, beta1, lambda2_Lp, lambda2_Lq) <= 0:
        raise ValueError("gains and eigenvalues must be positive")
    first = 1.0 / (2**p * alpha1 * lambda2_Lp ** ((p + 1) / 2) * (1 - p))
    second = n ** ((q - 1) / 2) * N ** (q - 1) / (2**q * beta1 * lambda2_Lq ** ((q + 1) / 2) * (q - 1))
    return first + second


@dataclass(frozen=True)
class ConsensusConstants:
    k1: float
    k2: float
    k3: float
    delta: float
    m1: float
    m2: float
    T2: float
    applicable: bool


def settling_constants(k1: float, k2: float, k3: float, p: float, q: float, theta: float) -> ConsensusConstants:
    """delta, m1, m2 and the settling bound T2 from k1, k2, k3."""
    if not 0 < theta < 1:
        raise InvalidTheta(f"theta must lie in (0, 1), got {theta}")
    if not 0 < p < 1 < q:
        raise InvalidExponents(f"need 0 < p < 1 < q, got p={p}, q={q}")
    if k3 == 0:
        delta, m1, m2 = 0.0, k1, k2
    elif math.isinf(k3):
        return ConsensusConstants(k1, k2, k3, INF, -INF, -INF, INF, False)
    else:
        delta = min((k3 / ((1 - theta) * k1)) ** (2 / (p + 1)), (k3 / ((1 - theta) * k2)) ** (2 / (q + 1)))
        m1 = k1 - k3 * delta ** (-(p + 1) / 2)
        m2 = k2 - k3 * delta ** (-(q + 1) / 2)
    if m1 <= 0 or m2 <= 0:
        return ConsensusConstants(k1, k2, k3, delta, m1, m2, INF, False)
    r = m1 / m2
    T2 = 2 * r ** ((1 - p) / (q - p)) / (m1 * (1 - p)) + 2 * r ** ((1 - q) / (q - p)) / (m2 * (q - 1))
    return ConsensusConstants(k1, k2, k3, delta, m1, m2, T2, True)


def consensus_constants(alpha2, beta2, gamma4, p, q, lambda2_Lp, lambda2_Lq, L2, L3, L4, L5, h_d,
                        sigma_bar, theta, n, N) -> ConsensusConstants:
    k1 = 2**p * alpha2 * lambda2_Lp ** ((p + 1) / 2)
    k2 = 2**q * beta2 * n ** ((1 - q) / 2) * N ** (1 - q) * lambda2_Lq ** ((q + 1) / 2)
    k3 = _safe_div(2 * gamma4 * L3**2, L2) + _safe_div(2 * L5**2, h_d * L4) + sigma_bar**2
    return settling_constants(k1, k2, k3, p, q, theta)


@dataclass(frozen=True)
class TrackingBound:
    k4: float
    k5: float
    asymptotic_bound: float
    condition_holds: bool


def msgeub_distributed(gamma4, L1, L4, L5, h_d, sigma_bar) -> TrackingBound:
    """k4 = L1 gamma4 - 4 L4 / h_d, k5 = 2 L5^2 / (L4 h_d) + sigma_bar^2 / 2, bound 2 k5 / k4."""
    g, a, b, c, s = map(_q, (gamma4, L1, L4, L5, sigma_bar))
    if h_d <= 0:
        return TrackingBound(-INF, INF, INF, False)
    hd = _q(h_d)
    k4 = a * g - 4 * b / hd
    if c == 0:
        k5 = s * s / 2
    elif b == 0:
        k5_f = INF
        return TrackingBound(float(k4), k5_f, INF, False)
    else:
        k5 = 2 * c * c / (b * hd) + s * s / 2
    if k4 <= 0:
        return TrackingBound(float(k4), float(k5), INF, False)
    return TrackingBound(float(k4), float(k5), float(2 * k5 / k4), True)


def generator_quadratic(drift, diffusion, x, center) -> float:
    """LV for V = 1/2 ||x - c||^2: (x - c) . drift + 1/2 ||diffusion||_F^2."""
    e = np.asarray(x, dtype=float) - np.asarray(center, dtype=float)
    s = np.asarray(diffusion, dtype=float)
    return float(e @ np.asarray(drift, dtype=float) + 0.5 * np.sum(s * s))


# --------------------------------------------------------------------------
# gain conditions and the full report


@dataclass(frozen=True)
class GainCondition:
    holds: bool
    value: float
    threshold: float
    strict: bool = True


def _cond(value: float, threshold: float, strict: bool = True) -> GainCondition:
    ok = value > threshold if strict else value >= threshold
    return GainCondition(bool(ok), float(value), float(threshold), strict)


def centralized_condition(gamma1, l1, l2, h) -> GainCondition:
    return _cond(gamma1, _safe_div(l2, h * l1))


def estimator_condition(gamma2, L_H, N, lambda2_L2) -> GainCondition:
    return _cond(gamma2, _safe_div(L_H * math.sqrt(2 * N), math.sqrt(max(lambda2_L2, 0.0))), strict=False)


def consensus_condition(gamma3, gamma4, L2, L4, h_d, lambda2_L1) -> GainCondition:
    return _cond(gamma3, _safe_div(2 * gamma4 * L2 * h_d + 2 * L4, h_d * lambda2_L1))


def tracking_condition(gamma4, L1, L4, h_d) -> GainCondition:
    return _cond(gamma4, _safe_div(4 * L4, h_d * L1))


@dataclass
class BoundReport:
    inputs: dict
    centralized: dict | None = None
    estimator: dict | None = None
    consensus: dict | None = None
    tracking: dict | None = None
    gain_conditions: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def centralized_report(gamma1, l1, l2, h, sigma_bar, inputs: dict | None = None) -> BoundReport:
    b = msgeub_centralized(gamma1, l1, l2, h, sigma_bar)
    rep = BoundReport(inputs=dict(inputs or {}, gamma1=gamma1, l1=l1, l2=l2, h=h, sigma_bar=sigma_bar))
    rep.centralized = asdict(b)
    rep.gain_conditions["gamma1"] = asdict(centralized_condition(gamma1, l1, l2, h))
    if not b.condition_holds:
        rep.notes.append("centralized gain condition fails; offset reported as infinite")
    return rep


def distributed_report(est, dist, spectra: dict, consts: dict, sigma_bar: float, theta: float,
                       n: int, N: int, inputs: dict | None = None) -> BoundReport:
    """Estimator, consensus and tracking constants for the distributed protocol.

    ``consts`` needs L1..L5, h_d and L_H; ``spectra`` the four lambda2 values.
    """
    rep = BoundReport(inputs=dict(inputs or {}, **spectra, **consts, sigma_bar=sigma_bar, theta=theta, n=n, N=N))
    T1 = fixed_time_T1(est.alpha1, est.beta1, est.p, est.q, spectra["lambda2_Lp"], spectra["lambda2_Lq"], n, N)
    rep.estimator = {"T1": T1}
    cc = consensus_constants(dist.alpha2, dist.beta2, dist.gamma4, dist.p, dist.q, spectra["lambda2_Lp"],
                             spectra["lambda2_Lq"], consts["L2"], consts["L3"], consts["L4"], consts["L5"],
                             consts["h_d"], sigma_bar, theta, n, N)
    rep.consensus = dict(asdict(cc), consensus_offset=cc.delta)
    if not cc.applicable:
        rep.notes.append("consensus settling bound inapplicable at these constants (m1 or m2 not positive)")
    tb = msgeub_distributed(dist.gamma4, consts["L1"], consts["L4"], consts["L5"], consts["h_d"], sigma_bar)
    rep.tracking = asdict(tb)
    if not tb.condition_holds:
        rep.notes.append("tracking gain condition fails; asymptotic bound reported as infinite")
    rep.gain_conditions["gamma2"] = asdict(estimator_condition(est.gamma2, consts["L_H"], N, spectra["lambda2_L2"]))
    rep.gain_conditions["gamma3"] = asdict(consensus_condition(dist.gamma3, dist.gamma4, consts["L2"], consts["L4"],
                                                               consts["h_d"], spectra["lambda2_L1"]))
    rep.gain_conditions["gamma4"] = asdict(tracking_condition(dist.gamma4, consts["L1"], consts["L4"], consts["h_d"]))
    return rep
