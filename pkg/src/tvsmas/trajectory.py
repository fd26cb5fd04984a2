"""The time-varying minimizer of sum_i f_i(t, .).

Warm-started Newton is the reference; integrating the trajectory ODE with
RK4 runs alongside purely as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NoConvergence, SingularSystem
from .objectives import ObjectiveModel


@dataclass(frozen=True)
class TrajectoryPoint:
    t: float
    x_star: np.ndarray
    gradient_residual: float
    iterations: int = 0


def _sum_grad(models, t, x):
    return np.sum([m.grad(t, x) for m in models], axis=0)


def _sum_hess(models, t, x):
    return np.sum([m.hess(t, x) for m in models], axis=0)


def _solve(H, v):
    try:
        return np.linalg.solve(H, v)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from None


def newton_minimizer(models: Sequence[ObjectiveModel], t: float, guess, tol: float = 1e-10,
                     max_iter: int = 50) -> TrajectoryPoint:
    x = np.array(guess, dtype=float)
    for it in range(max_iter + 1):
        g = _sum_grad(models, t, x)
        res = float(np.linalg.norm(g))
        if res <= tol:
            return TrajectoryPoint(float(t), x, res, it)
        if it == max_iter:
            break
        x = x - _solve(_sum_hess(models, t, x), g)
    raise NoConvergence(res)


def _rate(models, t, x):
    gt = np.sum([m.grad_t(t, x) for m in models], axis=0)
    return -_solve(_sum_hess(models, t, x), gt)


def trajectory_rate(models: Sequence[ObjectiveModel], t: float, x_star) -> np.ndarray:
    """dx*/dt = -(sum H)^{-1} (sum grad_t) at a stationary point."""
    x = np.asarray(x_star, dtype=float)
    res = float(np.linalg.norm(_sum_grad(models, t, x)))
    if res > 1e-6:
        raise ValueError(f"x_star is not stationary at t={t} (residual {res:.3e})")
    return _rate(models, t, x)


@dataclass(frozen=True)
class TrackResult:
    times: np.ndarray
    x_star: np.ndarray  # Newton, (T, n)
    residuals: np.ndarray
    x_ode: np.ndarray  # RK4 on the trajectory ODE, (T, n)

    @property
    def max_gap(self) -> float:
        return float(np.max(np.linalg.norm(self.x_star - self.x_ode, axis=-1)))

    def points(self) -> list[TrajectoryPoint]:
        return [TrajectoryPoint(float(t), x, float(r)) for t, x, r in zip(self.times, self.x_star, self.residuals)]


def track_optimal(models: Sequence[ObjectiveModel], t_grid, tol: float = 1e-10, guess=None,
                  with_ode: bool = True) -> TrackResult:
    ts = np.asarray(t_grid, dtype=float)
    if ts.ndim != 1 or ts.size == 0 or np.any(np.diff(ts) <= 0):
        raise ValueError("t_grid must be a nonempty increasing sequence")
    x = np.zeros(models[0].dim) if guess is None else np.array(guess, dtype=float)
    xs, res = [], []
    for t in ts:
        pt = newton_minimizer(models, t, x, tol)
        x = pt.x_star
        xs.append(x)
        res.append(pt.gradient_residual)
    xs = np.array(xs)
    ode = np.empty_like(xs)
    ode[0] = xs[0]
    if with_ode:
        y = xs[0].copy()
        for k in range(1, ts.size):
            t0, h = ts[k - 1], ts[k] - ts[k - 1]
            k1 = _rate(models, t0, y)
            k2 = _rate(models, t0 + h / 2, y + h / 2 * k1)
            k3 = _rate(models, t0 + h / 2, y + h / 2 * k2)
            k4 = _rate(models, t0 + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            ode[k] = y
    else:
        ode[:] = xs
    return TrackResult(ts, xs, np.array(res), ode)


# --------------------------------------------------------------------------
# closed forms


def example1_optimum(t: float) -> np.ndarray:
    return np.array([math.cos(math.pi * t), math.sin(math.pi * t)])


def example2_reported_optimum(t: float) -> np.ndarray:
    """The closed form published alongside Example 2, transcribed verbatim.

    It does not solve the stationarity condition of the Example 2 objective
    table; :func:`example2_table_optimum` does.
    """
    e = math.exp(-t)
    x1 = (2 * math.tanh(t) + 3 * math.cos(math.pi * t) - 0.5) / (17.5 + 2 * e + 0.5 * e * e + 1 / (t + 1))
    x2 = (4 * math.sin(math.pi * t) - 0.5) / (73 / 6 + 6 * e + 2 / (t + 2) + 5 / (2 * (t + 1)))
    return np.array([x1, x2])


def example2_table_optimum(t: float) -> np.ndarray:
    """Weighted-mean minimizer worked out by hand from the fifteen objectives."""
    e = math.exp(-t)
    x1 = (2 * math.tanh(t) + 3 * math.cos(math.pi * t) + 0.5) / (16.5 + 2 * e + 0.5 * e * e + 1 / (t + 1))
    x2 = (4 * math.sin(math.pi * t) - math.cos(math.pi * t) + 1.5) / (
        55 / 6 + 6 * e + 2 / (t + 2) + 5 / (2 * (t + 1))
    )
    return np.array([x1, x2])
