"""Seeded Brownian increments and explicit Euler-Maruyama integration."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonFiniteState


def realization_rng(seed: int, realization: int = 0) -> np.random.Generator:
    """Counter-based Philox stream keyed by ``(seed, realization)``.

    Streams for different realizations are independent of the order in which
    they are requested, which keeps parallel ensembles reproducible.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(realization),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class BrownianPath:
    seed: int
    dt: float
    increments: np.ndarray  # (steps, dim), each entry ~ N(0, dt)
    realization: int = 0

    @property
    def steps(self) -> int:
        return self.increments.shape[0]

    @property
    def dim(self) -> int:
        return self.increments.shape[1]


def brownian_increments(seed: int, dim: int, steps: int, dt: float, realization: int = 0) -> BrownianPath:
    if dt <= 0 or steps < 1:
        raise ValueError("need dt > 0 and steps >= 1")
    rng = realization_rng(seed, realization)
    inc = rng.standard_normal((steps, dim)) * math.sqrt(dt)
    inc.setflags(write=False)
    return BrownianPath(int(seed), float(dt), inc, int(realization))


@dataclass(frozen=True)
class SdeState:
    t: float
    x: np.ndarray


@dataclass(frozen=True)
class DiffusionSpec:
    """Named diffusion matrix ``sigma(t, x)`` with a Frobenius-norm bound ``sigma_bar``."""

    name: str
    fn: Callable[[float, np.ndarray], np.ndarray]
    sigma_bar: float

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.fn(t, x)


def example_diffusion(scale: float = 0.5) -> DiffusionSpec:
    """diag(scale sin(pi t), scale cos(pi t)), state independent; ||.||_F = scale."""

    def fn(t, x):
        x = np.asarray(x)
        m = np.diag([scale * math.sin(math.pi * t), scale * math.cos(math.pi * t)])
        return np.broadcast_to(m, x.shape[:-1] + (2, 2))

    return DiffusionSpec("example", fn, abs(scale))


def zero_diffusion(dim: int) -> DiffusionSpec:
    def fn(t, x):
        x = np.asarray(x)
        return np.zeros(x.shape[:-1] + (dim, dim))

    return DiffusionSpec("zero", fn, 0.0)


def constant_diagonal(values) -> DiffusionSpec:
    d = np.diag(np.asarray(values, dtype=float))

    def fn(t, x):
        x = np.asarray(x)
        return np.broadcast_to(d, x.shape[:-1] + d.shape)

    return DiffusionSpec("constant-diagonal", fn, float(np.linalg.norm(d)))


def make_diffusion(name: str, dim: int, scale: float = 0.5, values=None) -> DiffusionSpec:
    if name == "example":
        if dim != 2:
            raise ValueError("the example diffusion is two-dimensional")
        return example_diffusion(scale)
    if name == "zero":
        return zero_diffusion(dim)
    if name == "constant-diagonal":
        return constant_diagonal(values if values is not None else [scale] * dim)
    raise ValueError(f"unknown diffusion {name!r}")


def em_update(x, drift, diffusion, dt, dW):
    """x + drift dt + diffusion @ dW, broadcasting over leading axes."""
    return x + drift * dt + np.einsum("...ij,...j->...i", diffusion, dW)


def euler_maruyama_step(state: SdeState, drift, diffusion, dt: float, dW) -> SdeState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = em_update(np.asarray(state.x, dtype=float), np.asarray(drift, dtype=float),
                  np.asarray(diffusion, dtype=float), dt, np.asarray(dW, dtype=float))
    if not np.all(np.isfinite(x)):
        raise NonFiniteState(0)
    return SdeState(state.t + dt, x)


def steps_for(horizon: float, dt: float) -> int:
    steps = int(round(horizon / dt))
    if steps < 1 or abs(steps * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError(f"horizon {horizon} is not an integral multiple of dt {dt}")
    return steps


def integrate(drift_fn, diffusion_fn, x0, horizon: float, dt: float, path: BrownianPath,
              record_stride: int = 1):
    """Integrate ``dx = drift_fn(t, x) dt + diffusion_fn(t, x) dB`` along ``path``.

    Returns ``(times, states)`` holding every ``record_stride``-th state plus
    the final one.  Time at step k is ``k * dt`` rather than an accumulated sum.
    """
    steps = steps_for(horizon, dt)
    if path.steps != steps:
        raise ValueError(f"path has {path.steps} steps, horizon needs {steps}")
    if record_stride < 1:
        raise ValueError("record_stride must be >= 1")
    x = np.array(x0, dtype=float)
    times, states = [0.0], [x.copy()]
    for k in range(steps):
        t = k * dt
        x = em_update(x, drift_fn(t, x), diffusion_fn(t, x), dt, path.increments[k])
        if not np.all(np.isfinite(x)):
            raise NonFiniteState(k)
        if (k + 1) % record_stride == 0 or k + 1 == steps:
            times.append((k + 1) * dt)
            states.append(x.copy())
    return np.array(times), np.array(states)
