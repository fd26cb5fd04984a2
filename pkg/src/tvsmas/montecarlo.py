"""Ensembles of agent SDEs plus estimator, mean-square metrics and bound checks.

Realizations are simulated in fixed-size blocks, vectorized across the block.
Blocks may run on worker threads, but their composition depends only on the
block size, and aggregation walks realizations in index order with
compensated sums, so results are identical for any thread count.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NonFiniteState, NotStronglyConnected, ShapeMismatch, ToolkitError
from .graph import BalancedGraph
from .objectives import ObjectiveModel
from .protocols import (CentralizedGains, DistributedGains, EstimatorGains, centralized_control,
                        distributed_drift, estimator_rate_batch)
from .sde import DiffusionSpec, brownian_increments, em_update, steps_for
from .trajectory import track_optimal

METRIC_COLUMNS = ("t", "ms_tracking", "ms_tracking_se", "ms_consensus", "ms_consensus_se", "estimator_err_p95")


@dataclass
class EnsembleConfig:
    mode: str  # "centralized" | "distributed"
    models: Sequence[ObjectiveModel]
    initial_states: np.ndarray  # (n,) or (N, n)
    diffusion: DiffusionSpec
    dt: float = 1e-3
    horizon: float = 10.0
    realizations: int = 200
    root_seed: int = 0
    record_stride: int = 10
    centralized_gains: CentralizedGains | None = None
    estimator_gains: EstimatorGains | None = None
    distributed_gains: DistributedGains | None = None
    balanced: BalancedGraph | None = None
    noise: str = "shared"  # distributed only: "shared" | "independent"
    boundary_layer: float = 0.0
    block_size: int = 25
    threads: int = 1
    keep_states: bool = False

    def __post_init__(self):
        if self.mode not in ("centralized", "distributed"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if self.record_stride < 1 or self.block_size < 1 or self.threads < 1:
            raise ValueError("record_stride, block_size and threads must be >= 1")
        if self.noise not in ("shared", "independent"):
            raise ValueError(f"unknown noise model {self.noise!r}")
        self.steps = steps_for(self.horizon, self.dt)
        x0 = np.asarray(self.initial_states, dtype=float)
        n = self.models[0].dim
        if self.mode == "centralized":
            if len(self.models) != 1 or x0.shape != (n,):
                raise ShapeMismatch("centralized mode needs one model and an initial state of shape (n,)")
            if self.centralized_gains is None:
                raise ValueError("centralized mode needs centralized_gains")
        else:
            N = len(self.models)
            if x0.shape != (N, n):
                raise ShapeMismatch(f"initial states must have shape ({N}, {n}), got {x0.shape}")
            if self.estimator_gains is None or self.distributed_gains is None or self.balanced is None:
                raise ValueError("distributed mode needs estimator and protocol gains and a balanced graph")
            if self.balanced.a_tilde.shape != (N, N):
                raise ShapeMismatch("graph size does not match the number of objectives")
        self.initial_states = x0

    @property
    def n_agents(self) -> int:
        return 1 if self.mode == "centralized" else len(self.models)

    @property
    def record_steps(self) -> np.ndarray:
        ks = list(range(0, self.steps + 1, self.record_stride))
        if ks[-1] != self.steps:
            ks.append(self.steps)
        return np.array(ks)

    @property
    def noise_dim(self) -> int:
        n = self.models[0].dim
        return n * self.n_agents if (self.mode == "distributed" and self.noise == "independent") else n


@dataclass
class MetricSeries:
    times: np.ndarray
    ms_tracking: np.ndarray
    ms_tracking_se: np.ndarray
    ms_consensus: np.ndarray
    ms_consensus_se: np.ndarray
    estimator_err_p95: np.ndarray
    mean_state: np.ndarray  # ensemble mean of the agent average, (T, n)
    realizations: int

    def rows(self):
        cols = [self.times, self.ms_tracking, self.ms_tracking_se, self.ms_consensus,
                self.ms_consensus_se, self.estimator_err_p95]
        return list(zip(*cols))


@dataclass
class EnsembleResult:
    series: MetricSeries
    x_star: np.ndarray  # (T, n)
    tracking: np.ndarray  # per realization, (T, M)
    consensus: np.ndarray
    estimator_err: np.ndarray
    agent_mean: np.ndarray  # (T, M, n)
    states: np.ndarray | None = None  # (T, M, N, n) when kept
    final_zeta: np.ndarray | None = None  # (M, N, n, n), distributed only

    def first_half(self) -> MetricSeries:
        """Metrics of realizations 0..M/2-1, reusing their paths."""
        h = max(1, self.tracking.shape[1] // 2)
        return _aggregate(self.series.times, self.tracking[:, :h], self.consensus[:, :h],
                          self.estimator_err[:, :h], self.agent_mean[:, :h])


# --------------------------------------------------------------------------
# deterministic aggregation


def compensated_sum(values, axis: int = -1) -> np.ndarray:
    """Neumaier summation along ``axis``, in index order."""
    v = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    s = np.zeros(v.shape[1:])
    c = np.zeros(v.shape[1:])
    for row in v:
        t = s + row
        big = np.abs(s) >= np.abs(row)
        c += np.where(big, (s - t) + row, (row - t) + s)
        s = t
    return s + c


def mean_and_se(values) -> tuple[np.ndarray, np.ndarray]:
    """Mean over the last axis and its standard error (sample std / sqrt M)."""
    v = np.asarray(values, dtype=float)
    m = v.shape[-1]
    mean = compensated_sum(v) / m
    if m < 2:
        return mean, np.zeros_like(mean)
    var = compensated_sum((v - mean[..., None]) ** 2) / (m - 1)
    return mean, np.sqrt(var / m)


def _aggregate(times, tracking, consensus, est, agent_mean) -> MetricSeries:
    tr, tr_se = mean_and_se(tracking)
    co, co_se = mean_and_se(consensus)
    p95 = np.percentile(est, 95, axis=1)
    mean_state = compensated_sum(agent_mean, axis=1) / agent_mean.shape[1]
    return MetricSeries(np.asarray(times), tr, tr_se, co, co_se, p95, mean_state, tracking.shape[1])


# --------------------------------------------------------------------------
# simulation


def _block_noise(cfg: EnsembleConfig, r0: int, r1: int) -> np.ndarray:
    return np.stack([brownian_increments(cfg.root_seed, cfg.noise_dim, cfg.steps, cfg.dt, r).increments
                     for r in range(r0, r1)], axis=1)  # (steps, B, dim)


def _nonfinite(x: np.ndarray, step: int, r0: int):
    bad = ~np.isfinite(x.reshape(x.shape[0], -1)).all(axis=1)
    if bad.any():
        raise NonFiniteState(step, r0 + int(np.argmax(bad)))


def _run_centralized_block(cfg: EnsembleConfig, r0: int, r1: int, x_star: np.ndarray):
    B = r1 - r0
    model = cfg.models[0]
    dW = _block_noise(cfg, r0, r1)
    x = np.broadcast_to(cfg.initial_states, (B, model.dim)).copy()
    rec = set(cfg.record_steps.tolist())
    out = {"tracking": [], "consensus": [], "est": [], "mean": [], "states": []}
    j = 0
    for k in range(cfg.steps + 1):
        t = k * cfg.dt
        if k in rec:
            out["tracking"].append(np.sum((x - x_star[j]) ** 2, axis=-1))
            out["consensus"].append(np.zeros(B))
            out["est"].append(np.zeros(B))
            out["mean"].append(x.copy())
            if cfg.keep_states:
                out["states"].append(x[:, None, :].copy())
            j += 1
        if k == cfg.steps:
            break
        try:
            u = centralized_control(t, x, model, cfg.centralized_gains)
        except ToolkitError as exc:
            exc.args = (f"{exc} (realizations {r0}..{r1 - 1})",)
            raise
        x = em_update(x, u, cfg.diffusion(t, x), cfg.dt, dW[k])
        _nonfinite(x, k, r0)
    return out


def _run_distributed_block(cfg: EnsembleConfig, r0: int, r1: int, x_star: np.ndarray):
    B = r1 - r0
    models = cfg.models
    N, n = len(models), models[0].dim
    a = cfg.balanced.a_tilde
    dW = _block_noise(cfg, r0, r1)
    x = np.broadcast_to(cfg.initial_states, (B, N, n)).copy()
    zeta = np.zeros((B, N, n, n))
    H = np.empty_like(zeta)
    rec = set(cfg.record_steps.tolist())
    out = {"tracking": [], "consensus": [], "est": [], "mean": [], "states": []}
    j = 0
    for k in range(cfg.steps + 1):
        t = k * cfg.dt
        for i, m in enumerate(models):
            H[:, i] = m.hess(t, x[:, i])
        z = zeta + H
        if k in rec:
            xbar = x.mean(axis=1)
            out["tracking"].append(np.mean(np.sum((x - x_star[j]) ** 2, axis=-1), axis=-1))
            out["consensus"].append(np.mean(np.sum((x - xbar[:, None]) ** 2, axis=-1), axis=-1))
            dev = z - H.mean(axis=1)[:, None]
            out["est"].append(np.sqrt(np.sum(dev**2, axis=(-2, -1))).max(axis=-1))
            out["mean"].append(xbar)
            if cfg.keep_states:
                out["states"].append(x.copy())
            j += 1
        if k == cfg.steps:
            break
        try:
            drift = distributed_drift(t, x, z, models, a, cfg.distributed_gains)
        except ToolkitError as exc:
            exc.args = (f"{exc} (realizations {r0}..{r1 - 1})",)
            raise
        rate = estimator_rate_batch(z, a, cfg.estimator_gains, cfg.boundary_layer)
        noise = dW[k].reshape(B, N, n) if cfg.noise == "independent" else dW[k][:, None, :]
        sig = cfg.diffusion(t, x)
        x = em_update(x, drift, sig, cfg.dt, noise)
        zeta = zeta + cfg.dt * rate
        _nonfinite(x, k, r0)
    out["zeta"] = zeta
    return out


def optimal_at(cfg: EnsembleConfig, times) -> np.ndarray:
    return track_optimal(cfg.models, times, with_ode=False).x_star


def run_ensemble(cfg: EnsembleConfig, is_connected: bool | None = None) -> EnsembleResult:
    """Simulate ``cfg.realizations`` paths and aggregate the metrics."""
    if cfg.mode == "distributed" and is_connected is False:
        raise NotStronglyConnected("communication graph is not strongly connected")
    times = cfg.record_steps * cfg.dt
    x_star = optimal_at(cfg, times)
    blocks = [(r, min(r + cfg.block_size, cfg.realizations)) for r in range(0, cfg.realizations, cfg.block_size)]
    runner = _run_centralized_block if cfg.mode == "centralized" else _run_distributed_block
    if cfg.threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            outs = list(pool.map(lambda b: runner(cfg, b[0], b[1], x_star), blocks))
    else:
        outs = [runner(cfg, r0, r1, x_star) for r0, r1 in blocks]

    def cat(key):
        return np.concatenate([np.array(o[key]) for o in outs], axis=1)

    tracking, consensus, est, mean = cat("tracking"), cat("consensus"), cat("est"), cat("mean")
    states = cat("states") if cfg.keep_states else None
    zeta = np.concatenate([o["zeta"] for o in outs]) if cfg.mode == "distributed" else None
    series = _aggregate(times, tracking, consensus, est, mean)
    return EnsembleResult(series, x_star, tracking, consensus, est, mean, states, zeta)


# --------------------------------------------------------------------------
# post-processing


def settling_time(times, values, threshold: float) -> float | None:
    """First recorded time with value <= threshold that stays <= 2 threshold afterwards."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    stays = np.flip(np.logical_and.accumulate(np.flip(v <= 2 * threshold)))
    hit = np.nonzero((v <= threshold) & stays)[0]
    return float(t[hit[0]]) if hit.size else None


@dataclass(frozen=True)
class MsgeubCheck:
    passed: bool
    min_margin: float
    margins: np.ndarray = field(repr=False)


def check_msgeub(times, values, se, rate: float, offset: float, initial_value: float) -> MsgeubCheck:
    """metric(t) <= initial_value exp(-rate t) + offset + 3 se at every recorded t."""
    if not rate > 0:
        raise ValueError("rate must be positive")
    t = np.asarray(times, dtype=float)
    env = initial_value * np.exp(-rate * t) + offset + 3 * np.asarray(se, dtype=float)
    margins = env - np.asarray(values, dtype=float)
    return MsgeubCheck(bool(np.all(margins >= 0)), float(np.min(margins)), margins)


# --------------------------------------------------------------------------
# writers


def jsonable(obj):
    """Recursively convert numpy values and non-finite floats for strict JSON."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isnan(f):
            return None
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _header(meta: dict) -> str:
    return "".join(f"# {k}: {json.dumps(jsonable(v), sort_keys=True)}\n" for k, v in sorted(meta.items()))


def metrics_csv(series: MetricSeries, meta: dict) -> str:
    buf = io.StringIO()
    buf.write(_header(meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for row in series.rows():
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def states_csv(times, states: np.ndarray, meta: dict) -> str:
    """Per-realization agent states, one row per recorded time; ``states`` is (T, N, n)."""
    buf = io.StringIO()
    buf.write(_header(meta))
    w = csv.writer(buf, lineterminator="\n")
    N, n = states.shape[1:]
    w.writerow(["t"] + [f"x{i}_{d}" for i in range(N) for d in range(n)])
    for t, s in zip(times, states):
        w.writerow([repr(float(t))] + [repr(float(v)) for v in s.ravel()])
    return buf.getvalue()
