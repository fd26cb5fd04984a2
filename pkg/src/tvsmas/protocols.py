"""Control laws: the centralized protocol, the fixed-time Hessian estimator
and the distributed protocol, plus the signed-power operators they use."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ShapeMismatch, SingularEstimatorMatrix, SingularHessian
from .graph import BalancedGraph
from .objectives import ObjectiveModel

SINGULAR_TOL = 1e-10


@dataclass(frozen=True)
class CentralizedGains:
    gamma1: float

    def __post_init__(self):
        if not self.gamma1 > 0:
            raise ValueError("gamma1 must be positive")


@dataclass(frozen=True)
class EstimatorGains:
    alpha1: float
    beta1: float
    gamma2: float
    p: float
    q: float

    def __post_init__(self):
        if min(self.alpha1, self.beta1, self.gamma2) <= 0:
            raise ValueError("estimator gains must be positive")
        if not 0 < self.p < 1 < self.q:
            raise ValueError("need 0 < p < 1 < q")


@dataclass(frozen=True)
class DistributedGains:
    alpha2: float
    beta2: float
    gamma3: float
    gamma4: float
    p: float
    q: float

    def __post_init__(self):
        if min(self.alpha2, self.beta2, self.gamma3, self.gamma4) <= 0:
            raise ValueError("protocol gains must be positive")
        if not 0 < self.p < 1 < self.q:
            raise ValueError("need 0 < p < 1 < q")


def sig_pow(v, exponent: float) -> np.ndarray:
    """sign(v) |v|^exponent componentwise, with sign(0) = 0."""
    if exponent <= 0:
        raise ValueError("exponent must be positive")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.abs(v) ** exponent


def sign_bl(v, boundary_layer: float = 0.0) -> np.ndarray:
    """sign(v), or v / max(|v|, eps) componentwise when a boundary layer eps > 0 is set."""
    v = np.asarray(v, dtype=float)
    if boundary_layer > 0:
        return v / np.maximum(np.abs(v), boundary_layer)
    return np.sign(v)


def _check_invertible(m: np.ndarray) -> np.ndarray:
    """Smallest absolute eigenvalue of the symmetric part, per matrix."""
    sym = 0.5 * (m + np.swapaxes(m, -1, -2))
    return np.abs(np.linalg.eigvalsh(sym)).min(axis=-1)


def centralized_control(t: float, x, model: ObjectiveModel, gains: CentralizedGains) -> np.ndarray:
    """u = -gamma1 grad - hess^{-1} grad_t, evaluated with a linear solve."""
    x = np.asarray(x, dtype=float)
    H = model.hess(t, x)
    lam = np.linalg.eigvalsh(0.5 * (H + np.swapaxes(H, -1, -2)))[..., 0]
    if np.any(lam < SINGULAR_TOL):
        raise SingularHessian(f"Hessian min eigenvalue {float(np.min(lam)):.3e} at t={t}")
    ff = np.linalg.solve(H, model.grad_t(t, x)[..., None])[..., 0]
    return -gains.gamma1 * model.grad(t, x) - ff


def _as_stack(z_all) -> np.ndarray:
    if isinstance(z_all, np.ndarray):
        z = z_all.astype(float)
    else:
        shapes = {np.shape(m) for m in z_all}
        if len(shapes) != 1:
            raise ShapeMismatch(f"estimator matrices have differing shapes {sorted(shapes)}")
        z = np.array(z_all, dtype=float)
    return z


def estimator_rate_batch(z: np.ndarray, a_tilde: np.ndarray, gains: EstimatorGains,
                         boundary_layer: float = 0.0) -> np.ndarray:
    """zeta_dot for stacked estimates ``z`` of shape ``(B, N, n, n)``."""
    b, n_agents = z.shape[:2]
    flat = z.reshape(b, n_agents, -1)
    rate = kernels.coupling_sum(a_tilde, flat, gains.alpha1, gains.beta1, gains.gamma2,
                                gains.p, gains.q, 1, boundary_layer)
    return rate.reshape(z.shape)


def estimator_rate(z_all, balanced: BalancedGraph, gains: EstimatorGains,
                   boundary_layer: float = 0.0) -> np.ndarray:
    """zeta_dot_i = sum_j a_ij (-a1 sig^p(z_i - z_j) - b1 sig^q(z_i - z_j) - g2 sign(z_i - z_j)).

    The operators act entrywise on the matrix differences.
    """
    z = _as_stack(z_all)
    if z.ndim != 3 or z.shape[0] != balanced.a_tilde.shape[0]:
        raise ShapeMismatch(f"expected ({balanced.a_tilde.shape[0]}, n, n) estimates, got {z.shape}")
    return estimator_rate_batch(z[None], balanced.a_tilde, gains, boundary_layer)[0]


def solve_estimator(z: np.ndarray, v: np.ndarray) -> np.ndarray:
    """z^{-1} v over stacked matrices.

    A singular ``z`` is accepted only when ``v`` lies in its range; the
    minimum-norm solution is used there.  The ninth Example 2 objective has
    a zero Hessian direction, so its estimate starts singular at t = 0 while its mixed
    partial vanishes along that direction.
    """
    small = _check_invertible(z) < SINGULAR_TOL
    if not small.any():
        return np.linalg.solve(z, v[..., None])[..., 0]
    out = np.empty_like(v)
    ok = ~small
    if ok.any():
        out[ok] = np.linalg.solve(z[ok], v[ok][..., None])[..., 0]
    zs, vs = z[small], v[small]
    sol = np.einsum("...ij,...j->...i", np.linalg.pinv(zs, rcond=1e-12), vs)
    resid = np.abs(np.einsum("...ij,...j->...i", zs, sol) - vs).max(axis=-1)
    if np.any(resid > SINGULAR_TOL * (1.0 + np.abs(vs).max(axis=-1))):
        raise SingularEstimatorMatrix("estimator matrix is singular and the feed-forward term leaves its range")
    out[small] = sol
    return out


def distributed_drift(t: float, x: np.ndarray, z: np.ndarray, models: Sequence[ObjectiveModel],
                      a_tilde: np.ndarray, gains: DistributedGains) -> np.ndarray:
    """u_i^d for all agents; ``x`` is ``(B, N, n)`` and ``z`` is ``(B, N, n, n)``."""
    coupling = kernels.coupling_sum(a_tilde, x, gains.alpha2, gains.beta2, gains.gamma3,
                                    gains.p, gains.q, 0, 0.0)
    grad = np.empty_like(x)
    grad_t = np.empty_like(x)
    for i, m in enumerate(models):
        grad[:, i] = m.grad(t, x[:, i])
        grad_t[:, i] = m.grad_t(t, x[:, i])
    return coupling - gains.gamma4 * grad - solve_estimator(z, grad_t)


def distributed_control(i: int, t: float, x_all, z_i, model_i: ObjectiveModel,
                        balanced: BalancedGraph, gains: DistributedGains) -> np.ndarray:
    """Control of agent ``i`` from its neighbours' states and its own estimate."""
    x = np.asarray(x_all, dtype=float)
    eps = x[i] - x
    term = -gains.alpha2 * sig_pow(eps, gains.p) - gains.beta2 * sig_pow(eps, gains.q) - gains.gamma3 * eps
    u = balanced.a_tilde[i] @ term - gains.gamma4 * model_i.grad(t, x[i])
    z_i = np.asarray(z_i, dtype=float)
    return u - solve_estimator(z_i[None], model_i.grad_t(t, x[i])[None])[0]
