"""Communication topology: validation, detail-balance reweighting and
Laplacian spectra."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from importlib import resources

import numpy as np
from scipy.optimize import lsq_linear

from .errors import AsymmetricInput, InvalidGraph, NotDetailBalanced, NotStronglyConnected

EIG_TOL = 1e-10
SYM_TOL = 1e-12


class BalanceMode(str, Enum):
    STRICT = "strict"
    LEAST_SQUARES = "least-squares"
    SYMMETRIZE = "symmetrize"


@dataclass(frozen=True)
class WeightedDigraph:
    """Adjacency ``weights[i, j]`` is the weight of the edge j -> i used by agent i."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
            raise InvalidGraph(f"adjacency must be a square matrix, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise InvalidGraph("adjacency contains non-finite entries")
        if np.any(w < 0):
            raise InvalidGraph("adjacency weights must be nonnegative")
        if np.any(np.diag(w) != 0):
            raise InvalidGraph("adjacency diagonal must be zero")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_agents(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class BalancedGraph:
    xi: np.ndarray
    a_tilde: np.ndarray
    residual: float
    mode: BalanceMode


@dataclass(frozen=True)
class SpectralSummary:
    laplacian: np.ndarray
    eigenvalues: np.ndarray
    lambda2: float
    lambda_max: float


def load_adjacency_csv(path) -> WeightedDigraph:
    return WeightedDigraph(np.loadtxt(path, delimiter=",", ndmin=2))


def example2_graph() -> WeightedDigraph:
    """The 15-agent adjacency matrix shipped with the Example 2 configuration."""
    with resources.files("tvsmas.data").joinpath("example2_adjacency.csv").open() as fh:
        return WeightedDigraph(np.loadtxt(fh, delimiter=",", ndmin=2))


def _reach(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    queue = deque([start])
    while queue:
        k = queue.popleft()
        for m in np.flatnonzero(adj[k]):
            if not seen[m]:
                seen[m] = True
                queue.append(m)
    return seen


def is_strongly_connected(g: WeightedDigraph) -> bool:
    """Forward search plus a search on the transpose, both from node 0."""
    adj = g.weights > 0
    return bool(_reach(adj, 0).all() and _reach(adj.T, 0).all())


def balance_defect(weights: np.ndarray, xi: np.ndarray) -> float:
    """Sum over all ordered pairs of (xi_i a_ij - xi_j a_ji)^2."""
    scaled = xi[:, None] * weights
    return float(np.sum((scaled - scaled.T) ** 2))


def _strict_xi(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    for i, j in zip(*np.nonzero((a > 0) != (a.T > 0))):
        raise NotDetailBalanced((int(i), int(j)), f"edge ({i}, {j}) has no reverse edge")
    xi = np.full(n, np.nan)
    xi[0] = 1.0
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(a[i] > 0):
            if np.isnan(xi[j]):
                xi[j] = xi[i] * a[i, j] / a[j, i]
                queue.append(j)
    if np.isnan(xi).any():
        raise NotStronglyConnected("graph is not connected")
    scaled = xi[:, None] * a
    scale = np.maximum(np.abs(scaled), np.abs(scaled.T))
    bad = np.abs(scaled - scaled.T) > SYM_TOL * np.maximum(scale, 1.0)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise NotDetailBalanced((int(i), int(j)))
    return xi / xi.min()


def _least_squares_xi(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    rows = []
    for i in range(n):
        for j in range(i + 1, n):
            if a[i, j] > 0 or a[j, i] > 0:
                r = np.zeros(n)
                r[i] = a[i, j]
                r[j] = -a[j, i]
                rows.append(r)
    if not rows:
        return np.ones(n)
    # the objective is homogeneous of degree 2, so the optimum sits on min(xi) = 1
    sol = lsq_linear(np.array(rows), np.zeros(len(rows)), bounds=(1.0, np.inf), method="bvls")
    return sol.x / sol.x.min()


def detail_balance(g: WeightedDigraph, mode: BalanceMode | str = BalanceMode.LEAST_SQUARES) -> BalancedGraph:
    """Find weights ``xi`` with ``xi_i a_ij = xi_j a_ji`` and the symmetric ``a_tilde``.

    ``strict`` propagates ``xi`` along a spanning tree and then checks every
    edge, raising :class:`NotDetailBalanced` on the first inconsistency.
    ``least-squares`` minimizes the balance defect subject to ``min xi = 1``;
    ``symmetrize`` keeps ``xi = 1`` and averages ``a`` with its transpose.
    Outside strict mode ``a_tilde`` is the symmetric part of ``xi_i a_ij`` so
    the odd-coupling sums used by the protocols still vanish.
    """
    mode = BalanceMode(mode)
    if not is_strongly_connected(g):
        raise NotStronglyConnected("adjacency is not strongly connected")
    a = g.weights
    if mode is BalanceMode.STRICT:
        xi = _strict_xi(a)
        scaled = xi[:, None] * a
        return BalancedGraph(xi, 0.5 * (scaled + scaled.T), 0.0, mode)
    if mode is BalanceMode.LEAST_SQUARES:
        xi = _least_squares_xi(a)
    else:
        xi = np.ones(a.shape[0])
    scaled = xi[:, None] * a
    return BalancedGraph(xi, 0.5 * (scaled + scaled.T), balance_defect(a, xi), mode)


def laplacian_and_spectrum(w: np.ndarray) -> SpectralSummary:
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise AsymmetricInput(f"weights must be square, got shape {w.shape}")
    if np.max(np.abs(w - w.T), initial=0.0) > SYM_TOL * max(1.0, np.max(np.abs(w), initial=0.0)):
        raise AsymmetricInput("weight matrix is not symmetric")
    lap = np.diag(w.sum(axis=1)) - w
    eig = np.linalg.eigvalsh(lap)
    lam2 = float(eig[1]) if eig.size > 1 else 0.0
    return SpectralSummary(lap, eig, lam2, float(eig[-1]))


def reweighted_laplacian(b: BalancedGraph, exponent: float) -> SpectralSummary:
    """Laplacian spectrum of the entrywise power ``a_tilde ** exponent`` (0 stays 0)."""
    if exponent <= 0:
        raise ValueError("exponent must be positive")
    a = b.a_tilde
    w = np.zeros_like(a)
    pos = a > 0
    w[pos] = a[pos] ** exponent
    return laplacian_and_spectrum(w)


def notation_spectra(b: BalancedGraph, p: float, q: float) -> dict[str, float]:
    """lambda2 of the four reweighted Laplacians used by the bound formulas."""
    return {
        "lambda2_Lp": reweighted_laplacian(b, 2.0 / (p + 1.0)).lambda2,
        "lambda2_Lq": reweighted_laplacian(b, 2.0 / (q + 1.0)).lambda2,
        "lambda2_L2": reweighted_laplacian(b, 2.0).lambda2,
        "lambda2_L1": reweighted_laplacian(b, 1.0).lambda2,
    }
