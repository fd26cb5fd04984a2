"""Pure numpy reference implementations of the hot kernels.

Semantics here define the contract; the compiled module must agree to
roundoff.
"""

from __future__ import annotations

import numpy as np


def _sig(d, m):
    return np.sign(d) * np.abs(d) ** m


def coupling_sum(weights, states, alpha, beta, gamma, p, q, third, eps):
    """out[b, i, k] = sum_j w_ij (-alpha sig^p(d) - beta sig^q(d) - gamma g(d)), d = s_bik - s_bjk.

    ``third`` selects g: 0 is the identity, 1 is sign (or v/max(|v|, eps) when eps > 0).
    """
    w = np.ascontiguousarray(weights, dtype=float)
    s = np.ascontiguousarray(states, dtype=float)
    d = s[:, :, None, :] - s[:, None, :, :]
    if third == 0:
        g = d
    elif eps > 0:
        g = d / np.maximum(np.abs(d), eps)
    else:
        g = np.sign(d)
    term = -alpha * _sig(d, p) - beta * _sig(d, q) - gamma * g
    return np.sum(w[None, :, :, None] * term, axis=2)


def max_pair_excess(values, points, slope, chunk=512):
    """max over pairs a < b of ||v_a - v_b|| - slope * ||x_a - x_b||; -inf with fewer than two rows."""
    v = np.ascontiguousarray(values, dtype=float)
    x = np.ascontiguousarray(points, dtype=float)
    n = v.shape[0]
    best = -np.inf
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        dv = np.sqrt(((v[start:stop, None, :] - v[None, :, :]) ** 2).sum(-1))
        dx = np.sqrt(((x[start:stop, None, :] - x[None, :, :]) ** 2).sum(-1))
        ex = dv - slope * dx
        rows = np.arange(start, stop)[:, None]
        ex[np.arange(n)[None, :] <= rows] = -np.inf
        if ex.size:
            best = max(best, float(ex.max()))
    return best
