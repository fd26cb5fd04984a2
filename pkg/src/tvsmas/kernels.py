"""Backend dispatch for the hot kernels.

The Cython extension is used when it was built; otherwise the numpy
reference in :mod:`tvsmas._kernels_py` is selected at import.
"""

from __future__ import annotations

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

COMPILED_AVAILABLE = _compiled is not None
_active = _compiled if COMPILED_AVAILABLE else _kernels_py


def backend() -> str:
    return "compiled" if _active is _compiled and _compiled is not None else "python"


def use_backend(name: str) -> str:
    """Switch to ``"compiled"`` or ``"python"``; returns the previous backend name."""
    global _active
    prev = backend()
    if name == "python":
        _active = _kernels_py
    elif name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built")
        _active = _compiled
    else:
        raise ValueError(f"unknown backend {name!r}")
    return prev


def coupling_sum(weights, states, alpha, beta, gamma, p, q, third, eps=0.0):
    return _active.coupling_sum(weights, states, float(alpha), float(beta), float(gamma),
                                float(p), float(q), int(third), float(eps))


def max_pair_excess(values, points, slope):
    return _active.max_pair_excess(values, points, float(slope))
