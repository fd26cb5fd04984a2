"""Time-varying objective models with analytic derivatives.

Every model evaluates on ``x`` of shape ``(..., n)`` so whole ensembles of
realizations can be pushed through one call.  Finite differences live only
in :func:`check_derivatives`; protocols never see them.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import EmptySample, NonFiniteInput

# --------------------------------------------------------------------------
# coefficient functions of time


@dataclass(frozen=True)
class Term:
    """One scaled elementary function of ``t``.

    kinds: ``const``, ``exp`` (e^{-a t}), ``sin`` (sin(pi a t)), ``cos``
    (cos(pi a t)), ``tanh`` (tanh(a t)) and ``rational`` ((a t + b)/(c t + d)).
    """

    kind: str
    scale: float = 1.0
    a: float = 1.0
    b: float = 0.0
    c: float = 0.0
    d: float = 1.0

    KINDS = ("const", "exp", "sin", "cos", "tanh", "rational")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown coefficient kind {self.kind!r}")

    def value(self, t: float) -> float:
        k, a = self.kind, self.a
        if k == "const":
            v = 1.0
        elif k == "exp":
            v = math.exp(-a * t)
        elif k == "sin":
            v = math.sin(math.pi * a * t)
        elif k == "cos":
            v = math.cos(math.pi * a * t)
        elif k == "tanh":
            v = math.tanh(a * t)
        else:
            v = (a * t + self.b) / (self.c * t + self.d)
        return self.scale * v

    def rate(self, t: float) -> float:
        k, a = self.kind, self.a
        if k == "const":
            v = 0.0
        elif k == "exp":
            v = -a * math.exp(-a * t)
        elif k == "sin":
            v = math.pi * a * math.cos(math.pi * a * t)
        elif k == "cos":
            v = -math.pi * a * math.sin(math.pi * a * t)
        elif k == "tanh":
            v = a * (1.0 - math.tanh(a * t) ** 2)
        else:
            den = self.c * t + self.d
            v = (a * self.d - self.b * self.c) / (den * den)
        return self.scale * v


@dataclass(frozen=True)
class TimeFunction:
    """A sum of :class:`Term` objects."""

    terms: tuple[Term, ...] = ()

    def value(self, t: float) -> float:
        return math.fsum(term.value(t) for term in self.terms)

    def rate(self, t: float) -> float:
        return math.fsum(term.rate(t) for term in self.terms)

    def __add__(self, other: TimeFunction) -> TimeFunction:
        return TimeFunction(self.terms + coef(other).terms)

    @classmethod
    def from_json(cls, obj) -> TimeFunction:
        """Numbers, single term dicts, or lists of either."""
        if isinstance(obj, (int, float)):
            return const(float(obj))
        if isinstance(obj, dict):
            return cls((Term(**obj),))
        if isinstance(obj, list):
            out = cls()
            for item in obj:
                out = out + cls.from_json(item)
            return out
        raise ValueError(f"cannot build a coefficient from {obj!r}")


def const(v: float) -> TimeFunction:
    return TimeFunction((Term("const", v),)) if v != 0 else TimeFunction()


def expo(scale: float = 1.0, a: float = 1.0) -> TimeFunction:
    return TimeFunction((Term("exp", scale, a),))


def sinpi(scale: float = 1.0, a: float = 1.0) -> TimeFunction:
    return TimeFunction((Term("sin", scale, a),))


def cospi(scale: float = 1.0, a: float = 1.0) -> TimeFunction:
    return TimeFunction((Term("cos", scale, a),))


def tanh(scale: float = 1.0, a: float = 1.0) -> TimeFunction:
    return TimeFunction((Term("tanh", scale, a),))


def rational(a: float, b: float, c: float, d: float, scale: float = 1.0) -> TimeFunction:
    return TimeFunction((Term("rational", scale, a, b, c, d),))


def coef(v) -> TimeFunction:
    return v if isinstance(v, TimeFunction) else const(float(v))


# --------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class Bundle:
    f: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    grad_t: np.ndarray
    hess_t: np.ndarray


class ObjectiveModel(ABC):
    """f(t, x) with gradient, Hessian, mixed partial d/dt grad and d/dt Hessian."""

    name: str = "model"
    dim: int

    @abstractmethod
    def f(self, t: float, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def grad(self, t: float, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def hess(self, t: float, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def grad_t(self, t: float, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def hess_t(self, t: float, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class SeparableQuadratic(ObjectiveModel):
    """sum_k 1/2 w_k(t) (x_k - r_k(t))^2 + sum_k b_k(t) x_k + c(t).

    Covers both bundled examples and the ``tracking-quadratic`` family; the
    linear ``b`` part is needed for the ninth Example 2 objective.
    """

    w: tuple[TimeFunction, ...]
    r: tuple[TimeFunction, ...]
    b: tuple[TimeFunction, ...] = ()
    c: TimeFunction = field(default_factory=TimeFunction)
    name: str = "tracking-quadratic"

    def __post_init__(self):
        n = len(self.w)
        object.__setattr__(self, "w", tuple(coef(v) for v in self.w))
        object.__setattr__(self, "r", tuple(coef(v) for v in self.r))
        object.__setattr__(self, "b", tuple(coef(v) for v in self.b) or tuple(TimeFunction() for _ in range(n)))
        object.__setattr__(self, "c", coef(self.c))
        if len(self.r) != n or len(self.b) != n:
            raise ValueError("w, r and b must have the same length")

    @property
    def dim(self) -> int:
        return len(self.w)

    def _coefs(self, t: float):
        w = np.array([v.value(t) for v in self.w])
        r = np.array([v.value(t) for v in self.r])
        b = np.array([v.value(t) for v in self.b])
        return w, r, b

    def _rates(self, t: float):
        wd = np.array([v.rate(t) for v in self.w])
        rd = np.array([v.rate(t) for v in self.r])
        bd = np.array([v.rate(t) for v in self.b])
        return wd, rd, bd

    def f(self, t, x):
        w, r, b = self._coefs(t)
        x = np.asarray(x, dtype=float)
        return 0.5 * np.sum(w * (x - r) ** 2, axis=-1) + np.sum(b * x, axis=-1) + self.c.value(t)

    def grad(self, t, x):
        w, r, b = self._coefs(t)
        return w * (np.asarray(x, dtype=float) - r) + b

    def hess(self, t, x):
        w, _, _ = self._coefs(t)
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.diag(w), x.shape[:-1] + (self.dim, self.dim)).copy()

    def grad_t(self, t, x):
        w, r, _ = self._coefs(t)
        wd, rd, bd = self._rates(t)
        return wd * (np.asarray(x, dtype=float) - r) - w * rd + bd

    def hess_t(self, t, x):
        wd, _, _ = self._rates(t)
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.diag(wd), x.shape[:-1] + (self.dim, self.dim)).copy()


@dataclass(frozen=True)
class CallableModel(ObjectiveModel):
    """Wraps user callables; each takes ``(t, x)`` with ``x`` of shape ``(n,)``."""

    dim: int
    f_fn: Callable
    grad_fn: Callable
    hess_fn: Callable
    grad_t_fn: Callable
    hess_t_fn: Callable
    name: str = "callable"

    def _map(self, fn, t, x, tail):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, self.dim)
        out = np.array([fn(t, row) for row in flat], dtype=float)
        return out.reshape(x.shape[:-1] + tail)

    def f(self, t, x):
        return self._map(self.f_fn, t, x, ())

    def grad(self, t, x):
        return self._map(self.grad_fn, t, x, (self.dim,))

    def hess(self, t, x):
        return self._map(self.hess_fn, t, x, (self.dim, self.dim))

    def grad_t(self, t, x):
        return self._map(self.grad_t_fn, t, x, (self.dim,))

    def hess_t(self, t, x):
        return self._map(self.hess_t_fn, t, x, (self.dim, self.dim))


def tracking_quadratic(w, r, c=0.0, b=None, name: str = "tracking-quadratic") -> SeparableQuadratic:
    """1/2 sum_k w_k(t)(x_k - r_k(t))^2 + c(t); ``w``, ``r`` accept numbers or TimeFunctions."""
    return SeparableQuadratic(tuple(w), tuple(r), tuple(b) if b is not None else (), coef(c), name)


def model_from_json(obj: dict) -> SeparableQuadratic:
    w = [TimeFunction.from_json(v) for v in obj["w"]]
    r = [TimeFunction.from_json(v) for v in obj["r"]]
    b = [TimeFunction.from_json(v) for v in obj.get("b", [])]
    c = TimeFunction.from_json(obj.get("c", 0.0))
    return SeparableQuadratic(tuple(w), tuple(r), tuple(b), c, obj.get("name", "tracking-quadratic"))


# --------------------------------------------------------------------------
# built-in registry


def example1() -> SeparableQuadratic:
    # (e^-t + 1)/2 (x1 - cos pi t)^2 + (2e^-t + 1)/2 (x2 - sin pi t)^2
    return SeparableQuadratic(
        w=(expo() + const(1.0), expo(2.0) + const(1.0)),
        r=(cospi(), sinpi()),
        name="example1",
    )


def _table2() -> dict[int, SeparableQuadratic]:
    zero = const(0.0)
    rows = {
        1: dict(w=(expo() + const(0.5), expo() + const(1.0)), r=(const(1.0), const(2.0))),
        2: dict(w=(const(1.0), rational(1, 4, 2, 4)), r=(tanh(), zero)),
        3: dict(w=(const(2.0), const(1.0)), r=(sinpi(), sinpi())),
        4: dict(w=(const(1.0), const(1.0)), r=(cospi(), sinpi())),
        5: dict(w=(const(1.0), expo(2.0) + const(1.0)), r=(cospi(), zero), c=sinpi()),
        6: dict(w=(const(1.0), rational(0, 1, 1, 2)), r=(expo(), zero), c=expo()),
        7: dict(w=(const(1.0), rational(0, 1, 1, 1)), r=(tanh(), const(1.0)), c=cospi(-1.0)),
        8: dict(w=(expo(), expo()), r=(const(-1.0), const(-2.0))),
        # row 9 is linear in x2 as printed: 0.5 (x2 - cos pi t)
        9: dict(w=(rational(1, 2, 1, 1), zero), r=(zero, zero), b=(zero, const(0.5)), c=cospi(-0.5)),
        10: dict(w=(const(1.0), rational(0, 1, 1, 1)), r=(cospi(), const(-1.0))),
        11: dict(w=(const(1.0), expo(2.0) + const(2.0 / 3.0)), r=(expo(-1.0), zero)),
        12: dict(w=(const(1.0), const(1.0)), r=(cospi(-1.0), sinpi())),
        13: dict(w=(const(2.0), const(1.0)), r=(sinpi(-1.0), cospi(-1.0))),
        14: dict(w=(expo(0.5, 2.0) + const(2.0), const(1.0)), r=(zero, sinpi())),
        15: dict(w=(const(1.0), rational(2, 3, 2, 2)), r=(cospi(), zero)),
    }
    out = {}
    for i, spec in rows.items():
        out[i] = SeparableQuadratic(
            spec["w"], spec["r"], spec.get("b", ()), spec.get("c", TimeFunction()), name=f"example2/f{i}"
        )
    return out


def _build_registry() -> dict[str, ObjectiveModel]:
    reg: dict[str, ObjectiveModel] = {"example1": example1()}
    for i, m in _table2().items():
        reg[m.name] = m
    return reg


REGISTRY: dict[str, ObjectiveModel] = _build_registry()
EXAMPLE2_NAMES = tuple(f"example2/f{i}" for i in range(1, 16))


def get_model(name: str) -> ObjectiveModel:
    try:
        return REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown objective {name!r}; known: {sorted(REGISTRY)}") from None


def example2_models() -> list[ObjectiveModel]:
    return [REGISTRY[n] for n in EXAMPLE2_NAMES]


# --------------------------------------------------------------------------
# evaluation and validation


def evaluate_bundle(model: ObjectiveModel, t: float, x) -> Bundle:
    x = np.asarray(x, dtype=float)
    if not (math.isfinite(t) and np.all(np.isfinite(x))):
        raise NonFiniteInput("t and x must be finite")
    if t < 0:
        raise ValueError("t must be nonnegative")
    return Bundle(model.f(t, x), model.grad(t, x), model.hess(t, x), model.grad_t(t, x), model.hess_t(t, x))


def _rel(a, b) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(a)))))


def check_derivatives(model: ObjectiveModel, t: float, x, step: float = 1e-5) -> float:
    """Worst relative discrepancy between analytic derivatives and central differences.

    The scale floor of 1 keeps the measure meaningful at stationary points.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    eye = np.eye(n) * step
    fd_grad = np.array([(model.f(t, x + e) - model.f(t, x - e)) / (2 * step) for e in eye])
    fd_hess = np.array([(model.grad(t, x + e) - model.grad(t, x - e)) / (2 * step) for e in eye]).T
    fd_grad_t = (model.grad(t + step, x) - model.grad(t - step, x)) / (2 * step)
    fd_hess_t = (model.hess(t + step, x) - model.hess(t - step, x)) / (2 * step)
    return max(
        _rel(model.grad(t, x), fd_grad),
        _rel(model.hess(t, x), fd_hess),
        _rel(model.grad_t(t, x), fd_grad_t),
        _rel(model.hess_t(t, x), fd_hess_t),
    )


def grid_points(values: Sequence[float], dim: int) -> np.ndarray:
    """Cartesian product of a per-coordinate grid, shape ``(len(values)**dim, dim)``."""
    axes = np.meshgrid(*([np.asarray(values, dtype=float)] * dim), indexing="ij")
    return np.stack([a.ravel() for a in axes], axis=-1)


DEFAULT_T_SAMPLES = np.round(np.arange(0, 101) * 0.1, 10)
DEFAULT_X_VALUES = np.arange(-10.0, 11.0)


@dataclass(frozen=True)
class ConstantEstimates:
    """Sampled constants; every field is a bound over the sample only."""

    l1_hat: float
    h_hat: float
    l2_hat: float
    L2_hat: float
    L3_hat: float
    L4_hat: float
    L5_hat: float
    L_H_hat: float
    hessian_sum_defect: float
    sample_count: int

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _spec_norm(m: np.ndarray) -> np.ndarray:
    return np.linalg.norm(m, ord=2, axis=(-2, -1))


def _max_pairwise_matrix_gap(mats: np.ndarray) -> float:
    flat = mats.reshape(mats.shape[0], -1)
    uniq = np.unique(np.round(flat, 14), axis=0).reshape((-1,) + mats.shape[1:])
    if len(uniq) < 2:
        return 0.0
    i, j = np.triu_indices(len(uniq), k=1)
    return float(_spec_norm(uniq[i] - uniq[j]).max())


def estimate_constants(models: Sequence[ObjectiveModel], t_samples=None, x_samples=None) -> ConstantEstimates:
    """Sample-based estimates of the convexity and Lipschitz constants.

    Slopes are the largest sampled curvature (``L2`` from the Hessian, ``L4``
    and ``l2`` from the Hessian time-derivative), which is the tightest slope
    that needs no offset for pairs drawn from one model.  Offsets ``L3`` and
    ``L5`` are then the least offsets covering every cross-model pair at a
    common time.

    Parameters
    ----------
    models : sequence of ObjectiveModel
    t_samples : array_like, optional
        Times; defaults to 0, 0.1, ..., 10.
    x_samples : array_like, optional
        Either points of shape ``(P, n)`` or a 1-D per-coordinate grid whose
        Cartesian product is taken; defaults to -10, -9, ..., 10.
    """
    if not models:
        raise EmptySample("no models given")
    n = models[0].dim
    ts = DEFAULT_T_SAMPLES if t_samples is None else np.atleast_1d(np.asarray(t_samples, dtype=float))
    xs = DEFAULT_X_VALUES if x_samples is None else np.asarray(x_samples, dtype=float)
    pts = grid_points(xs, n) if xs.ndim == 1 else xs
    if ts.size == 0 or pts.size == 0:
        raise EmptySample("empty t or x sample")

    h_min = np.inf
    hess_max = hess_t_max = 0.0
    L_H = defect = 0.0
    per_t = []
    for t in ts:
        H = np.stack([m.hess(t, pts) for m in models])  # (N, P, n, n)
        Ht = np.stack([m.hess_t(t, pts) for m in models])
        G = np.stack([m.grad(t, pts) for m in models])
        Gt = np.stack([m.grad_t(t, pts) for m in models])
        sym = 0.5 * (H + np.swapaxes(H, -1, -2))
        h_min = min(h_min, float(np.linalg.eigvalsh(sym)[..., 0].min()))
        hess_max = max(hess_max, float(_spec_norm(H).max()))
        hess_t_max = max(hess_t_max, float(_spec_norm(Ht).max()))
        L_H = max(L_H, _max_pairwise_matrix_gap(Ht.reshape((-1, n, n))))
        defect = max(defect, _max_pairwise_matrix_gap(H.sum(axis=0)))
        per_t.append((G.reshape(-1, n), Gt.reshape(-1, n)))

    tiled = np.tile(pts, (len(models), 1))
    L3 = L5 = 0.0
    for G, Gt in per_t:
        L3 = max(L3, kernels.max_pair_excess(G, tiled, hess_max))
        L5 = max(L5, kernels.max_pair_excess(Gt, tiled, hess_t_max))
    h_hat = max(0.0, h_min)
    return ConstantEstimates(
        l1_hat=h_hat,
        h_hat=h_hat,
        l2_hat=hess_t_max,
        L2_hat=hess_max,
        L3_hat=max(0.0, L3),
        L4_hat=hess_t_max,
        L5_hat=max(0.0, L5),
        L_H_hat=L_H,
        hessian_sum_defect=defect,
        sample_count=int(ts.size * pts.shape[0] * len(models)),
    )
