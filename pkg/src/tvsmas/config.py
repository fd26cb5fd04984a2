"""JSON run configurations: schema validation, defaults and resolution into
runtime objects."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import graph as gr
from . import objectives as ob
from .errors import ConfigInvalid
from .montecarlo import EnsembleConfig
from .protocols import CentralizedGains, DistributedGains, EstimatorGains
from .sde import DiffusionSpec, make_diffusion

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_VEC = {"type": "array", "items": _NUM, "minItems": 1}
_COEF = {"anyOf": [_NUM, {"type": "object"}, {"type": "array"}]}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["mode", "objectives", "initial_states", "gains"],
    "properties": {
        "comment": {"type": "string"},
        "mode": {"enum": ["centralized", "distributed"]},
        "graph": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "comment": {"type": "string"},
                "matrix": {"type": "array", "items": _VEC, "minItems": 1},
                "file": {"type": "string"},
                "bundled": {"enum": ["example2"]},
                "balance_mode": {"enum": [m.value for m in gr.BalanceMode]},
            },
            "oneOf": [{"required": ["matrix"]}, {"required": ["file"]}, {"required": ["bundled"]}],
        },
        "objectives": {
            "type": "array",
            "minItems": 1,
            "items": {
                "anyOf": [
                    {"type": "string"},
                    {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["w", "r"],
                        "properties": {
                            "name": {"type": "string"},
                            "w": {"type": "array", "items": _COEF, "minItems": 1},
                            "r": {"type": "array", "items": _COEF, "minItems": 1},
                            "b": {"type": "array", "items": _COEF},
                            "c": _COEF,
                        },
                    },
                ]
            },
        },
        "initial_states": {"anyOf": [_VEC, {"type": "array", "items": _VEC, "minItems": 1}]},
        "gains": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: _POS for k in ("gamma1", "alpha1", "beta1", "gamma2", "alpha2", "beta2",
                                              "gamma3", "gamma4", "p", "q")},
        },
        "sde": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dt": _POS,
                "horizon": _POS,
                "diffusion": {"enum": ["example", "zero", "constant-diagonal"]},
                "diffusion_scale": _NUM,
                "diffusion_values": _VEC,
                "sigma_bar": _NONNEG,
                "noise": {"enum": ["shared", "independent"]},
                "boundary_layer": _NONNEG,
            },
        },
        "ensemble": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "M": {"type": "integer", "minimum": 1},
                "root_seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                "record_stride": {"type": "integer", "minimum": 1},
                "block_size": {"type": "integer", "minimum": 1},
            },
        },
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "comment": {"type": "string"},
                "theta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "constants": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {k: _NONNEG for k in ("l1", "l2", "h", "L1", "L2", "L3", "L4", "L5",
                                                         "h_d", "L_H")},
                },
                "sampling": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"t_samples": _VEC, "x_values": _VEC},
                },
            },
        },
        "targets": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "comment": {"type": "string"},
                "offset": _NUM,
                "tracking_window": {"type": "number", "minimum": 0},
                "consensus": _NUM,
                "tracking": _NUM,
                "estimator": _NUM,
                "T1": _NUM,
                "T2": _NUM,
            },
        },
    },
}

DEFAULTS = {
    "graph": {"balance_mode": "least-squares"},
    "sde": {"dt": 1e-3, "horizon": 10.0, "diffusion": "example", "diffusion_scale": 0.5, "noise": "shared",
            "boundary_layer": 0.0},
    "ensemble": {"M": 50, "root_seed": 0, "record_stride": 10, "block_size": 25},
    "analysis": {"theta": 0.01, "constants": {}},
}


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else copy.deepcopy(v)
    return out


def validate(doc: dict) -> dict:
    """Schema-check ``doc`` and return it with defaults filled in."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        e = errors[0]
        raise ConfigInvalid(e.message, _pointer(e.absolute_path))
    full = _merge(DEFAULTS, doc)
    if full["mode"] == "distributed" and "graph" not in doc:
        raise ConfigInvalid("distributed mode needs a graph section", "/graph")
    return full


def load(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"not valid JSON: {exc}") from None
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config: {exc}") from None
    return doc


def bundled(name: str) -> dict:
    return json.loads(resources.files("tvsmas.data").joinpath(f"{name}.json").read_text())


def apply_overrides(doc: dict, seed=None, dt=None, realizations=None, balance_mode=None,
                    boundary_layer=None) -> dict:
    doc = copy.deepcopy(doc)
    if seed is not None:
        doc.setdefault("ensemble", {})["root_seed"] = int(seed)
    if realizations is not None:
        doc.setdefault("ensemble", {})["M"] = int(realizations)
    if dt is not None:
        doc.setdefault("sde", {})["dt"] = float(dt)
    if boundary_layer is not None:
        doc.setdefault("sde", {})["boundary_layer"] = float(boundary_layer)
    if balance_mode is not None:
        doc.setdefault("graph", {})["balance_mode"] = balance_mode
    return doc


@dataclass
class Resolved:
    """A validated config turned into runtime objects."""

    config: dict
    models: list
    initial_states: np.ndarray
    diffusion: DiffusionSpec
    digraph: gr.WeightedDigraph | None = None
    balanced: gr.BalancedGraph | None = None
    centralized_gains: CentralizedGains | None = None
    estimator_gains: EstimatorGains | None = None
    distributed_gains: DistributedGains | None = None

    @property
    def mode(self) -> str:
        return self.config["mode"]

    @property
    def sigma_bar(self) -> float:
        return float(self.config["sde"].get("sigma_bar", self.diffusion.sigma_bar))

    def ensemble(self, threads: int = 1, keep_states: bool = False) -> EnsembleConfig:
        s, e = self.config["sde"], self.config["ensemble"]
        return EnsembleConfig(
            mode=self.mode, models=self.models, initial_states=self.initial_states, diffusion=self.diffusion,
            dt=s["dt"], horizon=s["horizon"], realizations=e["M"], root_seed=e["root_seed"],
            record_stride=e["record_stride"], centralized_gains=self.centralized_gains,
            estimator_gains=self.estimator_gains, distributed_gains=self.distributed_gains,
            balanced=self.balanced, noise=s["noise"], boundary_layer=s["boundary_layer"],
            block_size=e["block_size"], threads=threads, keep_states=keep_states,
        )


def _models(items) -> list:
    out = []
    for k, item in enumerate(items):
        try:
            out.append(ob.get_model(item) if isinstance(item, str) else ob.model_from_json(item))
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigInvalid(str(exc).strip("'\""), f"/objectives/{k}") from None
    if len({m.dim for m in out}) != 1:
        raise ConfigInvalid("objectives have differing dimensions", "/objectives")
    return out


def _digraph(g: dict, base: Path | None) -> gr.WeightedDigraph:
    try:
        if "bundled" in g:
            return gr.example2_graph()
        if "file" in g:
            p = Path(g["file"])
            if not p.is_absolute() and base is not None:
                p = base / p
            return gr.load_adjacency_csv(p)
        return gr.WeightedDigraph(np.array(g["matrix"], dtype=float))
    except (OSError, ValueError) as exc:
        raise ConfigInvalid(str(exc), "/graph") from None


def _gains(cls, gains: dict, keys, pointer="/gains"):
    missing = [k for k in keys if k not in gains]
    if missing:
        raise ConfigInvalid(f"missing gains {missing}", pointer)
    try:
        return cls(**{k: gains[k] for k in keys})
    except ValueError as exc:
        raise ConfigInvalid(str(exc), pointer) from None


def resolve(doc: dict, base: Path | None = None, need_graph_balance: bool = True) -> Resolved:
    cfg = validate(doc)
    models = _models(cfg["objectives"])
    n = models[0].dim
    x0 = np.array(cfg["initial_states"], dtype=float)
    s = cfg["sde"]
    try:
        diffusion = make_diffusion(s["diffusion"], n, s["diffusion_scale"], s.get("diffusion_values"))
    except ValueError as exc:
        raise ConfigInvalid(str(exc), "/sde/diffusion") from None
    res = Resolved(cfg, models, x0, diffusion)
    if cfg["mode"] == "centralized":
        if len(models) != 1:
            raise ConfigInvalid("centralized mode takes exactly one objective", "/objectives")
        if x0.shape != (n,):
            raise ConfigInvalid(f"initial state must be a vector of length {n}", "/initial_states")
        res.centralized_gains = _gains(CentralizedGains, cfg["gains"], ["gamma1"])
    else:
        if x0.shape != (len(models), n):
            raise ConfigInvalid(f"initial states must have shape ({len(models)}, {n})", "/initial_states")
        res.estimator_gains = _gains(EstimatorGains, cfg["gains"], ["alpha1", "beta1", "gamma2", "p", "q"])
        res.distributed_gains = _gains(DistributedGains, cfg["gains"],
                                       ["alpha2", "beta2", "gamma3", "gamma4", "p", "q"])
        res.digraph = _digraph(cfg["graph"], base)
        if res.digraph.n_agents != len(models):
            raise ConfigInvalid("graph size does not match the number of objectives", "/graph")
        if need_graph_balance:
            res.balanced = gr.detail_balance(res.digraph, cfg["graph"]["balance_mode"])
    return res
