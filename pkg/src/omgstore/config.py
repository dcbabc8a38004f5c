"""JSON configuration: schema validation and construction of simulation objects."""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema

from .costs import (
    Balancing,
    CostSpec,
    Series,
    SubgradientBounds,
    SupportBounds,
    cost_from_dict,
    global_subgradient_bounds,
)
from .errors import ConfigError, DegenerateSlope, EmptyInterval
from .policies import ClairvoyantPolicy, GreedyPolicy, NoStoragePolicy, OmgPolicy
from .processes import IidSpec, MarkovChain, PointMass, SyntheticWindPrice, Trace, dist_from_dict, load_trace
from .sim import SimConfig
from .storage import InflowSet, StorageParams, validate_storage
from .tuning import DEFAULT_W_CEILING, OmgParams, check_params, subopt_bound, tune

_num = {"type": "number"}
_int = {"type": "integer"}

_schedule = {
    "oneOf": [
        _num,
        {"type": "object", "additionalProperties": False, "required": ["kind", "value"],
         "properties": {"kind": {"const": "constant"}, "value": _num}},
        {"type": "object", "additionalProperties": False, "required": ["kind", "day", "night"],
         "properties": {"kind": {"const": "day_night"}, "day": _num, "night": _num,
                        "steps_per_hour": {"type": "integer", "minimum": 1}}},
        {"type": "object", "additionalProperties": False, "required": ["kind", "values"],
         "properties": {"kind": {"const": "series"}, "values": {"type": "array", "items": _num, "minItems": 1}}},
    ]
}

_supports = {
    "type": "object", "additionalProperties": False,
    "required": ["delta_min", "delta_max", "price_min", "price_max"],
    "properties": {k: _num for k in ("delta_min", "delta_max", "price_min", "price_max")},
}

_dist = {
    "oneOf": [
        {"type": "object", "additionalProperties": False, "required": ["dist", "sigma"],
         "properties": {"dist": {"const": "laplace"}, "mean": _num, "sigma": _num}},
        {"type": "object", "additionalProperties": False, "required": ["dist", "lo", "hi"],
         "properties": {"dist": {"const": "uniform"}, "lo": _num, "hi": _num}},
        {"type": "object", "additionalProperties": False, "required": ["dist", "v"],
         "properties": {"dist": {"const": "point"}, "v": _num}},
        {"type": "object", "additionalProperties": False, "required": ["dist", "samples"],
         "properties": {"dist": {"const": "empirical"},
                        "samples": {"type": "array", "items": _num, "minItems": 1}}},
    ]
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["storage", "cost", "process", "sim"],
    "properties": {
        "storage": {
            "type": "object", "additionalProperties": False,
            "required": ["lambda", "s_min", "s_max", "u_min", "u_max"],
            "properties": {k: _num for k in ("lambda", "s_min", "s_max", "u_min", "u_max", "mu_c", "mu_d")},
        },
        "cost": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["kind"],
                 "properties": {"kind": {"enum": ["arbitrage", "colocated"]}}},
                {"type": "object", "additionalProperties": False, "required": ["kind"],
                 "properties": {"kind": {"const": "balancing"}, "q_plus": _schedule, "q_minus": _schedule}},
                {"type": "object", "additionalProperties": False, "required": ["kind"],
                 "properties": {"kind": {"const": "day_night_deficit"}, "day_multiplier": _num,
                                "base_rate": _num, "steps_per_hour": {"type": "integer", "minimum": 1}}},
            ]
        },
        "inflow": {
            "type": "object", "additionalProperties": False, "required": ["f_min", "f_max"],
            "properties": {"f_min": _num, "f_max": _num},
        },
        "process": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["kind"],
                 "properties": {"kind": {"const": "iid"}, "delta": _dist, "price": _dist,
                                "supports": _supports,
                                "joint": {"type": "array", "minItems": 1,
                                          "items": {"type": "array", "items": _num,
                                                    "minItems": 2, "maxItems": 2}}}},
                {"type": "object", "additionalProperties": False,
                 "required": ["kind", "transition", "emissions"],
                 "properties": {"kind": {"const": "markov"},
                                "transition": {"type": "array", "items": {"type": "array", "items": _num}},
                                "emissions": {"type": "array", "items": {"type": "array", "items": _num,
                                                                         "minItems": 2, "maxItems": 2}},
                                "initial_state": {"type": "integer", "minimum": 0},
                                "return_state": {"type": "integer", "minimum": 0}}},
                {"type": "object", "additionalProperties": False, "required": ["kind", "path"],
                 "properties": {"kind": {"const": "trace"}, "path": {"type": "string"},
                                "supports": _supports}},
                {"type": "object", "additionalProperties": False, "required": ["kind"],
                 "properties": {"kind": {"const": "synthetic_wind_price"},
                                **{k: _num for k in ("sigma_d", "clip_sigmas", "price_mean",
                                                     "price_amplitude", "price_noise",
                                                     "price_min", "price_max")},
                                "steps_per_hour": {"type": "integer", "minimum": 1}}},
            ]
        },
        "policies": {
            "type": "array",
            "items": {
                "oneOf": [
                    {"type": "object", "additionalProperties": False, "required": ["kind"],
                     "properties": {"kind": {"const": "omg"}, "name": {"type": "string"},
                                    "method": {"enum": ["maxw", "mins"]},
                                    "gamma": _num, "w": _num,
                                    "w_ceiling": {"type": "number", "exclusiveMinimum": 0},
                                    "enforce_level_constraint": {"type": "boolean"}}},
                    {"type": "object", "additionalProperties": False, "required": ["kind"],
                     "properties": {"kind": {"enum": ["greedy", "no_storage"]}, "name": {"type": "string"}}},
                    {"type": "object", "additionalProperties": False, "required": ["kind"],
                     "properties": {"kind": {"const": "clairvoyant"}, "name": {"type": "string"},
                                    "s_grid_points": {"type": "integer", "minimum": 3},
                                    "u_grid_points": {"type": "integer", "minimum": 3}}},
                ]
            },
        },
        "sim": {
            "type": "object", "additionalProperties": False, "required": ["T", "s1"],
            "properties": {"T": {"type": "integer", "minimum": 1}, "s1": _num,
                           "seed": {"type": "integer", "minimum": 0},
                           "replications": {"type": "integer", "minimum": 1},
                           "keep_trajectory": {"type": "boolean"}},
        },
        "imbalance_sign": {"enum": [1, -1]},
        "steps_per_hour": {"type": "integer", "minimum": 1},
    },
}

TUNE_OUTPUT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["gamma", "w", "d_lo", "d_hi", "bound", "method"],
    "properties": {"gamma": _num, "w": _num, "d_lo": _num, "d_hi": _num, "bound": _num,
                   "method": {"enum": ["maxw", "mins", "manual"]}},
}

_opt_num = {"type": ["number", "null"]}
SIM_OUTPUT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["seed", "streams", "T", "no_storage_mean", "policies"],
    "properties": {
        "seed": _int, "streams": {"type": "array", "items": _int}, "T": _int,
        "no_storage_mean": _num,
        "policies": {"type": "object", "additionalProperties": {
            "type": "object", "additionalProperties": False,
            "required": ["name", "costs", "mean", "se", "violations", "aborted"],
            "properties": {
                "name": {"type": "string"},
                # aborted replications carry NaN costs, emitted as null
                "costs": {"type": "array", "items": _opt_num},
                "mean": _opt_num, "se": _opt_num, "violations": _int,
                "aborted": {"type": "array", "items": {"type": "string"}},
                "bound": _opt_num, "markov_bound": _opt_num,
                "vos": {"type": ["object", "null"]},
            },
        }},
    },
}


def validate_config(doc: dict) -> dict:
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    return doc


def load_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    doc = validate_config(doc)
    doc.setdefault("_base_dir", str(Path(path).resolve().parent))
    return doc


def _supports(d):
    return SupportBounds(**{k: float(v) for k, v in d.items()}) if d else None


def build_process(d: dict, base_dir: str = ".", require_price: bool = False):
    kind = d["kind"]
    if kind == "iid":
        joint = tuple(tuple(map(float, pair)) for pair in d["joint"]) if "joint" in d else None
        return IidSpec(dist_from_dict(d["delta"]) if "delta" in d else PointMass(0.0),
                       dist_from_dict(d["price"]) if "price" in d else PointMass(0.0),
                       _supports(d.get("supports")), joint)
    if kind == "markov":
        return MarkovChain(tuple(tuple(map(float, r)) for r in d["transition"]),
                           tuple(tuple(map(float, e)) for e in d["emissions"]),
                           int(d.get("initial_state", 0)), d.get("return_state"))
    if kind == "trace":
        path = Path(d["path"])
        if not path.is_absolute():
            path = Path(base_dir) / path
        tr = load_trace(path, require_price=require_price)
        if "supports" in d:
            tr = Trace(tr.t, tr.delta, tr.price, tr.q_plus, tr.q_minus, _supports(d["supports"]))
        return tr
    if kind == "synthetic_wind_price":
        return SyntheticWindPrice(**{k: v for k, v in d.items() if k != "kind"})
    raise ConfigError(f"unknown process kind {kind!r}")


def build_cost(doc: dict, process) -> CostSpec:
    cost = cost_from_dict(doc["cost"], doc.get("steps_per_hour", 1))
    if isinstance(process, Trace) and process.q_plus is not None and isinstance(cost, Balancing):
        cost = Balancing(Series(process.q_plus), Series(process.q_minus))
    return cost


def _supports_for(process, sign: int) -> SupportBounds:
    sb = process.supports
    if sign == -1:
        sb = SupportBounds(-sb.delta_max, -sb.delta_min, sb.price_min, sb.price_max)
    return sb


def build_omg_params(doc: dict, storage, cost, process, inflow, method=None, entry=None) -> OmgParams:
    entry = entry or {}
    bounds = global_subgradient_bounds(cost, _supports_for(process, doc.get("imbalance_sign", 1)),
                                       storage, inflow)
    if "gamma" in entry or "w" in entry:
        if not ("gamma" in entry and "w" in entry):
            raise ConfigError("explicit OMG parameters need both gamma and w")
        g, w = float(entry["gamma"]), float(entry["w"])
        params = OmgParams(g, w, bounds, subopt_bound(storage, g, w), "manual")
        try:
            check_params(storage, params)
        except (EmptyInterval, DegenerateSlope) as exc:
            raise ConfigError(f"explicit OMG parameters inadmissible: {exc}") from None
        return params
    method = method or entry.get("method", "maxw")
    return tune(storage, bounds, method, w_ceiling=entry.get("w_ceiling", DEFAULT_W_CEILING))


def build_components(doc: dict):
    storage = validate_storage(StorageParams.from_dict(doc["storage"]))
    inflow = InflowSet(**doc["inflow"]) if "inflow" in doc else InflowSet()
    needs_price = doc["cost"]["kind"] in ("arbitrage", "colocated")
    process = build_process(doc["process"], doc.get("_base_dir", "."), needs_price)
    cost = build_cost(doc, process)
    return storage, inflow, process, cost


def build_sim_config(doc: dict, seed=None, replications=None, enforce_level=False,
                     method=None, threads=None) -> SimConfig:
    storage, inflow, process, cost = build_components(doc)
    policies = []
    for entry in doc.get("policies", [{"kind": "omg"}, {"kind": "greedy"}, {"kind": "no_storage"}]):
        kind = entry["kind"]
        name = entry.get("name", kind)
        if kind == "omg":
            params = build_omg_params(doc, storage, cost, process, inflow, method, entry)
            policies.append(OmgPolicy(params, enforce_level or entry.get("enforce_level_constraint", False), name))
        elif kind == "greedy":
            policies.append(GreedyPolicy(name))
        elif kind == "no_storage":
            policies.append(NoStoragePolicy(name))
        else:
            policies.append(ClairvoyantPolicy(entry.get("s_grid_points", 401),
                                              entry.get("u_grid_points", 201), name))
    sim = doc["sim"]
    return SimConfig(
        storage=storage, cost=cost, process=process, policies=tuple(policies),
        T=int(sim["T"]), s1=float(sim["s1"]),
        seed=int(seed if seed is not None else sim.get("seed", 0)),
        replications=int(replications if replications is not None else sim.get("replications", 1)),
        inflow=inflow, imbalance_sign=int(doc.get("imbalance_sign", 1)),
        keep_trajectory=bool(sim.get("keep_trajectory", False)), threads=threads,
    )
