"""Run configuration: defaults, JSON-schema validation and object builders."""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema

from .constraints import (
    ConstraintSpec,
    ScenarioPlan,
    build_scenario_spec,
    build_static_spec,
    harvest_interval,
)
from .gnn import init_model
from .graphs import generate_rgg_sequence
from .robustness import SweepConfig
from .tasks import SourceLocDataset, gen_dynamic_task, gen_source_localization, read_dataset
from .training import TrainConfig

SCHEMA_ID = "lipgnn/run-config/v1"

DEFAULTS = {
    "schema": SCHEMA_ID,
    "seed": 0,
    "task": {
        "kind": "source_localization",
        "n": 50,
        "communities": 5,
        "p_in": 0.8,
        "p_out": 0.1,
        "num_samples": 2000,
        "T": 8,
        "window": 1,
        "operator": "adjacency",
        "radius": 0.4,
        "steps": 20,
        "step_scale": 0.02,
        "groups": 4,
    },
    "model": {"hidden": [16, 16], "taps": 4, "nonlinearity": "relu", "readout": "flatten"},
    "train": {
        "method": "lipschitz",
        "step_size": 0.1,
        "schedule": "constant",
        "batch_size": 32,
        "epochs": 30,
        "readout_bound": None,
        "noise_sigma": 0.01,
        "pgd_epsilon": 0.0025,
        "pgd_steps": 10,
        "pgd_step_size": None,
    },
    "constraint": {
        "kind": "static",
        "c": 1.0,
        "layer_bounds": None,
        "epsilon": 0.1,
        "delta": 0.1,
        "m": None,
        "interval": None,
        "allow_undersampled": False,
        "seed": None,
    },
    "sweep": {
        "awgn": [0.0, 0.005, 0.01, 0.02, 0.05],
        "pgd": [0.0, 0.0025, 0.005, 0.01],
        "trials": 3,
        "pgd_steps": 20,
    },
    "profile": {"grid_points": 1001, "interval": None},
}

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_prob = {"type": "number", "minimum": 0, "maximum": 1}
_open_prob = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}
_count = {"type": "integer", "minimum": 1}
_interval = {"anyOf": [{"type": "null"},
                       {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}]}


def _obj(props: dict) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False}


SCHEMA = _obj({
    "schema": {"const": SCHEMA_ID},
    "seed": {"type": "integer", "minimum": 0},
    "task": _obj({
        "kind": {"enum": ["source_localization", "dynamic"]},
        "n": _count, "communities": _count, "p_in": _prob, "p_out": _prob,
        "num_samples": _count, "T": _count, "window": _count,
        "operator": {"enum": ["adjacency", "laplacian"]},
        "radius": _pos, "steps": _count, "step_scale": {"type": "number", "minimum": 0},
        "groups": _count,
    }),
    "model": _obj({
        "hidden": {"type": "array", "items": _count, "minItems": 1},
        "taps": _count,
        "nonlinearity": {"enum": ["relu", "tanh", "identity"]},
        "readout": {"enum": ["node", "mean", "flatten"]},
    }),
    "train": _obj({
        "method": {"enum": ["unconstrained", "lipschitz", "awgn_augment", "pgd_adversarial"]},
        "step_size": _pos, "schedule": {"enum": ["constant", "inv_sqrt"]},
        "batch_size": _count, "epochs": {"type": "integer", "minimum": 0},
        "readout_bound": {"anyOf": [{"type": "null"}, _pos]},
        "noise_sigma": {"type": "number", "minimum": 0},
        "pgd_epsilon": {"type": "number", "minimum": 0},
        "pgd_steps": _count,
        "pgd_step_size": {"anyOf": [{"type": "null"}, _pos]},
    }),
    "constraint": _obj({
        "kind": {"enum": ["static", "scenario"]},
        "c": _pos,
        "layer_bounds": {"anyOf": [{"type": "null"}, {"type": "array", "items": _pos}]},
        "epsilon": _open_prob, "delta": _open_prob,
        "m": {"anyOf": [{"type": "null"}, _count]},
        "interval": _interval,
        "allow_undersampled": {"type": "boolean"},
        "seed": {"anyOf": [{"type": "null"}, {"type": "integer", "minimum": 0}]},
    }),
    "sweep": _obj({
        "awgn": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "pgd": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "trials": _count, "pgd_steps": _count,
    }),
    "profile": _obj({"grid_points": {"type": "integer", "minimum": 2}, "interval": _interval}),
})


class ConfigError(ValueError):
    pass


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def resolve(user: dict | None = None, seed: int | None = None) -> dict:
    """Validate a user config and fill in every default.

    Raises:
        ConfigError: for unknown keys, wrong types or out-of-range values.
    """
    user = user or {}
    try:
        jsonschema.validate(user, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    cfg = _merge(DEFAULTS, user)
    if seed is not None:
        cfg["seed"] = int(seed)
    task = cfg["task"]
    if task["kind"] == "source_localization" and task["n"] % task["communities"]:
        raise ConfigError("config error at task: communities must divide n")
    if task["kind"] == "dynamic" and task["n"] % task["groups"]:
        raise ConfigError("config error at task: groups must divide n")
    return cfg


def load(path, seed: int | None = None) -> dict:
    if path is None:
        return resolve({}, seed)
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return resolve(doc, seed)


def dump(cfg: dict, path) -> None:
    Path(path).write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


# -- builders ---------------------------------------------------------------


def build_dataset(cfg: dict) -> SourceLocDataset:
    t, seed = cfg["task"], cfg["seed"]
    if t["kind"] == "source_localization":
        return gen_source_localization(t["n"], t["communities"], t["p_in"], t["p_out"],
                                       t["num_samples"], t["T"], seed, t["window"], t["operator"])
    seq = generate_rgg_sequence(t["n"], t["radius"], t["steps"], t["step_scale"], seed)
    params = {"n": t["n"], "radius": t["radius"], "steps": t["steps"],
              "step_scale": t["step_scale"]}
    return gen_dynamic_task(seq, t["num_samples"], t["T"], seed, t["groups"], t["window"],
                            t["operator"], params)


def dataset_from(cfg: dict, data_dir=None) -> SourceLocDataset:
    return read_dataset(data_dir) if data_dir else build_dataset(cfg)


def build_model(cfg: dict, ds: SourceLocDataset):
    m = cfg["model"]
    dims = [ds.x.shape[2]] + list(m["hidden"])
    return init_model(dims, m["taps"], ds.num_classes, m["nonlinearity"], m["readout"],
                      n_nodes=ds.n, seed=cfg["seed"])


def build_constraint(cfg: dict, ds: SourceLocDataset) -> ConstraintSpec:
    c = cfg["constraint"]
    taps = cfg["model"]["taps"]
    if c["kind"] == "static":
        if not ds.is_static:
            raise ConfigError("static constraints need a single-graph dataset; use kind=scenario")
        return build_static_spec(ds.S, taps, c["c"])
    if c["interval"] is not None:
        a, b = c["interval"]
    else:
        a, b = harvest_interval(ds.operators)
    seed = cfg["seed"] if c["seed"] is None else c["seed"]
    plan = ScenarioPlan.create(a, b, c["epsilon"], c["delta"], taps, seed, c["m"],
                               c["allow_undersampled"])
    return build_scenario_spec(plan, taps, c["c"])


def build_train_config(cfg: dict, spec: ConstraintSpec | None) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(
        method=t["method"], step_size=t["step_size"], schedule=t["schedule"],
        batch_size=t["batch_size"], epochs=t["epochs"],
        constraint=spec if t["method"] == "lipschitz" else None,
        layer_bounds=cfg["constraint"]["layer_bounds"],
        readout_bound=t["readout_bound"], noise_sigma=t["noise_sigma"],
        pgd_epsilon=t["pgd_epsilon"], pgd_steps=t["pgd_steps"],
        pgd_step_size=t["pgd_step_size"], seed=cfg["seed"],
    )


def build_sweeps(cfg: dict) -> list:
    s = cfg["sweep"]
    out = []
    for kind in ("awgn", "pgd"):
        mags = s[kind]
        if mags:
            out.append(SweepConfig(kind, tuple(mags), s["trials"], cfg["seed"], s["pgd_steps"]))
    return out
