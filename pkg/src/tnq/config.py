"""Run-configuration schemas and validation for the batch front-end."""

from __future__ import annotations

import json

from jsonschema import Draft202012Validator

TASKS = ("tebd", "tdvp", "dqa", "qaoa", "thermal", "metts", "lindblad", "monitored", "magic",
         "sample", "stab-find", "circuit-export")

_INT1 = {"type": "integer", "minimum": 1}
_INT0 = {"type": "integer", "minimum": 0}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_NUM = {"type": "number"}
_PAULI = {"type": "string", "pattern": "^[+-]?i?[IXYZixyz]+$"}


def _kinds(variants: dict) -> dict:
    """Object discriminated by ``kind``; each variant is (properties, required)."""
    branches = []
    for kind, (props, required) in variants.items():
        branches.append({
            "if": {"properties": {"kind": {"const": kind}}, "required": ["kind"]},
            "then": {
                "properties": {"kind": {"const": kind}, **props},
                "required": ["kind", *required],
                "additionalProperties": False,
            },
        })
    return {
        "type": "object",
        "required": ["kind"],
        "properties": {"kind": {"enum": list(variants)}},
        "allOf": branches,
    }


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


OPERATOR = _kinds({
    "tfi": ({"n": _INT1, "J": _NUM, "g": _NUM, "h": _NUM}, ["n"]),
    "xxz": ({"n": {"type": "integer", "minimum": 2}, "delta": _NUM, "J": _NUM}, ["n", "delta"]),
    "pauli_sum": ({"terms": {"type": "array", "minItems": 1,
                             "items": {"type": "array", "prefixItems": [_NUM, _PAULI],
                                       "minItems": 2, "maxItems": 2}}}, ["terms"]),
})

STATE = _kinds({
    "product": ({"bits": {"type": "array", "minItems": 1, "items": {"enum": [0, 1]}}}, ["bits"]),
    "ghz": ({"n": {"type": "integer", "minimum": 2}}, ["n"]),
    "w": ({"n": {"type": "integer", "minimum": 2}}, ["n"]),
    "plus": ({"n": _INT1}, ["n"]),
    "t_product": ({"n": _INT1}, ["n"]),
    "random": ({"n": _INT1, "chi": _INT1}, ["n", "chi"]),
})

_EDGE = {"type": "array", "minItems": 2, "maxItems": 3,
         "prefixItems": [_INT0, _INT0, _NUM]}

PROBLEM = _kinds({
    "maxcut_example": ({}, []),
    "maxcut": ({"n": _INT1, "edges": {"type": "array", "items": _EDGE}}, ["n", "edges"]),
    "maxcut_random_regular": ({"n": _INT1, "degree": _INT1}, ["n", "degree"]),
    "qubo": ({"q": {"type": "array", "minItems": 1, "items": {"type": "array", "items": _NUM}},
              "c": {"type": "array", "items": _NUM}, "offset": _NUM}, ["q"]),
    "tsp": ({"distances": {"type": "array", "minItems": 2, "items": {"type": "array", "items": _NUM}},
             "h": _POS}, ["distances"]),
})

TRUNCATION = _obj({"max_bond": {"oneOf": [_INT1, {"type": "null"}]}, "sv_cutoff": _NONNEG})
OBSERVABLES = {"type": "array", "items": _PAULI}
COMPRESSION = _obj({"mode": {"enum": ["svd", "variational", "optimized"]}, "chi": _INT1, "sweeps": _INT1})

_COMMON = {"task": {"enum": list(TASKS)}, "seed": _INT0, "description": {"type": "string"},
           "truncation": {"$ref": "#/$defs/truncation"}}


def _task(props: dict, required=()) -> dict:
    return _obj({**_COMMON, **props}, ["task", "seed", *required])


TASK_SCHEMAS = {
    "tebd": _task({
        "model": {"$ref": "#/$defs/operator"},
        "state": {"$ref": "#/$defs/state"},
        "schedule": _obj({"dt": _POS, "steps": _INT0, "order": {"enum": [1, 2]},
                          "layout": {"enum": ["brickwork", "sweep"]},
                          "mode": {"enum": ["real", "imaginary"]}}, ["dt", "steps"]),
        "observables": OBSERVABLES,
    }, ["model", "state", "schedule"]),
    "tdvp": _task({
        "model": {"$ref": "#/$defs/operator"},
        "state": {"$ref": "#/$defs/state"},
        "schedule": _obj({"dt": _POS, "steps": _INT0, "variant": {"enum": ["one_site", "two_site"]},
                          "krylov": {"type": "integer", "minimum": 2}}, ["dt", "steps"]),
        "observables": OBSERVABLES,
    }, ["model", "state", "schedule"]),
    "dqa": _task({
        "problem": {"$ref": "#/$defs/problem"},
        "schedule": _obj({"P": _INT1, "tau": _POS}, ["P", "tau"]),
        "compression": {"$ref": "#/$defs/compression"},
        "samples": _INT1,
    }, ["problem", "schedule"]),
    "qaoa": _task({
        "problem": {"$ref": "#/$defs/problem"},
        "schedule": _obj({"layers": _INT1, "iterations": _INT1, "step": _POS}, ["layers"]),
        "compression": {"$ref": "#/$defs/compression"},
    }, ["problem", "schedule"]),
    "thermal": _task({
        "model": {"oneOf": [
            _obj({"kind": {"const": "classical_ising"}, "n": {"type": "integer", "minimum": 2},
                  "J": _NUM, "h": _NUM}, ["kind", "n"]),
            {"$ref": "#/$defs/operator"},
        ]},
        "schedule": _obj({"beta": _NONNEG, "dbeta": _POS}, ["beta"]),
    }, ["model", "schedule"]),
    "metts": _task({
        "model": {"$ref": "#/$defs/operator"},
        "schedule": _obj({"beta": _NONNEG, "dbeta": _POS, "samples": _INT1, "burn_in": _INT0,
                          "basis": {"enum": ["Z", "X", "alternating"]}}, ["beta", "samples"]),
        "observables": OBSERVABLES,
    }, ["model", "schedule"]),
    "lindblad": _task({
        "model": _obj({"kind": {"const": "hardcore_bosons"}, "n": {"type": "integer", "minimum": 2},
                       "gamma_loss": _NONNEG, "gamma_gain": _NONNEG, "hopping": _NUM},
                      ["kind", "n", "gamma_loss", "gamma_gain"]),
        "state": {"$ref": "#/$defs/state"},
        "schedule": _obj({"dt": _POS, "steps": _INT0, "record_every": _INT1}, ["dt", "steps"]),
    }, ["model", "state", "schedule"]),
    "monitored": _task({
        "circuit": _obj({"kind": {"enum": ["random_brickwork"]}, "n": {"type": "integer", "minimum": 2}},
                        ["kind", "n"]),
        "schedule": _obj({"steps": _INT1, "rate": _NONNEG, "dt": _POS}, ["steps", "rate"]),
    }, ["circuit", "schedule"]),
    "magic": _task({
        "state": {"$ref": "#/$defs/state"},
        "method": {"enum": ["exact", "sample", "state-replica", "pauli-mps"]},
        "index": {"type": "number", "minimum": 1},
        "samples": {"type": "integer", "minimum": 2},
    }, ["state", "method"]),
    "sample": _task({"state": {"$ref": "#/$defs/state"}, "count": _INT1}, ["state", "count"]),
    "stab-find": _task({"state": {"$ref": "#/$defs/state"}, "budget": _INT1}, ["state"]),
    "circuit-export": _task({"state": {"$ref": "#/$defs/state"}}, ["state"]),
}

DEFS = {"operator": OPERATOR, "state": STATE, "problem": PROBLEM, "truncation": TRUNCATION,
        "compression": COMPRESSION}


def schema_for(task: str) -> dict:
    return {"$schema": "https://json-schema.org/draft/2020-12/schema", "$defs": DEFS,
            **TASK_SCHEMAS[task]}


def _pointer(path) -> str:
    return "/" + "/".join(str(p).replace("~", "~0").replace("/", "~1") for p in path) if path else "/"


def _leaf_errors(err):
    # descend into if/then and oneOf failures so the pointer names the offending key
    if err.context:
        for sub in err.context:
            yield from _leaf_errors(sub)
    else:
        yield err


def validate_config(cfg) -> list[dict]:
    """Every schema violation as ``{"pointer", "message"}``; empty when valid."""
    if not isinstance(cfg, dict):
        return [{"pointer": "/", "message": "config must be a JSON object"}]
    task = cfg.get("task")
    if task not in TASKS:
        msg = "missing required key 'task'" if task is None else f"unknown task {task!r}"
        return [{"pointer": "/task", "message": msg}]
    v = Draft202012Validator(schema_for(task))
    out = []
    for err in v.iter_errors(cfg):
        if err.validator == "oneOf":
            leaves = [err]
        else:
            leaves = list(_leaf_errors(err))
        for leaf in leaves:
            path = list(leaf.absolute_path)
            if leaf.validator == "required":
                missing = leaf.message.split("'")[1]
                path = path + [missing]
            elif leaf.validator == "additionalProperties":
                extra = leaf.message.split("'")[1]
                path = path + [extra]
            out.append({"pointer": _pointer(path), "message": leaf.message})
    uniq = {(e["pointer"], e["message"]): e for e in out}
    return sorted(uniq.values(), key=lambda e: (e["pointer"], e["message"]))


def load_config(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


__all__ = ["TASKS", "schema_for", "validate_config", "load_config"]
