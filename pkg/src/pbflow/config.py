"""Run configuration: defaults, schema validation, canonical hashing.

A config file is YAML or JSON with the sections below; any omitted key takes
its default. Fourier tables list ``[mode, re, im]`` triples for positive
modes (negative modes follow by conjugate symmetry), so ``[[1, 0.5, 0]]`` is
cos(theta).
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import yaml

from .profile import BoundaryData, feasible_c_t
from .verify import Problem

SCHEMA_VERSION = 1

DEFAULTS = {
    "geometry": {"r0": 0.5},
    "boundary": {"alpha": 2.0, "beta": 1.5, "eta": 0.05, "f": [[1, 0.5, 0.0]], "g": [[1, 0.5, 0.0]]},
    "family": {"delta": 0.5, "c_t": None},
    "numerics": {
        "n_theta": 32, "n_r": 64, "n_layer": 96,
        "layer_depth": None, "psi_factor": 1.25, "gamma": 1e-4,
        "fixed_point_tol": 1e-10, "fixed_point_max_iter": 50,
        "newton_tol": 1e-10, "newton_max_iter": 20, "line_search": False,
        "K": 1,
    },
    "sweep": {
        "epsilons": [0.1, 0.07, 0.05, 0.035, 0.025],
        "residual_epsilons": [0.1, 0.05, 0.025],
        "deltas": [0.0, 0.25, 0.5, 0.75, 1.0],
        "family_epsilon": 0.05,
        "family_eta": 0.02,
    },
    "output": {"dir": "pbflow-out", "plots": False, "workers": 1},
    "deterministic": True,
}

_POS = {"type": "number", "exclusiveMinimum": 0}
_TRIPLES = {"type": "array", "items": {"type": "array", "minItems": 3, "maxItems": 3,
                                       "prefixItems": [{"type": "integer", "minimum": 1},
                                                       {"type": "number"}, {"type": "number"}]}}
_NONEMPTY_POS = {"type": "array", "minItems": 1, "items": _POS}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "geometry": {"type": "object", "additionalProperties": False,
                     "properties": {"r0": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}}},
        "boundary": {"type": "object", "additionalProperties": False,
                     "properties": {"alpha": _POS, "beta": _POS, "eta": {"type": "number", "minimum": 0},
                                    "f": _TRIPLES, "g": _TRIPLES}},
        "family": {"type": "object", "additionalProperties": False,
                   "properties": {"delta": {"type": "number", "minimum": 0, "maximum": 1},
                                  "c_t": {"type": ["number", "null"]}}},
        "numerics": {"type": "object", "additionalProperties": False,
                     "properties": {
                         "n_theta": {"type": "integer", "minimum": 4},
                         "n_r": {"type": "integer", "minimum": 8, "multipleOf": 2},
                         "n_layer": {"type": "integer", "minimum": 8},
                         "layer_depth": {"anyOf": [_POS, {"type": "null"}]},
                         "psi_factor": {"type": "number", "minimum": 1},
                         "gamma": {"type": "number", "minimum": 0},
                         "fixed_point_tol": _POS, "fixed_point_max_iter": {"type": "integer", "minimum": 1},
                         "newton_tol": _POS, "newton_max_iter": {"type": "integer", "minimum": 1},
                         "line_search": {"type": "boolean"},
                         "K": {"enum": [0, 1]}}},
        "sweep": {"type": "object", "additionalProperties": False,
                  "properties": {"epsilons": _NONEMPTY_POS, "residual_epsilons": _NONEMPTY_POS,
                                 "deltas": {"type": "array", "minItems": 1,
                                            "items": {"type": "number", "minimum": 0, "maximum": 1}},
                                 "family_epsilon": _POS, "family_eta": {"type": "number", "minimum": 0}}},
        "output": {"type": "object", "additionalProperties": False,
                   "properties": {"dir": {"type": "string"}, "plots": {"type": "boolean"},
                                  "workers": {"type": "integer", "minimum": 1}}},
        "deterministic": {"type": "boolean"},
    },
}

# fields that change where or how results are written but not what they are
_NON_SEMANTIC = {("output", "dir"), ("output", "plots"), ("output", "workers")}


class ConfigError(ValueError):
    pass


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def read_raw(path: str | Path) -> dict:
    """Parse a YAML or JSON config file without applying defaults."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return raw


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class RunConfig:
    data: dict

    @classmethod
    def from_dict(cls, raw: dict | None) -> "RunConfig":
        raw = raw or {}
        try:
            jsonschema.validate(raw, SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"invalid config at {where}: {exc.message}") from None
        data = _merge(DEFAULTS, raw)
        # normalize numbers so that 1 and 1.0 hash alike
        data = json.loads(json.dumps(data), parse_int=float)
        for sec, key in (("numerics", "n_theta"), ("numerics", "n_r"), ("numerics", "n_layer"),
                         ("numerics", "fixed_point_max_iter"), ("numerics", "newton_max_iter"),
                         ("numerics", "K"), ("output", "workers")):
            data[sec][key] = int(data[sec][key])
        for tab in ("f", "g"):
            data["boundary"][tab] = [[int(m), re, im] for m, re, im in data["boundary"][tab]]
        cfg = cls(data)
        cfg.boundary_data()  # surfaces inconsistent boundary data as a config error
        return cfg

    @classmethod
    def load(cls, path: str | Path | None, overrides: dict | None = None) -> "RunConfig":
        raw = read_raw(path) if path is not None else {}
        return cls.from_dict(_merge(raw, overrides or {}))

    def __getitem__(self, section):
        return self.data[section]

    def semantic(self, parts=None) -> dict:
        """The config without non-semantic fields, optionally restricted.

        ``parts`` lists section names or (section, key) pairs.
        """
        d = copy.deepcopy(self.data)
        for sec, key in _NON_SEMANTIC:
            d.get(sec, {}).pop(key, None)
        if parts is None:
            return d
        out = {}
        for part in parts:
            if isinstance(part, str):
                out[part] = d[part]
            else:
                sec, key = part
                out.setdefault(sec, {})[key] = d[sec][key]
        return out

    def hash(self, parts=None, salt: str = "") -> str:
        text = canonical_json(self.semantic(parts)) + salt
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def boundary_data(self, eta: float | None = None) -> BoundaryData:
        b = self.data["boundary"]
        try:
            return BoundaryData(b["alpha"], b["beta"], b["eta"] if eta is None else eta,
                                b["f"], b["g"], self.data["geometry"]["r0"])
        except ValueError as exc:
            raise ConfigError(f"boundary data: {exc}") from None

    def c_t(self) -> float:
        c = self.data["family"]["c_t"]
        return feasible_c_t(1.0, self.data["geometry"]["r0"]) if c is None else float(c)

    def problem(self, delta: float | None = None, eta: float | None = None) -> Problem:
        n = self.data["numerics"]
        return Problem(self.boundary_data(eta), self.c_t(),
                       self.data["family"]["delta"] if delta is None else delta,
                       n_theta=n["n_theta"], n_r=n["n_r"], K=n["K"], tol=n["newton_tol"],
                       max_iter=n["newton_max_iter"], gamma=n["gamma"], n_layer=n["n_layer"],
                       layer_depth=n["layer_depth"], psi_factor=n["psi_factor"],
                       fp_tol=n["fixed_point_tol"], fp_max_iter=n["fixed_point_max_iter"],
                       line_search=n["line_search"])
