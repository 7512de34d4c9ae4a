"""Run configuration: JSON schema, validating loader and problem construction.

A config is one JSON document::

    {
      "plant": {"name": "toy" | "reactor", "params": {...}, "params_file": "..."},
      "controller": "linear_feedback" | "governor",      (optional, plant default)
      "perf": "quadratic_average" | "moles_c",           (optional, plant default)
      "space": [{"kind": "continuous", "name": ..., "lo": ..., "hi": ...}, ...],   (optional)
      "seed_theta": [...] | null,                        (optional, plant default)
      "cbo": {"n_seed", "n_max", "M", "pool_size", "n_theta", "gp_restarts"},
      "certify": {"N", "rho", "beta", "n_val", "compare_xi", "single_pass"},
      "master_seed": int,
      "out_dir": "..."
    }

``params_file`` is resolved relative to the config file and merged under
inline ``params``.

Lineage hashes are computed per stage from the settings that stage depends
on, so e.g. re-certifying persisted matrices with another beta does not
invalidate them, while a changed plant or seed does.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema

from .io import hash_obj, to_plain
from .plants.reactor import IDX_TR, Governor, MolesC, ReactorParams, ReactorPlant, governor_space
from .plants.toy import LinearFeedback, QuadraticCost, ToyPlant, scalar_toy_plant
from .sim import Average, Problem, Terminal
from .spaces import DomainError, ParameterSpace


class ConfigError(ValueError):
    pass


_POS_INT = {"type": "integer", "minimum": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["plant", "cbo", "certify", "master_seed"],
    "properties": {
        "plant": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"enum": ["toy", "reactor"]},
                "params": {"type": "object"},
                "params_file": {"type": "string"},
            },
        },
        "controller": {"enum": ["linear_feedback", "governor"]},
        "perf": {"enum": ["quadratic_average", "moles_c"]},
        "space": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["kind"],
                "properties": {
                    "kind": {"enum": ["continuous", "integer", "categorical"]},
                    "name": {"type": "string"},
                    "lo": {"type": "number"},
                    "hi": {"type": "number"},
                    "labels": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                },
            },
        },
        "seed_theta": {"type": ["array", "null"]},
        "cbo": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n_seed", "n_max", "M", "n_theta"],
            "properties": {
                "n_seed": _POS_INT,
                "n_max": {"type": "integer", "minimum": 0},
                "M": _POS_INT,
                "pool_size": _POS_INT,
                "n_theta": _POS_INT,
                "gp_restarts": {"type": "integer", "minimum": 0},
            },
        },
        "certify": {
            "type": "object",
            "additionalProperties": False,
            "required": ["N", "rho", "beta"],
            "properties": {
                "N": _POS_INT,
                "rho": {"type": "number", "exclusiveMinimum": 0},
                "beta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "n_val": _POS_INT,
                "compare_xi": {"type": "boolean"},
                "single_pass": {"type": "boolean"},
            },
        },
        "master_seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "out_dir": {"type": "string"},
    },
}

_DEFAULTS = {
    "toy": {"controller": "linear_feedback", "perf": "quadratic_average"},
    "reactor": {"controller": "governor", "perf": "moles_c"},
}
_REACTOR_SEED_THETA = (0.5, 0.5, 1, "ForwardEuler")


@dataclass(frozen=True)
class CboSettings:
    n_seed: int
    n_max: int
    M: int
    n_theta: int
    pool_size: int = 256
    gp_restarts: int = 2


@dataclass(frozen=True)
class CertifySettings:
    N: int
    rho: float
    beta: float
    n_val: int = 10000
    compare_xi: bool = True
    single_pass: bool = False


@dataclass(frozen=True)
class RunConfig:
    plant: str
    plant_params: dict
    controller: str
    perf: str
    space: ParameterSpace
    seed_theta: Optional[tuple]
    cbo: CboSettings
    certify: CertifySettings
    master_seed: int
    out_dir: Path = field(default=Path("out"))

    # --- lineage -----------------------------------------------------------
    def _problem_part(self) -> dict:
        return {"plant": self.plant, "params": self.plant_params, "controller": self.controller,
                "perf": self.perf, "space": self.space.to_json(),
                "seed_theta": list(self.seed_theta) if self.seed_theta is not None else None,
                "master_seed": self.master_seed}

    def tune_hash(self) -> str:
        return hash_obj({"problem": self._problem_part(), "cbo": vars(self.cbo)})

    def evaluate_hash(self) -> str:
        return hash_obj({"tune": self.tune_hash(), "N": self.certify.N})

    def certify_hash(self) -> str:
        c = self.certify
        return hash_obj({"evaluate": self.evaluate_hash(), "rho": c.rho, "beta": c.beta,
                         "compare_xi": c.compare_xi, "single_pass": c.single_pass})

    def to_json(self) -> dict:
        """Resolved config (params inlined); out_dir is left out so it never reaches canonical outputs."""
        d = self._problem_part()
        d["cbo"] = vars(self.cbo)
        d["certify"] = vars(self.certify)
        return to_plain(d)


def _plant_params(name: str, raw: dict, base: Path) -> dict:
    params = {}
    if "params_file" in raw:
        path = (base / raw["params_file"]).resolve()
        try:
            params.update(json.loads(path.read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read params_file {path}: {exc}") from None
    params.update(raw.get("params", {}))
    try:
        if name == "reactor":
            return ReactorParams.from_json(params).to_json()
        known = set(ToyPlant.__dataclass_fields__)
        unknown = set(params) - known - {"version", "note"}
        if unknown:
            raise DomainError(f"unknown toy parameters: {sorted(unknown)}")
        return vars(ToyPlant(**{k: v for k, v in params.items() if k in known}))
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {name} parameters: {exc}") from None


def _default_space(plant: str) -> ParameterSpace:
    return governor_space() if plant == "reactor" else scalar_toy_plant().space


def parse_config(doc: dict, base: Path = Path(".")) -> RunConfig:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    name = doc["plant"]["name"]
    defaults = _DEFAULTS[name]
    controller = doc.get("controller", defaults["controller"])
    perf = doc.get("perf", defaults["perf"])
    if controller != defaults["controller"] or perf != defaults["perf"]:
        raise ConfigError(f"plant {name!r} supports controller {defaults['controller']!r} "
                          f"and perf {defaults['perf']!r}")
    params = _plant_params(name, doc["plant"], base)

    default_space = _default_space(name)
    if "space" in doc:
        try:
            space = ParameterSpace.from_json(doc["space"])
        except (DomainError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid space: {exc}") from None
        kinds = [type(d) for d in space.dims]
        if kinds != [type(d) for d in default_space.dims]:
            raise ConfigError(f"space dims must match the {controller!r} parameter layout "
                              f"{default_space.names}")
    else:
        space = default_space

    raw_seed = doc.get("seed_theta", list(_REACTOR_SEED_THETA) if name == "reactor" else None)
    seed_theta = None
    if raw_seed is not None:
        try:
            seed_theta = space.validate(raw_seed)
        except DomainError as exc:
            raise ConfigError(f"invalid seed_theta: {exc}") from None

    cbo = CboSettings(**doc["cbo"])
    cert = CertifySettings(**doc["certify"])
    out_dir = Path(doc.get("out_dir", "out"))
    if not out_dir.is_absolute():
        out_dir = base / out_dir
    return RunConfig(name, params, controller, perf, space, seed_theta, cbo, cert,
                     int(doc["master_seed"]), out_dir)


def load_config(path, seed: Optional[int] = None, out_dir=None) -> RunConfig:
    """Read, validate and resolve a config file; ``seed`` / ``out_dir`` override the file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if seed is not None:
        doc["master_seed"] = seed
    cfg = parse_config(doc, path.parent)
    if out_dir is not None:
        cfg = RunConfig(**{**vars(cfg), "out_dir": Path(out_dir)})
    return cfg


def build_problem(cfg: RunConfig) -> Problem:
    if cfg.plant == "reactor":
        params = ReactorParams.from_json(cfg.plant_params)
        return Problem("reactor", ReactorPlant(params), Governor(params), cfg.space,
                       Terminal(MolesC()), cfg.seed_theta, IDX_TR)
    plant = ToyPlant(**cfg.plant_params)
    return Problem("toy", plant, LinearFeedback(), cfg.space, Average(QuadraticCost()),
                   cfg.seed_theta, 0)
