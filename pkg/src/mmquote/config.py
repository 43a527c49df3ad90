"""Run configuration: a versioned JSON document validated against a schema."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Union

import jsonschema
import numpy as np

from .errors import ConfigError, ContractError
from .intensity import IntensityModel
from .multi_asset import AssetSpec, MultiAssetProblem
from .single_asset import Penalty, SingleAssetProblem

SCHEMA_VERSION = 1
MODES = ("solve-single", "solve-multi", "approx", "simulate", "calibrate")
POLICIES = ("solved", "closed-form", "constant", "widened")

_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
_vector = {"type": "array", "items": {"type": "number"}}
_intensity = {
    "type": "object",
    "properties": {"A": _pos, "k": _pos},
    "required": ["A", "k"],
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["version", "mode", "gamma", "xi", "T", "assets"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "mode": {"enum": list(MODES)},
        "gamma": _pos,
        "xi": {"oneOf": [{"enum": ["gamma", "zero"]}, _nonneg]},
        "T": _pos,
        "assets": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["sigma", "A", "k", "delta_qty", "Q"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "sigma": _pos,
                    "A": _pos,
                    "k": _pos,
                    "ask": _intensity,
                    "delta_qty": _pos,
                    "Q": _pos,
                },
            },
        },
        "correlation": _matrix,
        "penalty": {
            "type": "object",
            "properties": {"kind": {"enum": ["zero", "linear", "quadratic"]}, "a": _nonneg},
            "required": ["kind"],
            "additionalProperties": False,
        },
        "penalty_matrix": _matrix,
        "numerics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dt": _pos,
                "tol": _pos,
                "max_iter": {"type": "integer", "minimum": 1},
                "max_nodes": {"type": "integer", "minimum": 1},
            },
        },
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_paths": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "dt_sim": _pos,
                "x0": {"type": "number"},
                "q0": _vector,
                "S0": _vector,
                "policy": {"enum": list(POLICIES)},
                "widen": _nonneg,
                "bid_offsets": _vector,
                "ask_offsets": _vector,
                "delta_floor": {"oneOf": [_vector, {"type": "null"}]},
                "events": {"type": "boolean"},
            },
        },
        "calibration": {
            "type": "object",
            "additionalProperties": False,
            "required": ["input"],
            "properties": {"input": {"type": "string"}},
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "notional": _pos,
                "time_samples": {"type": "integer", "minimum": 2},
            },
        },
    },
}


@dataclass(frozen=True)
class AssetConfig:
    sigma: float
    A: float
    k: float
    delta_qty: float
    Q: float
    name: str = ""
    ask: Optional[dict] = None


@dataclass(frozen=True)
class NumericsConfig:
    dt: float = 1.0
    tol: float = 1e-12
    max_iter: int = 50
    max_nodes: int = 100_000


@dataclass(frozen=True)
class SimulationConfig:
    n_paths: int = 1000
    seed: int = 0
    dt_sim: float = 0.05
    x0: float = 0.0
    q0: Optional[tuple] = None
    S0: Optional[tuple] = None
    policy: str = "solved"
    widen: float = 0.2
    bid_offsets: Optional[tuple] = None
    ask_offsets: Optional[tuple] = None
    delta_floor: Optional[tuple] = None
    events: bool = False


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    notional: float = 1.0
    time_samples: int = 121


@dataclass(frozen=True)
class RunConfig:
    mode: str
    gamma: float
    xi: Union[str, float]
    T: float
    assets: tuple
    correlation: Optional[tuple] = None
    penalty: dict = field(default_factory=lambda: {"kind": "zero", "a": 0.0})
    penalty_matrix: Optional[tuple] = None
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    calibration: Optional[dict] = None
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def xi_value(self) -> float:
        if self.xi == "gamma":
            return self.gamma
        if self.xi == "zero":
            return 0.0
        return float(self.xi)

    @property
    def d(self) -> int:
        return len(self.assets)

    def to_dict(self) -> dict:
        out = {"version": SCHEMA_VERSION}
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if f.name == "assets":
                value = [{k: v for k, v in asdict(a).items() if v is not None and v != ""} for a in value]
            elif f.name in ("numerics", "simulation", "output"):
                value = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(value).items() if v is not None}
            elif f.name in ("correlation", "penalty_matrix"):
                value = [list(r) for r in value]
            out[f.name] = value
        return out

    # problem builders

    def _intensities(self, a: AssetConfig):
        bid = IntensityModel.exponential(a.A, a.k)
        ask = IntensityModel.exponential(a.ask["A"], a.ask["k"]) if a.ask else bid
        return bid, ask

    def single_problem(self) -> SingleAssetProblem:
        if self.d != 1:
            raise ConfigError(f"single-asset mode needs exactly one asset, got {self.d}", ("assets",))
        a = self.assets[0]
        bid, ask = self._intensities(a)
        pen = Penalty(self.penalty["kind"], float(self.penalty.get("a", 0.0)))
        return _contract(
            lambda: SingleAssetProblem(a.sigma, self.gamma, self.xi_value, a.delta_qty, a.Q, self.T, bid, ask, pen),
            ("assets", "0"),
        )

    def multi_problem(self) -> MultiAssetProblem:
        specs = []
        for i, a in enumerate(self.assets):
            bid, ask = self._intensities(a)
            specs.append(_contract(lambda: AssetSpec(bid, a.delta_qty, a.Q, ask, a.name), ("assets", str(i))))
        d = self.d
        corr = np.eye(d) if self.correlation is None else np.asarray(self.correlation, dtype=float)
        if corr.shape != (d, d):
            raise ConfigError(f"correlation must be {d}x{d}", ("correlation",))
        pen = None
        if self.penalty_matrix is not None:
            pen = np.asarray(self.penalty_matrix, dtype=float)
        elif d == 1 and self.penalty["kind"] == "quadratic":
            pen = np.array([[float(self.penalty.get("a", 0.0))]])
        elif self.penalty["kind"] == "linear" and self.penalty.get("a", 0.0) > 0:
            raise ConfigError("multi-asset problems take a quadratic penalty_matrix", ("penalty",))
        sig = np.array([a.sigma for a in self.assets])
        return _contract(
            lambda: MultiAssetProblem.from_volatilities(sig, corr, specs, self.gamma, self.xi_value, self.T, pen),
            ("correlation",),
        )


def _contract(build, path):
    try:
        return build()
    except ContractError as exc:
        raise ConfigError(str(exc), path) from None


def _tuplify(value):
    if isinstance(value, list):
        return tuple(_tuplify(v) for v in value)
    return value


def parse_config(doc) -> RunConfig:
    """Validate a decoded JSON document and build a :class:`RunConfig`."""
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(err.message, tuple(str(p) for p in err.absolute_path))
    assets = tuple(AssetConfig(**a) for a in doc["assets"])
    sim = {k: _tuplify(v) for k, v in doc.get("simulation", {}).items()}
    return RunConfig(
        mode=doc["mode"],
        gamma=doc["gamma"],
        xi=doc["xi"],
        T=doc["T"],
        assets=assets,
        correlation=_tuplify(doc.get("correlation")),
        penalty=dict(doc.get("penalty", {"kind": "zero", "a": 0.0})),
        penalty_matrix=_tuplify(doc.get("penalty_matrix")),
        numerics=NumericsConfig(**doc.get("numerics", {})),
        simulation=SimulationConfig(**sim),
        calibration=doc.get("calibration"),
        output=OutputConfig(**doc.get("output", {})),
    )


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", (str(path),)) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} at line {exc.lineno}", (str(path),)) from None
    return parse_config(doc)


def dump_config(config: RunConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
