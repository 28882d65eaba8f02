"""Run configuration: YAML/JSON file -> validated ``RunConfig``."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .arbiter import ArbiterLimits
from .measurements import KINDS, SensorConfig
from .so3 import IDENTITY_QUAT
from .state import DEFAULT_INITIAL_VARIANCE, GRAVITY, DriftPose, NominalState, ProcessNoiseParams


class ConfigError(ValueError):
    pass


_VEC3 = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
    ]
}
_POS3 = {
    "oneOf": [
        {"type": "number", "exclusiveMinimum": 0},
        {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 3, "maxItems": 3},
    ]
}
_QUAT = {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4}
_PER_KIND = {
    "type": "object",
    "properties": {k: _POS3 for k in KINDS},
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "required": ["process_noise", "sensors"],
    "additionalProperties": False,
    "properties": {
        "process_noise": {
            "type": "object",
            "required": ["sigma_v2", "sigma_theta2", "sigma_a2", "sigma_w2"],
            "additionalProperties": False,
            "properties": {k: _POS3 for k in ("sigma_v2", "sigma_theta2", "sigma_a2", "sigma_w2")},
        },
        "initial_covariance": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: _POS3 for k in DEFAULT_INITIAL_VARIANCE},
        },
        "initial_state": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "p": _VEC3, "v": _VEC3, "q": _QUAT, "a_b": _VEC3, "w_b": _VEC3, "g": _VEC3,
            },
        },
        "sensors": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "kinds", "limits"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "kinds": {
                        "type": "array",
                        "items": {"enum": list(KINDS)},
                        "minItems": 1,
                        "uniqueItems": True,
                    },
                    "estimate_drift": {"type": "boolean"},
                    "bootstrap_origin": {"type": "boolean"},
                    "drift": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {"p": _VEC3, "q": _QUAT},
                    },
                    "drift_walk": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {
                            "p": {"type": "number", "minimum": 0},
                            "theta": {"type": "number", "minimum": 0},
                        },
                    },
                    "variance": _PER_KIND,
                    "limits": _PER_KIND,
                    "velocity_frame": {"enum": ["world", "body"]},
                },
            },
        },
        "replay": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "staleness": {"type": "number", "minimum": 0},
                "start": {"type": ["number", "null"]},
                "end": {"type": ["number", "null"]},
            },
        },
        "filter": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "reset_jacobian": {"type": "boolean"},
                "second_order_fx": {"type": "boolean"},
                "exact_drift_jacobians": {"type": "boolean"},
                "orientation_drift_measured_frame": {"type": "boolean"},
            },
        },
    },
}


@dataclass
class RunConfig:
    process_noise: ProcessNoiseParams
    sensors: list[SensorConfig]
    initial_state: NominalState = field(default_factory=NominalState)
    initial_covariance: dict = field(default_factory=dict)
    staleness: float = 0.1
    start: float | None = None
    end: float | None = None
    reset_jacobian: bool = True
    second_order_fx: bool = False
    exact_drift_jacobians: bool = False
    orientation_drift_measured_frame: bool = False

    @property
    def drift_ids(self) -> list[str]:
        return [s.sensor_id for s in self.sensors if s.estimate_drift]

    def sensor(self, sensor_id: str) -> SensorConfig:
        for s in self.sensors:
            if s.sensor_id == sensor_id:
                return s
        raise ConfigError(f"sensor {sensor_id!r} is not in the registry")

    def arbiter_limits(self) -> ArbiterLimits:
        limits = ArbiterLimits()
        for s in self.sensors:
            for kind, lim in s.limits.items():
                limits.set(s.sensor_id, kind, lim)
        return limits


def _vec3(value, default) -> np.ndarray:
    if value is None:
        return np.array(default, dtype=float)
    return np.broadcast_to(np.asarray(value, dtype=float), (3,)).copy()


def config_from_dict(data: dict) -> RunConfig:
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None

    sensors = []
    for s in data["sensors"]:
        missing = [k for k in s["kinds"] if k not in s["limits"]]
        if missing:
            raise ConfigError(f"sensor {s['id']!r}: no arbiter limits for {missing}")
        drift = s.get("drift", {})
        walk = s.get("drift_walk", {})
        try:
            sensors.append(
                SensorConfig(
                    s["id"],
                    tuple(s["kinds"]),
                    estimate_drift=s.get("estimate_drift", False),
                    drift=DriftPose(_vec3(drift.get("p"), np.zeros(3)), np.array(drift.get("q", IDENTITY_QUAT), float)),
                    variance=dict(s.get("variance", {})),
                    limits=dict(s["limits"]),
                    velocity_frame=s.get("velocity_frame", "world"),
                    bootstrap_origin=s.get("bootstrap_origin", True),
                    drift_walk_p=float(walk.get("p", 0.0)),
                    drift_walk_theta=float(walk.get("theta", 0.0)),
                )
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    ids = [s.sensor_id for s in sensors]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"duplicate sensor ids in {ids}")

    init = data.get("initial_state", {})
    state = NominalState(
        p=_vec3(init.get("p"), np.zeros(3)),
        v=_vec3(init.get("v"), np.zeros(3)),
        q=np.array(init.get("q", IDENTITY_QUAT), dtype=float),
        a_b=_vec3(init.get("a_b"), np.zeros(3)),
        w_b=_vec3(init.get("w_b"), np.zeros(3)),
        g=_vec3(init.get("g"), GRAVITY),
        drift={s.sensor_id: s.drift.copy() for s in sensors if s.estimate_drift},
    )
    replay = data.get("replay", {})
    flags = data.get("filter", {})
    pn = data["process_noise"]
    return RunConfig(
        process_noise=ProcessNoiseParams(pn["sigma_v2"], pn["sigma_theta2"], pn["sigma_a2"], pn["sigma_w2"]),
        sensors=sensors,
        initial_state=state,
        initial_covariance=dict(data.get("initial_covariance", {})),
        staleness=float(replay.get("staleness", 0.1)),
        start=replay.get("start"),
        end=replay.get("end"),
        reset_jacobian=flags.get("reset_jacobian", True),
        second_order_fx=flags.get("second_order_fx", False),
        exact_drift_jacobians=flags.get("exact_drift_jacobians", False),
        orientation_drift_measured_frame=flags.get("orientation_drift_measured_frame", False),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return config_from_dict(data)


def config_to_dict(cfg: RunConfig) -> dict:
    def lst(a):
        return [float(x) for x in a]

    s0 = cfg.initial_state
    out = {
        "process_noise": {
            k: lst(getattr(cfg.process_noise, k)) for k in ("sigma_v2", "sigma_theta2", "sigma_a2", "sigma_w2")
        },
        "initial_covariance": {
            k: (lst(v) if np.ndim(v) else float(v)) for k, v in cfg.initial_covariance.items()
        },
        "initial_state": {
            "p": lst(s0.p), "v": lst(s0.v), "q": lst(s0.q), "a_b": lst(s0.a_b), "w_b": lst(s0.w_b), "g": lst(s0.g),
        },
        "sensors": [],
        "replay": {"staleness": cfg.staleness, "start": cfg.start, "end": cfg.end},
        "filter": {
            "reset_jacobian": cfg.reset_jacobian,
            "second_order_fx": cfg.second_order_fx,
            "exact_drift_jacobians": cfg.exact_drift_jacobians,
            "orientation_drift_measured_frame": cfg.orientation_drift_measured_frame,
        },
    }
    for s in cfg.sensors:
        out["sensors"].append(
            {
                "id": s.sensor_id,
                "kinds": list(s.kinds),
                "estimate_drift": s.estimate_drift,
                "bootstrap_origin": s.bootstrap_origin,
                "drift": {"p": lst(s.drift.p), "q": lst(s.drift.q)},
                "drift_walk": {"p": s.drift_walk_p, "theta": s.drift_walk_theta},
                "variance": {k: lst(v) for k, v in s.variance.items()},
                "limits": {k: lst(v) for k, v in s.limits.items()},
                "velocity_frame": s.velocity_frame,
            }
        )
    return out


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(cfg), sort_keys=False), encoding="utf-8")
