"""Line-delimited JSON log records.

Every line is one JSON object with a ``type`` field and a timestamp ``t``
(float seconds or an ISO-8601 string). Record types:

``imu``          ``t, a[3], w[3]``
``measurement``  ``t, t_rx, sensor_id, kind, value[3|4], variance[3], outlier``
``truth``        ``t, p, v, a, q, w``
``drift_truth``  ``t, sensor_id, p, q``
``verdict``      ``t, sensor_id, kind, index, accepted, violating_axes, innovation, stale, bootstrap``
``estimate``     ``t, p, v, q, a_b, w_b, g, drift{id: {p, q}}, P_diag``

Quaternions are ``[w, x, y, z]``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable

import numpy as np

from .arbiter import ArbiterVerdict
from .measurements import Measurement
from .sim import DriftSample, GroundTruthSample
from .state import DriftPose, ImuSample

log = logging.getLogger(__name__)

MAX_MALFORMED_FRACTION = 0.10


class LogFormatError(ValueError):
    pass


@dataclass
class VerdictRecord:
    t: float
    sensor_id: str
    kind: str
    index: int
    verdict: ArbiterVerdict
    bootstrap: bool = False


@dataclass
class StateEstimate:
    t: float
    p: np.ndarray
    v: np.ndarray
    q: np.ndarray
    a_b: np.ndarray
    w_b: np.ndarray
    g: np.ndarray
    drift: dict[str, DriftPose] = field(default_factory=dict)
    P_diag: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass
class ParsedLog:
    records: list
    skipped: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)


def parse_time(value) -> float:
    if isinstance(value, bool):
        raise ValueError("timestamp must be a number or ISO-8601 string")
    if isinstance(value, (int, float)):
        t = float(value)
    elif isinstance(value, str):
        try:
            t = float(value)
        except ValueError:
            t = datetime.fromisoformat(value.replace("Z", "+00:00")).timestamp()
    else:
        raise ValueError("timestamp must be a number or ISO-8601 string")
    if not np.isfinite(t):
        raise ValueError("timestamp must be finite")
    return t


def _vec(d, key, n=3) -> np.ndarray:
    arr = np.array(d[key], dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"{key!r} must have {n} components")
    return arr


def _list(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def to_dict(rec) -> dict:
    if isinstance(rec, ImuSample):
        return {"type": "imu", "t": rec.t, "a": _list(rec.a), "w": _list(rec.w)}
    if isinstance(rec, Measurement):
        return {
            "type": "measurement",
            "t": rec.t,
            "t_rx": rec.t_rx,
            "sensor_id": rec.sensor_id,
            "kind": rec.kind,
            "value": _list(rec.value),
            "variance": _list(rec.variance),
            "outlier": bool(rec.outlier),
        }
    if isinstance(rec, GroundTruthSample):
        return {"type": "truth", "t": rec.t, **{k: _list(getattr(rec, k)) for k in ("p", "v", "a", "q", "w")}}
    if isinstance(rec, DriftSample):
        return {"type": "drift_truth", "t": rec.t, "sensor_id": rec.sensor_id, "p": _list(rec.p), "q": _list(rec.q)}
    if isinstance(rec, VerdictRecord):
        v = rec.verdict
        return {
            "type": "verdict",
            "t": rec.t,
            "sensor_id": rec.sensor_id,
            "kind": rec.kind,
            "index": rec.index,
            "accepted": bool(v.accepted),
            "violating_axes": list(v.violating_axes),
            "innovation": None if v.innovation is None else _list(v.innovation),
            "stale": bool(v.stale),
            "bootstrap": bool(rec.bootstrap),
        }
    if isinstance(rec, StateEstimate):
        return {
            "type": "estimate",
            "t": rec.t,
            **{k: _list(getattr(rec, k)) for k in ("p", "v", "q", "a_b", "w_b", "g")},
            "drift": {sid: {"p": _list(d.p), "q": _list(d.q)} for sid, d in rec.drift.items()},
            "P_diag": _list(rec.P_diag),
        }
    raise TypeError(f"cannot serialize {type(rec).__name__}")


def _imu(d):
    return ImuSample(parse_time(d["t"]), _vec(d, "a"), _vec(d, "w"))


def _measurement(d):
    kind = d["kind"]
    t = parse_time(d["t"])
    return Measurement(
        t,
        str(d["sensor_id"]),
        kind,
        _vec(d, "value", 4 if kind == "orientation" else 3),
        _vec(d, "variance"),
        t_rx=parse_time(d["t_rx"]) if d.get("t_rx") is not None else t,
        outlier=bool(d.get("outlier", False)),
    )


def _truth(d):
    return GroundTruthSample(parse_time(d["t"]), *(_vec(d, k, 4 if k == "q" else 3) for k in ("p", "v", "a", "q", "w")))


def _drift_truth(d):
    return DriftSample(parse_time(d["t"]), str(d["sensor_id"]), _vec(d, "p"), _vec(d, "q", 4))


def _verdict(d):
    innovation = d.get("innovation")
    verdict = ArbiterVerdict(
        bool(d["accepted"]),
        tuple(int(k) for k in d["violating_axes"]),
        None if innovation is None else np.array(innovation, dtype=float),
        bool(d.get("stale", False)),
    )
    return VerdictRecord(parse_time(d["t"]), str(d["sensor_id"]), d["kind"], int(d["index"]), verdict, bool(d.get("bootstrap", False)))


def _estimate(d):
    return StateEstimate(
        parse_time(d["t"]),
        *(_vec(d, k, 4 if k == "q" else 3) for k in ("p", "v", "q", "a_b", "w_b", "g")),
        drift={sid: DriftPose(_vec(x, "p"), _vec(x, "q", 4)) for sid, x in d.get("drift", {}).items()},
        P_diag=np.array(d.get("P_diag", []), dtype=float),
    )


PARSERS = {
    "imu": _imu,
    "measurement": _measurement,
    "truth": _truth,
    "drift_truth": _drift_truth,
    "verdict": _verdict,
    "estimate": _estimate,
}


def from_dict(d: dict):
    return PARSERS[d["type"]](d)


def parse_lines(lines: Iterable[str], source: str = "<log>") -> ParsedLog:
    out = ParsedLog([])
    total = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        total += 1
        try:
            d = json.loads(line)
            if not isinstance(d, dict) or "type" not in d:
                raise ValueError("record must be an object with a 'type' field")
            if d["type"] not in PARSERS:
                log.warning("%s:%d: skipping unknown record type %r", source, lineno, d["type"])
                out.skipped += 1
                continue
            out.records.append(from_dict(d))
        except (ValueError, KeyError, TypeError) as exc:
            log.warning("%s:%d: malformed record: %s", source, lineno, exc)
            out.errors.append((lineno, str(exc)))
            out.skipped += 1
    if total and len(out.errors) > MAX_MALFORMED_FRACTION * total:
        first = "; ".join(f"line {n}: {m}" for n, m in out.errors[:3])
        raise LogFormatError(
            f"{source}: {len(out.errors)} of {total} lines are malformed ({first})"
        )
    return out


def parse_log(path) -> ParsedLog:
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as fh:
            return parse_lines(fh, str(path))
    except OSError as exc:
        raise LogFormatError(f"cannot read {path}: {exc}") from exc


def dumps(rec) -> str:
    return json.dumps(to_dict(rec), separators=(",", ":"))


def write_log(path, records: Iterable) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps(rec))
            fh.write("\n")
