"""Accuracy metrics: timestamp matching, RMSE, yaw error, drift alignment, histograms."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .logio import StateEstimate
from .measurements import Measurement, remove_drift_orientation, remove_drift_position
from .sim import TruthSeries
from .so3 import quat_log_batch, quat_multiply_batch
from .state import DriftPose

MATCH_WINDOW = 0.02
MIN_HISTOGRAM_SAMPLES = 100


class MetricsError(ValueError):
    pass


def match_nearest(t_query, t_ref, window: float = MATCH_WINDOW) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs ``(i, j)`` with ``t_ref[j]`` nearest to ``t_query[i]`` within ``window``.

    ``t_ref`` must be sorted.
    """
    t_query = np.asarray(t_query, dtype=float)
    t_ref = np.asarray(t_ref, dtype=float)
    if len(t_ref) == 0 or len(t_query) == 0:
        return np.zeros(0, int), np.zeros(0, int)
    if len(t_ref) == 1:
        j = np.zeros(len(t_query), int)
    else:
        j = np.clip(np.searchsorted(t_ref, t_query), 1, len(t_ref) - 1)
        left = j - 1
        j = np.where(np.abs(t_query - t_ref[left]) <= np.abs(t_ref[j] - t_query), left, j)
    ok = np.abs(t_ref[j] - t_query) <= window
    return np.flatnonzero(ok), j[ok]


def rmse(errors) -> np.ndarray | float:
    """Root mean square along the first axis."""
    errors = np.asarray(errors, dtype=float)
    if errors.shape[0] < 2:
        raise MetricsError("RMSE needs at least two matched pairs")
    return np.sqrt(np.mean(errors**2, axis=0))


def wrap_degrees(angle):
    """Wrap to (-180, 180]."""
    out = np.mod(np.asarray(angle, dtype=float) + 180.0, 360.0) - 180.0
    return np.where(out == -180.0, 180.0, out)


def attitude_errors_deg(q_est, q_truth) -> np.ndarray:
    """Roll/pitch/yaw-axis components (deg) of ``log(R_est R_truth^T)``.

    The world-frame z component is the yaw error.
    """
    a = np.asarray(q_est, dtype=float).reshape(-1, 4)
    b = np.asarray(q_truth, dtype=float).reshape(-1, 4) * [1.0, -1.0, -1.0, -1.0]
    return wrap_degrees(np.degrees(quat_log_batch(quat_multiply_batch(a, b))))


@dataclass
class RmseRow:
    source: str
    x: float
    y: float
    z: float
    yaw: float | None  # [deg]; None where the source has no orientation
    roll: float | None = None
    pitch: float | None = None
    count: int = 0
    note: str = ""

    def metrics(self) -> dict[str, float | None]:
        return {"x": self.x, "y": self.y, "z": self.z, "yaw": self.yaw}


@dataclass
class RmseReport:
    rows: list[RmseRow] = field(default_factory=list)
    drift_errors: dict[str, dict[str, float]] = field(default_factory=dict)

    def row(self, source: str) -> RmseRow:
        for r in self.rows:
            if r.source == source:
                return r
        raise KeyError(source)

    def to_text(self) -> str:
        def fmt(v, digits):
            return "N/A" if v is None else f"{v:.{digits}f}"

        lines = [f"{'source':<22}{'x[m]':>9}{'y[m]':>9}{'z[m]':>9}{'yaw[deg]':>10}{'roll':>8}{'pitch':>8}{'n':>8}  note"]
        for r in self.rows:
            lines.append(
                f"{r.source:<22}{fmt(r.x, 4):>9}{fmt(r.y, 4):>9}{fmt(r.z, 4):>9}{fmt(r.yaw, 3):>10}"
                f"{fmt(r.roll, 3):>8}{fmt(r.pitch, 3):>8}{r.count:>8}  {r.note}"
            )
        for sid, d in self.drift_errors.items():
            lines.append(f"drift estimate {sid}: position RMSE {d['position']:.4f} m, angle RMSE {d['angle_deg']:.3f} deg")
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["source", "x_m", "y_m", "z_m", "yaw_deg", "roll_deg", "pitch_deg", "count", "note"])
            for r in self.rows:
                w.writerow(
                    [r.source]
                    + [("N/A" if v is None else repr(float(v))) for v in (r.x, r.y, r.z, r.yaw, r.roll, r.pitch)]
                    + [r.count, r.note]
                )


def _truth_arrays(truth):
    if isinstance(truth, TruthSeries):
        return truth.t, truth.p, truth.q
    return (
        np.array([s.t for s in truth]),
        np.array([s.p for s in truth]),
        np.array([s.q for s in truth]),
    )


def estimate_row(estimates: Sequence[StateEstimate], truth, source="ES-EKF", window=MATCH_WINDOW) -> RmseRow:
    t_truth, p_truth, q_truth = _truth_arrays(truth)
    t_est = np.array([e.t for e in estimates])
    i, j = match_nearest(t_est, t_truth, window)
    if len(i) == 0:
        raise MetricsError(f"{source}: no estimate matched ground truth within {window} s")
    p = np.array([estimates[k].p for k in i])
    pos = rmse(p - p_truth[j])
    att = rmse(attitude_errors_deg([estimates[k].q for k in i], q_truth[j]))
    return RmseRow(source, *pos, att[2], att[0], att[1], len(i), "fused estimate")


def drift_trace(estimates: Sequence[StateEstimate], sensor_id: str):
    """Estimated drift of one sensor over time, as ``(t, [DriftPose])``."""
    t = np.array([e.t for e in estimates if sensor_id in e.drift])
    return t, [e.drift[sensor_id] for e in estimates if sensor_id in e.drift]


def align_for_reporting(measurements: Sequence[Measurement], trace) -> list[Measurement]:
    """Remove the drift estimated nearest in time from each measurement.

    ``trace`` is ``(t, poses)`` or ``None`` for a sensor without drift.
    """
    if trace is None or len(trace[0]) == 0:
        return list(measurements)
    t_trace, poses = trace
    i, j = match_nearest([m.t for m in measurements], t_trace, window=np.inf)
    out = []
    for k, m in enumerate(measurements):
        pose: DriftPose = poses[j[k]]
        if m.kind == "position":
            value = remove_drift_position(m.value, pose)
        elif m.kind == "orientation":
            value = remove_drift_orientation(m.value, pose.q)
        else:
            value = m.value
        out.append(Measurement(m.t, m.sensor_id, m.kind, value, m.variance, m.t_rx, m.outlier))
    return out


def sensor_row(measurements: Sequence[Measurement], truth, source: str, note: str, window=MATCH_WINDOW) -> RmseRow:
    t_truth, p_truth, q_truth = _truth_arrays(truth)
    pos = [m for m in measurements if m.kind == "position"]
    ori = [m for m in measurements if m.kind == "orientation"]
    xyz, yaw, roll, pitch, count = (None, None, None), None, None, None, 0
    if pos:
        i, j = match_nearest([m.t for m in pos], t_truth, window)
        if len(i):
            xyz = tuple(rmse(np.array([pos[k].value for k in i]) - p_truth[j]))
            count = len(i)
    if ori:
        i, j = match_nearest([m.t for m in ori], t_truth, window)
        if len(i):
            att = rmse(attitude_errors_deg([ori[k].value for k in i], q_truth[j]))
            roll, pitch, yaw = att
            count = max(count, len(i))
    if count == 0:
        raise MetricsError(f"{source}: no measurement matched ground truth")
    return RmseRow(source, *xyz, yaw, roll, pitch, count, note)


def drift_estimate_errors(estimates, drift_truth) -> dict[str, dict[str, float]]:
    out = {}
    for sid in sorted({d.sensor_id for d in drift_truth}):
        samples = [d for d in drift_truth if d.sensor_id == sid]
        t_est, poses = drift_trace(estimates, sid)
        if not len(t_est):
            continue
        i, j = match_nearest([d.t for d in samples], t_est)
        if len(i) < 2:
            continue
        dp = np.array([poses[b].p - samples[a].p for a, b in zip(i, j)])
        ang = attitude_errors_deg([poses[b].q for b in j], [samples[a].q for a in i])
        out[sid] = {
            "position": float(np.sqrt(np.mean(np.sum(dp**2, axis=1)))),
            "angle_deg": float(np.sqrt(np.mean(np.sum(ang**2, axis=1)))),
        }
    return out


def evaluate(estimates, truth, measurements=(), drift_truth=(), window=MATCH_WINDOW, unaligned=False) -> RmseReport:
    """RMSE of the fused estimate and of every sensor, drift-aligned with the estimated drift."""
    report = RmseReport([estimate_row(estimates, truth, window=window)])
    by_sensor: dict[str, list[Measurement]] = {}
    for m in measurements:
        by_sensor.setdefault(m.sensor_id, []).append(m)
    drift_ids = set(estimates[0].drift) if estimates else set()
    for sid in sorted(by_sensor):
        raw = by_sensor[sid]
        if sid in drift_ids:
            aligned = align_for_reporting(raw, drift_trace(estimates, sid))
            report.rows.append(sensor_row(aligned, truth, sid, "estimated drift removed", window))
            if unaligned:
                report.rows.append(sensor_row(raw, truth, f"{sid} (raw)", "no alignment", window))
        else:
            report.rows.append(sensor_row(raw, truth, sid, "sensor frame = world", window))
    report.drift_errors = drift_estimate_errors(estimates, list(drift_truth))
    return report


@dataclass
class ErrorHistogram:
    edges: list[np.ndarray]  # per axis
    densities: list[np.ndarray]

    def write_csv(self, path, axis_names=("x", "y", "z")) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["axis", "bin_lo", "bin_hi", "density"])
            for name, e, d in zip(axis_names, self.edges, self.densities):
                for lo, hi, dens in zip(e[:-1], e[1:], d):
                    w.writerow([name, repr(float(lo)), repr(float(hi)), repr(float(dens))])


def histogram(errors, bins=30) -> ErrorHistogram:
    """Per-axis normalized histograms (densities integrate to one)."""
    errors = np.asarray(errors, dtype=float)
    if errors.ndim == 1:
        errors = errors[:, None]
    if errors.shape[0] < MIN_HISTOGRAM_SAMPLES:
        raise MetricsError(f"histogram needs at least {MIN_HISTOGRAM_SAMPLES} samples")
    edges, dens = [], []
    for col in errors.T:
        d, e = np.histogram(col, bins=bins, density=True)
        edges.append(e)
        dens.append(d)
    return ErrorHistogram(edges, dens)
