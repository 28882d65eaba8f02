"""Measurement functions, Jacobians and drift removal.

Three families are supported: position (``R{q_i} p + p_i``), orientation
(``q_i * q``, with an angle-axis innovation) and velocity. Sensors in the
drift set have their ``(p_i, q_i)`` estimated in the filter state; the rest
use a fixed configured transform.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .so3 import (
    IDENTITY_QUAT,
    canonical,
    log_vee,
    quat_inverse,
    quat_multiply,
    quat_partial_wrt_theta,
    quat_to_rotmat,
    skew,
)
from .state import CORE_DIM, P_IDX, THETA_IDX, V_IDX, DriftPose, NominalState

KINDS = ("position", "orientation", "velocity")


@dataclass
class Measurement:
    t: float
    sensor_id: str
    kind: str
    value: np.ndarray  # 3-vector, or [w, x, y, z] for orientation
    variance: np.ndarray
    t_rx: float | None = None  # arrival time; defaults to t
    outlier: bool = False  # simulation label, never read by the filter

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown measurement kind {self.kind!r}")
        shape = (4,) if self.kind == "orientation" else (3,)
        self.value = np.asarray(self.value, dtype=float)
        if self.value.shape != shape:
            raise ValueError(f"{self.kind} value must have shape {shape}")
        if self.kind == "orientation":
            self.value = canonical(self.value)
        self.variance = np.broadcast_to(np.asarray(self.variance, dtype=float), (3,)).copy()
        if np.any(self.variance <= 0):
            raise ValueError("measurement variance must be positive")
        if self.t_rx is None:
            self.t_rx = self.t


@dataclass
class SensorConfig:
    sensor_id: str
    kinds: tuple[str, ...]
    estimate_drift: bool = False
    drift: DriftPose = field(default_factory=DriftPose)
    variance: dict[str, np.ndarray] = field(default_factory=dict)
    limits: dict[str, np.ndarray] = field(default_factory=dict)
    velocity_frame: str = "world"
    bootstrap_origin: bool = True
    drift_walk_p: float = 0.0  # drift random-walk rates [m/sqrt(s)], [rad/sqrt(s)]
    drift_walk_theta: float = 0.0

    def __post_init__(self):
        self.kinds = tuple(self.kinds)
        for kind in self.kinds:
            if kind not in KINDS:
                raise ValueError(f"{self.sensor_id}: unknown kind {kind!r}")
        if self.estimate_drift and not set(self.kinds) & {"position", "orientation"}:
            raise ValueError(f"{self.sensor_id}: drift is unobservable from velocity alone")
        if self.velocity_frame not in ("world", "body"):
            raise ValueError(f"{self.sensor_id}: velocity_frame must be 'world' or 'body'")
        self.variance = {k: np.broadcast_to(np.asarray(v, float), (3,)).copy() for k, v in self.variance.items()}
        self.limits = {k: np.broadcast_to(np.asarray(v, float), (3,)).copy() for k, v in self.limits.items()}
        for k, v in self.variance.items():
            if np.any(v <= 0):
                raise ValueError(f"{self.sensor_id}: {k} variance must be positive")


def drift_pose(state: NominalState, sensor: SensorConfig) -> DriftPose:
    if sensor.estimate_drift:
        return state.drift[sensor.sensor_id]
    return sensor.drift


def true_state_jacobian(state: NominalState) -> np.ndarray:
    """Derivative of the true state (quaternions as 4-vectors) w.r.t. the error state."""
    n = len(state.drift)
    X = np.zeros((19 + 7 * n, state.dim))
    X[0:6, 0:6] = np.eye(6)
    X[6:10, 6:9] = quat_partial_wrt_theta(state.q)
    X[10:19, 9:18] = np.eye(9)
    for k, pose in enumerate(state.drift.values()):
        r, c = 19 + 7 * k, CORE_DIM + 6 * k
        X[r : r + 3, c : c + 3] = np.eye(3)
        X[r + 3 : r + 7, c + 3 : c + 6] = quat_partial_wrt_theta(pose.q)
    return X


def _true_state_column(state: NominalState, sensor_id: str) -> int:
    return 19 + 7 * list(state.drift).index(sensor_id)


def h_position(state: NominalState, sensor: SensorConfig) -> np.ndarray:
    pose = drift_pose(state, sensor)
    return quat_to_rotmat(pose.q) @ state.p + pose.p


def H_position(state: NominalState, sensor: SensorConfig, exact: bool = False) -> np.ndarray:
    """Position Jacobian.

    The drift-attitude columns are zero unless ``exact=True``, which adds the
    ``-R{q_i} [p]x`` coupling.
    """
    pose = drift_pose(state, sensor)
    R_i = quat_to_rotmat(pose.q)
    dh_dx = np.zeros((3, 19 + 7 * len(state.drift)))
    dh_dx[:, 0:3] = R_i
    if sensor.estimate_drift:
        c = _true_state_column(state, sensor.sensor_id)
        dh_dx[:, c : c + 3] = np.eye(3)
    H = dh_dx @ true_state_jacobian(state)
    if exact and sensor.estimate_drift:
        H[:, state.drift_slices(sensor.sensor_id)[1]] = -R_i @ skew(state.p)
    return H


def h_orientation(state: NominalState, sensor: SensorConfig) -> np.ndarray:
    return quat_multiply(drift_pose(state, sensor).q, state.q)


def orientation_innovation(state: NominalState, sensor: SensorConfig, q_mv) -> np.ndarray:
    """Angle-axis residual ``log(R{q_i q}^T R{q_mv})``."""
    R_pred = quat_to_rotmat(h_orientation(state, sensor))
    return log_vee(R_pred.T @ quat_to_rotmat(q_mv))


def H_orientation(
    state: NominalState, sensor: SensorConfig, q_mv, measured_frame: bool = False
) -> np.ndarray:
    """Orientation Jacobian acting on angle-axis error states.

    The drift-attitude block is the linearization ``R{q}^T``.
    ``measured_frame=True`` uses ``R{q_mv}^T`` instead, which agrees only
    while the drift attitude stays near identity.
    """
    H = np.zeros((3, state.dim))
    H[:, THETA_IDX] = np.eye(3)
    if sensor.estimate_drift:
        block = quat_to_rotmat(q_mv if measured_frame else state.q).T
        H[:, state.drift_slices(sensor.sensor_id)[1]] = block
    return H


def h_velocity(state: NominalState, sensor: SensorConfig | None = None) -> np.ndarray:
    if sensor is not None and sensor.velocity_frame == "body":
        return quat_to_rotmat(state.q).T @ state.v
    return state.v.copy()


def H_velocity(state: NominalState, sensor: SensorConfig | None = None) -> np.ndarray:
    if sensor is not None and sensor.velocity_frame == "body":
        R = quat_to_rotmat(state.q)
        H = np.zeros((3, state.dim))
        H[:, V_IDX] = R.T
        H[:, THETA_IDX] = skew(R.T @ state.v)
        return H
    dh_dx = np.zeros((3, 19 + 7 * len(state.drift)))
    dh_dx[:, 3:6] = np.eye(3)
    return dh_dx @ true_state_jacobian(state)


def innovation_and_jacobian(
    state: NominalState,
    sensor: SensorConfig,
    meas: Measurement,
    exact: bool = False,
    measured_frame: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """``exact`` applies to the position drift-attitude coupling, ``measured_frame`` to orientation."""
    if meas.kind == "position":
        return meas.value - h_position(state, sensor), H_position(state, sensor, exact)
    if meas.kind == "orientation":
        return (
            orientation_innovation(state, sensor, meas.value),
            H_orientation(state, sensor, meas.value, measured_frame),
        )
    return meas.value - h_velocity(state, sensor), H_velocity(state, sensor)


def remove_drift_position(p_mv, pose: DriftPose) -> np.ndarray:
    return quat_to_rotmat(pose.q).T @ (np.asarray(p_mv, dtype=float) - pose.p)


def remove_drift_orientation(q_mv, q_i) -> np.ndarray:
    return quat_multiply(quat_inverse(q_i), q_mv)


def bootstrap_orientation(state: NominalState, q_mv) -> np.ndarray:
    """Drift attitude that maps the current filter attitude onto ``q_mv``."""
    return quat_multiply(q_mv, quat_inverse(state.q))


def bootstrap_position(state: NominalState, p_mv, q_i=IDENTITY_QUAT) -> np.ndarray:
    """Drift offset that maps the current filter position onto ``p_mv``."""
    return np.asarray(p_mv, dtype=float) - quat_to_rotmat(q_i) @ state.p
