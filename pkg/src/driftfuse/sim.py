"""Synthetic ground truth, IMU streams and drifting pose/position/velocity sensors."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .measurements import Measurement
from .so3 import (
    IDENTITY_QUAT,
    canonical,
    quat_from_angle_axis,
    quat_log_batch,
    quat_multiply,
    quat_multiply_batch,
    quat_to_rotmat,
)
from .state import GRAVITY, ImuSample

PROFILE_KINDS = ("hover", "line", "circle", "lissajous", "waypoint-spline")
YAW_PROFILES = ("fixed", "tangent", "sinusoid")
DRIFT_MODELS = ("none", "constant", "random-walk")


@dataclass
class TrajectoryProfile:
    kind: str = "circle"
    amplitude: float = 1.0  # [m]
    period: float = 2 * np.pi  # [s]
    yaw_profile: str = "fixed"
    duration: float = 10.0  # [s]
    seed: int = 0
    center: tuple = (0.0, 0.0, 1.0)
    yaw_amplitude: float = 0.5  # [rad], sinusoid profile
    tilt_amplitude: float = 0.0  # [rad], roll/pitch oscillation
    n_waypoints: int = 6

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.yaw_profile not in YAW_PROFILES:
            raise ValueError(f"unknown yaw profile {self.yaw_profile!r}")
        if not self.duration > 0 or not self.period > 0:
            raise ValueError("duration and period must be positive")
        if self.yaw_profile == "tangent" and self.kind not in ("circle", "lissajous"):
            # heading along the velocity is undefined where the vehicle stops
            raise ValueError("tangent yaw needs a trajectory that never stops")


@dataclass
class GroundTruthSample:
    t: float
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    q: np.ndarray
    w: np.ndarray  # body frame


@dataclass
class TruthSeries:
    """Ground truth stored column-wise; indexing yields ``GroundTruthSample``."""

    t: np.ndarray
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    q: np.ndarray
    w: np.ndarray

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> GroundTruthSample:
        return GroundTruthSample(float(self.t[i]), self.p[i], self.v[i], self.a[i], self.q[i], self.w[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def _translation(profile: TrajectoryProfile, t: np.ndarray):
    c = np.asarray(profile.center, dtype=float)
    A = profile.amplitude
    W = 2 * np.pi / profile.period
    z = np.zeros_like(t)
    if profile.kind == "hover":
        p = np.tile(c, (len(t), 1))
        return p, np.zeros_like(p), np.zeros_like(p)
    if profile.kind == "line":
        d = np.array([1.0, 0.0, 0.0])
        s, co = np.sin(W * t), np.cos(W * t)
        return c + np.outer(A * s, d), np.outer(A * W * co, d), np.outer(-A * W * W * s, d)
    if profile.kind == "circle":
        s, co = np.sin(W * t), np.cos(W * t)
        p = c + A * np.column_stack([co, s, z])
        v = A * W * np.column_stack([-s, co, z])
        a = -A * W * W * np.column_stack([co, s, z])
        return p, v, a
    if profile.kind == "lissajous":
        amp = np.array([A, 0.5 * A, 0.15 * A])
        freq = np.array([1.0, 2.0, 3.0]) * W
        ph = np.outer(t, freq)
        return c + amp * np.sin(ph), amp * freq * np.cos(ph), -amp * freq**2 * np.sin(ph)
    # periodic C2 spline through seeded waypoints
    rng = np.random.default_rng(profile.seed)
    n = profile.n_waypoints
    pts = c + rng.uniform(-A, A, size=(n, 3)) * [1.0, 1.0, 0.2]
    pts = np.vstack([pts, pts[:1]])
    spline = CubicSpline(np.linspace(0.0, profile.period, n + 1), pts, bc_type="periodic")
    tm = np.mod(t, profile.period)
    return spline(tm), spline(tm, 1), spline(tm, 2)


def _euler(profile: TrajectoryProfile, t: np.ndarray, v: np.ndarray, a: np.ndarray):
    """Roll, pitch, yaw and their rates."""
    W = 2 * np.pi / profile.period
    if profile.yaw_profile == "fixed":
        yaw, dyaw = np.zeros_like(t), np.zeros_like(t)
    elif profile.yaw_profile == "sinusoid":
        Y = profile.yaw_amplitude
        yaw, dyaw = Y * np.sin(W * t), Y * W * np.cos(W * t)
    else:
        speed2 = v[:, 0] ** 2 + v[:, 1] ** 2
        yaw = np.arctan2(v[:, 1], v[:, 0])
        dyaw = (v[:, 0] * a[:, 1] - v[:, 1] * a[:, 0]) / speed2
    T = profile.tilt_amplitude
    roll, droll = T * np.sin(1.3 * W * t), 1.3 * W * T * np.cos(1.3 * W * t)
    pitch, dpitch = T * np.sin(0.7 * W * t + 0.5), 0.7 * W * T * np.cos(0.7 * W * t + 0.5)
    return roll, pitch, yaw, droll, dpitch, dyaw


def euler_to_quat(roll, pitch, yaw) -> np.ndarray:
    """Quaternions (n, 4) of ``Rz(yaw) Ry(pitch) Rx(roll)``, with w >= 0."""
    cr, sr = np.cos(roll / 2), np.sin(roll / 2)
    cp, sp = np.cos(pitch / 2), np.sin(pitch / 2)
    cy, sy = np.cos(yaw / 2), np.sin(yaw / 2)
    q = np.column_stack(
        [
            cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
        ]
    )
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    q[q[:, 0] < 0] *= -1
    return q


def generate_truth(profile: TrajectoryProfile, rate: float) -> TruthSeries:
    if not rate > 0:
        raise ValueError("rate must be positive")
    if profile.kind != "hover" and rate < 2.0 / profile.period:
        raise ValueError("sampling rate must be at least twice the trajectory frequency")
    n = int(np.floor(profile.duration * rate + 1e-9)) + 1
    t = np.arange(n) / rate
    p, v, a = _translation(profile, t)
    roll, pitch, yaw, dr, dp, dy = _euler(profile, t, v, a)
    q = euler_to_quat(roll, pitch, yaw)
    sr, cr = np.sin(roll), np.cos(roll)
    sp, cp = np.sin(pitch), np.cos(pitch)
    w = np.column_stack(
        [dr - dy * sp, dp * cr + dy * sr * cp, -dp * sr + dy * cr * cp]
    )
    return TruthSeries(t, p, v, a, q, w)


@dataclass
class ImuSpec:
    accel_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    accel_sigma: np.ndarray = field(default_factory=lambda: np.zeros(3))  # per sample [m/s^2]
    gyro_sigma: np.ndarray = field(default_factory=lambda: np.zeros(3))  # per sample [rad/s]
    mode: str = "increment"

    def __post_init__(self):
        if self.mode not in ("increment", "sample"):
            raise ValueError("IMU mode must be 'increment' or 'sample'")
        for name in ("accel_bias", "gyro_bias", "accel_sigma", "gyro_sigma"):
            setattr(self, name, np.broadcast_to(np.asarray(getattr(self, name), float), (3,)).copy())


def synthesize_imu(
    truth: TruthSeries, spec: ImuSpec | None = None, g=GRAVITY, seed: int = 0
) -> list[ImuSample]:
    """Accelerometer and gyro samples for ``truth``.

    ``mode="sample"`` evaluates ``R^T (a - g)`` and ``w`` at each instant.
    ``mode="increment"`` (default) reports, at ``t_k``, the mean specific
    force and rotation over ``[t_{k-1}, t_k]`` in the body frame at
    ``t_{k-1}``, as an ideal integrating IMU does; the first sample is a
    point sample.
    """
    if len(truth) == 0:
        raise ValueError("empty truth sequence")
    spec = spec or ImuSpec()
    g = np.asarray(g, dtype=float)
    rng = np.random.default_rng(seed)
    n = len(truth)
    R = np.array([quat_to_rotmat(q) for q in truth.q])
    f = np.einsum("nji,nj->ni", R, truth.a - g)
    w = truth.w.copy()
    if spec.mode == "increment" and n > 1:
        dt = np.diff(truth.t)[:, None]
        f[1:] = np.einsum("nji,nj->ni", R[:-1], np.diff(truth.v, axis=0) / dt - g)
        q_prev_inv = truth.q[:-1] * [1.0, -1.0, -1.0, -1.0]
        w[1:] = quat_log_batch(quat_multiply_batch(q_prev_inv, truth.q[1:])) / dt
    a_noise = rng.normal(size=(n, 3)) * spec.accel_sigma
    w_noise = rng.normal(size=(n, 3)) * spec.gyro_sigma
    f = f + spec.accel_bias + a_noise
    w = w + spec.gyro_bias + w_noise
    return [ImuSample(float(truth.t[k]), f[k], w[k]) for k in range(n)]


@dataclass
class SensorSpec:
    sensor_id: str
    kinds: tuple[str, ...]
    rate: float
    noise: dict[str, np.ndarray] = field(default_factory=dict)  # per-axis sigma per kind
    drift_model: str = "none"
    drift_p: np.ndarray = field(default_factory=lambda: np.zeros(3))  # initial/constant offset [m]
    drift_q: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())
    walk_p: float = 0.0  # [m / sqrt(s)]
    walk_theta: float = 0.0  # [rad / sqrt(s)]
    outlier_prob: float = 0.0
    outlier_magnitude: dict[str, np.ndarray] = field(default_factory=dict)
    latency: float = 0.0
    velocity_frame: str = "world"

    def __post_init__(self):
        self.kinds = tuple(k for k in ("orientation", "position", "velocity") if k in self.kinds)
        if not self.kinds:
            raise ValueError(f"{self.sensor_id}: no measurement kinds")
        if not self.rate > 0:
            raise ValueError(f"{self.sensor_id}: rate must be positive")
        if not 0.0 <= self.outlier_prob < 1.0:
            raise ValueError(f"{self.sensor_id}: outlier probability must be in [0, 1)")
        if self.drift_model not in DRIFT_MODELS:
            raise ValueError(f"{self.sensor_id}: unknown drift model {self.drift_model!r}")
        if self.latency < 0:
            raise ValueError(f"{self.sensor_id}: latency must be non-negative")
        self.noise = {k: np.broadcast_to(np.asarray(v, float), (3,)).copy() for k, v in self.noise.items()}
        self.outlier_magnitude = {
            k: np.broadcast_to(np.asarray(v, float), (3,)).copy() for k, v in self.outlier_magnitude.items()
        }
        self.drift_p = np.asarray(self.drift_p, dtype=float)
        self.drift_q = canonical(self.drift_q)


@dataclass
class DriftSample:
    t: float
    sensor_id: str
    p: np.ndarray
    q: np.ndarray


@dataclass
class SensorStream:
    measurements: list[Measurement]
    drift: list[DriftSample]


def synthesize_sensor(truth: TruthSeries, spec: SensorSpec, seed: int = 0) -> SensorStream:
    """Sample ``truth`` at the sensor rate through the sensor's drift transform.

    Sample instants snap to the nearest truth timestamp. Position is reported
    as ``R{q_i} p + p_i``, orientation as ``q_i * q * exp(noise)`` and velocity
    without drift. Outliers add a spike on one random axis and are labelled.
    """
    rng = np.random.default_rng(seed)
    truth_rate = (len(truth) - 1) / (truth.t[-1] - truth.t[0]) if len(truth) > 1 else spec.rate
    if spec.rate > truth_rate * (1 + 1e-9):
        raise ValueError(f"{spec.sensor_id}: truth is sampled slower than the sensor rate")
    span = truth.t[-1] - truth.t[0]
    ticks = truth.t[0] + np.arange(int(np.floor(span * spec.rate + 1e-9)) + 1) / spec.rate
    idx = np.unique(np.clip(np.searchsorted(truth.t, ticks - 0.5 / truth_rate), 0, len(truth) - 1))

    p_i, q_i = spec.drift_p.copy(), spec.drift_q.copy()
    if spec.drift_model == "none":
        p_i, q_i = np.zeros(3), IDENTITY_QUAT.copy()
    out, drift = [], []
    t_prev = None
    for i in idx:
        t = float(truth.t[i])
        if spec.drift_model == "random-walk" and t_prev is not None:
            dt = t - t_prev
            p_i = p_i + rng.normal(size=3) * spec.walk_p * np.sqrt(dt)
            q_i = quat_multiply(q_i, quat_from_angle_axis(rng.normal(size=3) * spec.walk_theta * np.sqrt(dt)))
        t_prev = t
        drift.append(DriftSample(t, spec.sensor_id, p_i.copy(), q_i.copy()))
        for kind in spec.kinds:
            sigma = spec.noise.get(kind, np.zeros(3))
            noise = rng.normal(size=3) * sigma
            spike = np.zeros(3)
            is_outlier = spec.outlier_prob > 0 and rng.uniform() < spec.outlier_prob
            if is_outlier:
                axis = int(rng.integers(3))
                spike[axis] = rng.choice([-1.0, 1.0]) * spec.outlier_magnitude[kind][axis]
            if kind == "position":
                value = quat_to_rotmat(q_i) @ truth.p[i] + p_i + noise + spike
            elif kind == "orientation":
                value = quat_multiply(quat_multiply(q_i, truth.q[i]), quat_from_angle_axis(noise + spike))
            else:
                v = truth.v[i]
                if spec.velocity_frame == "body":
                    v = quat_to_rotmat(truth.q[i]).T @ v
                value = v + noise + spike
            out.append(
                Measurement(
                    t,
                    spec.sensor_id,
                    kind,
                    value,
                    np.maximum(sigma**2, 1e-12),
                    t_rx=t + spec.latency,
                    outlier=is_outlier,
                )
            )
    return SensorStream(out, drift)


def merge_streams(imu: list[ImuSample], streams: list[SensorStream]) -> list:
    """Merge IMU samples and measurements by arrival time, IMU first on ties."""
    keyed = [(s.t, 0, n, s) for n, s in enumerate(imu)]
    order = 0
    for stream in streams:
        for m in stream.measurements:
            order += 1
            keyed.append((m.t_rx, 1, order, m))
    keyed.sort(key=lambda k: k[:3])
    return [k[3] for k in keyed]

