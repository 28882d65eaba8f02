"""State containers and the error-state block layout."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .so3 import IDENTITY_QUAT, canonical

GRAVITY = np.array([0.0, 0.0, -9.81])

# error-state block offsets: [dp, dv, dtheta, da_b, dw_b, dg, (dp_i, dtheta_i)...]
P_IDX = slice(0, 3)
V_IDX = slice(3, 6)
THETA_IDX = slice(6, 9)
AB_IDX = slice(9, 12)
WB_IDX = slice(12, 15)
G_IDX = slice(15, 18)
CORE_DIM = 18
DRIFT_DIM = 6


@dataclass
class ImuSample:
    t: float
    a: np.ndarray  # specific force, body frame [m/s^2]
    w: np.ndarray  # angular rate, body frame [rad/s]


@dataclass
class DriftPose:
    """Transform from the filter world frame into a sensor's reference frame."""

    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())

    def copy(self) -> DriftPose:
        return DriftPose(self.p.copy(), self.q.copy())


@dataclass
class NominalState:
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())
    a_b: np.ndarray = field(default_factory=lambda: np.zeros(3))
    w_b: np.ndarray = field(default_factory=lambda: np.zeros(3))
    g: np.ndarray = field(default_factory=lambda: GRAVITY.copy())
    drift: dict[str, DriftPose] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("p", "v", "a_b", "w_b", "g"):
            value = np.array(getattr(self, name), dtype=float)
            if value.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            setattr(self, name, value)
        self.q = canonical(self.q)
        for pose in self.drift.values():
            pose.p = np.array(pose.p, dtype=float)
            pose.q = canonical(pose.q)

    @property
    def dim(self) -> int:
        return CORE_DIM + DRIFT_DIM * len(self.drift)

    def drift_slices(self, sensor_id: str) -> tuple[slice, slice]:
        """Error-state slices ``(dp_i, dtheta_i)`` of one drift sensor."""
        k = list(self.drift).index(sensor_id)
        start = CORE_DIM + DRIFT_DIM * k
        return slice(start, start + 3), slice(start + 3, start + 6)

    def copy(self) -> NominalState:
        return NominalState(
            self.p.copy(),
            self.v.copy(),
            self.q.copy(),
            self.a_b.copy(),
            self.w_b.copy(),
            self.g.copy(),
            {k: d.copy() for k, d in self.drift.items()},
        )


@dataclass
class ProcessNoiseParams:
    """Per-axis process variances, applied as ``sigma**2 * dt**2`` per step."""

    sigma_v2: np.ndarray
    sigma_theta2: np.ndarray
    sigma_a2: np.ndarray
    sigma_w2: np.ndarray

    def __post_init__(self):
        for name in ("sigma_v2", "sigma_theta2", "sigma_a2", "sigma_w2"):
            value = _vec3(getattr(self, name), name)
            if np.any(value <= 0):
                raise ValueError(f"{name} must be positive")
            setattr(self, name, value)


def _vec3(value, name) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(value, dtype=float), (3,)).copy()
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


DEFAULT_INITIAL_VARIANCE = {
    "p": 1e-2,
    "v": 1e-2,
    "theta": 1e-3,
    "a_b": 1e-4,
    "w_b": 1e-4,
    "g": 1e-6,
    "drift_p": 1e-2,
    "drift_theta": 1e-2,
}


def initial_covariance(
    drift_ids: Iterable[str], overrides: dict | None = None
) -> np.ndarray:
    """Diagonal initial covariance; each entry may be a scalar or 3-vector."""
    var = dict(DEFAULT_INITIAL_VARIANCE)
    var.update(overrides or {})
    unknown = set(var) - set(DEFAULT_INITIAL_VARIANCE)
    if unknown:
        raise ValueError(f"unknown covariance blocks: {sorted(unknown)}")
    diag = [_vec3(var[k], k) for k in ("p", "v", "theta", "a_b", "w_b", "g")]
    for _ in drift_ids:
        diag += [_vec3(var["drift_p"], "drift_p"), _vec3(var["drift_theta"], "drift_theta")]
    diag = np.concatenate(diag)
    if np.any(diag <= 0):
        raise ValueError("initial variances must be positive")
    return np.diag(diag)
