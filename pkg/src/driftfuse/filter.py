"""Error-state prediction, correction and injection."""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .so3 import quat_from_angle_axis, quat_multiply, quat_to_rotmat, skew
from .state import (
    AB_IDX,
    CORE_DIM,
    DriftPose,
    G_IDX,
    P_IDX,
    THETA_IDX,
    V_IDX,
    WB_IDX,
    ImuSample,
    NominalState,
    ProcessNoiseParams,
)

MAX_DT = 0.1
MAX_CONDITION = 1e12

_I3 = np.eye(3)
_I3.setflags(write=False)
_NOISE_ROWS = np.arange(V_IDX.start, WB_IDX.stop)


class FilterError(ValueError):
    """Raised on clock faults, non-finite inputs, or numerical breakdown."""


def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def build_Fx(
    state: NominalState, u: ImuSample, dt: float, second_order: bool = False
) -> np.ndarray:
    """Error-state transition matrix for one IMU step.

    With ``second_order=True`` the ``dt**2`` terms that the first-order matrix
    drops are kept: the position row's couplings to attitude, accelerometer
    bias and gravity, and the rotation-rate correction of the gyro-bias block.
    """
    acc = np.asarray(u.a, dtype=float) - state.a_b
    omega = (np.asarray(u.w, dtype=float) - state.w_b) * dt
    return _fx(state.dim, quat_to_rotmat(state.q), acc, omega, dt, second_order)


def _fx(D, R, acc, omega, dt, second_order):
    A = skew(acc) * dt
    I3 = _I3
    F = np.eye(D)
    F[P_IDX, V_IDX] = I3 * dt
    F[V_IDX, THETA_IDX] = -R @ A
    F[V_IDX, AB_IDX] = -R * dt
    F[V_IDX, G_IDX] = I3 * dt
    F[THETA_IDX, THETA_IDX] = quat_to_rotmat(quat_from_angle_axis(omega)).T
    F[THETA_IDX, WB_IDX] = -I3 * dt
    if second_order:
        F[P_IDX, THETA_IDX] = -0.5 * dt * R @ A
        F[P_IDX, AB_IDX] = -0.5 * dt * dt * R
        F[P_IDX, G_IDX] = 0.5 * dt * dt * I3
        F[THETA_IDX, WB_IDX] = -(I3 - 0.5 * skew(omega)) * dt
    return F


@lru_cache(maxsize=8)
def _fw(D: int) -> np.ndarray:
    Fw = np.zeros((D, 12))
    Fw[3:15, :] = np.eye(12)
    Fw.setflags(write=False)
    return Fw


def build_Fw(D: int) -> np.ndarray:
    """Noise input matrix: velocity, attitude and both bias blocks."""
    return _fw(D)


def _qw_diag(params: ProcessNoiseParams, dt: float) -> np.ndarray:
    diag = np.concatenate(
        [params.sigma_v2, params.sigma_theta2, params.sigma_a2, params.sigma_w2]
    )
    return diag * (dt * dt)


def build_Qw(params: ProcessNoiseParams, dt: float) -> np.ndarray:
    if dt <= 0:
        raise FilterError(f"dt must be positive, got {dt}")
    return np.diag(_qw_diag(params, dt))


def _check_dt(dt: float) -> None:
    if not math.isfinite(dt) or dt <= 0.0 or dt > MAX_DT:
        raise FilterError(f"invalid IMU interval dt={dt!r} (must be in (0, {MAX_DT}])")


def predict(
    state: NominalState,
    P: np.ndarray,
    u: ImuSample,
    dt: float,
    params: ProcessNoiseParams,
    second_order: bool = False,
    drift_rates: np.ndarray | None = None,
) -> tuple[NominalState, np.ndarray]:
    """Integrate one IMU sample and propagate the error covariance.

    ``drift_rates`` optionally gives random-walk variance rates (per second)
    for the drift part of the error state; by default drift states get no
    process noise.
    """
    _check_dt(dt)
    a_mv = np.asarray(u.a, dtype=float)
    w_mv = np.asarray(u.w, dtype=float)
    if not (np.isfinite(a_mv).all() and np.isfinite(w_mv).all()):
        raise FilterError(f"non-finite IMU sample at t={u.t}")

    R = quat_to_rotmat(state.q)
    acc_b = a_mv - state.a_b
    omega = (w_mv - state.w_b) * dt
    acc = R @ acc_b + state.g
    new = NominalState.__new__(NominalState)
    new.p = state.p + state.v * dt + 0.5 * acc * dt * dt
    new.v = state.v + acc * dt
    new.q = quat_multiply(state.q, quat_from_angle_axis(omega))
    new.a_b = state.a_b
    new.w_b = state.w_b
    new.g = state.g
    new.drift = state.drift

    D = state.dim
    Fx = _fx(D, R, acc_b, omega, dt, second_order)
    P_new = Fx @ P @ Fx.T
    # Fw Qw Fw^T is diagonal on the noise-driven rows, so add it in place
    P_new[_NOISE_ROWS, _NOISE_ROWS] += _qw_diag(params, dt)
    if drift_rates is not None:
        idx = np.arange(CORE_DIM, D)
        P_new[idx, idx] += np.asarray(drift_rates, dtype=float) * dt
    return new, symmetrize(P_new)


def correct(
    P: np.ndarray, innovation: np.ndarray, H: np.ndarray, V: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Kalman update; returns the error-state estimate and updated covariance.

    ``V`` is either the diagonal measurement covariance or its diagonal.
    """
    innovation = np.asarray(innovation, dtype=float)
    H = np.asarray(H, dtype=float)
    V = np.asarray(V, dtype=float)
    m = innovation.shape[0]
    if V.ndim == 2:
        if V.shape != (m, m) or np.count_nonzero(V - np.diag(np.diag(V))):
            raise FilterError("measurement covariance must be diagonal and positive")
        V = np.diag(V)
    if H.shape != (m, P.shape[0]) or V.shape != (m,):
        raise FilterError(f"shape mismatch: H {H.shape}, V {V.shape}, P {P.shape}")
    if not (V > 0).all():
        raise FilterError("measurement covariance must be diagonal and positive")

    PHt = P @ H.T
    S = H @ PHt
    S[np.diag_indices(m)] += V
    # S is symmetric, so its condition number is the eigenvalue ratio
    eig = np.abs(np.linalg.eigvalsh(S))
    cond = eig.max() / eig.min() if eig.min() > 0 else np.inf
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise FilterError(f"innovation covariance is singular (condition {cond:.3g})")
    K = np.linalg.solve(S, PHt.T).T
    dx = K @ innovation
    # (I - K H) P, without forming I
    P_new = P - K @ PHt.T
    return dx, symmetrize(P_new)


def inject_and_reset(
    state: NominalState,
    dx: np.ndarray,
    P: np.ndarray,
    reset_jacobian: bool = True,
) -> tuple[NominalState, np.ndarray, np.ndarray]:
    """Fold ``dx`` into the nominal state, zero it, and re-express ``P``.

    The covariance is conjugated by the reset Jacobian ``G``, identity except
    ``I - skew(dtheta / 2)`` on every attitude block; ``reset_jacobian=False``
    uses ``G = I``.
    """
    dx = np.asarray(dx, dtype=float)
    if dx.shape != (state.dim,) or not np.all(np.isfinite(dx)):
        raise FilterError("error state must be a finite vector of the state dimension")
    thetas = [(THETA_IDX, None)] + [
        (state.drift_slices(sid)[1], sid) for sid in state.drift
    ]
    for sl, sid in thetas:
        if math.sqrt(dx[sl] @ dx[sl]) > np.pi / 2:
            where = "attitude" if sid is None else f"drift attitude of {sid!r}"
            raise FilterError(f"{where} correction exceeds pi/2; filter diverged")

    new = NominalState.__new__(NominalState)
    new.drift = {sid: DriftPose(pose.p, pose.q) for sid, pose in state.drift.items()}
    new.p = state.p + dx[P_IDX]
    new.v = state.v + dx[V_IDX]
    new.q = quat_multiply(state.q, quat_from_angle_axis(dx[THETA_IDX]))
    new.a_b = state.a_b + dx[AB_IDX]
    new.w_b = state.w_b + dx[WB_IDX]
    new.g = state.g + dx[G_IDX]
    for (st, _), (sid, pose) in zip(thetas[1:], new.drift.items()):
        sp = slice(st.start - 3, st.start)
        pose.p = pose.p + dx[sp]
        pose.q = quat_multiply(pose.q, quat_from_angle_axis(dx[st]))

    if reset_jacobian:
        G = np.eye(state.dim)
        for sl, _ in thetas:
            G[sl, sl] -= skew(0.5 * dx[sl])
        P = symmetrize(G @ P @ G.T)
    return new, np.zeros_like(dx), P


def covariance_health(P: np.ndarray) -> tuple[float, float]:
    """Return ``(max asymmetry, min eigenvalue)`` of ``P``."""
    asym = float(np.max(np.abs(P - P.T)))
    return asym, float(np.min(np.linalg.eigvalsh(symmetrize(P))))
