"""Quaternion and rotation-group primitives.

Quaternions are numpy arrays ``[w, x, y, z]`` (Hamilton convention) and
``quat_to_rotmat(q)`` maps body-frame vectors into the world frame. Every
quaternion-producing function returns a unit quaternion with ``w >= 0``.
"""
from __future__ import annotations

import math

import numpy as np

SMALL_ANGLE = 1e-8
ORTHONORMAL_TOL = 1e-6

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def skew(v) -> np.ndarray:
    """Cross-product matrix: ``skew(v) @ u == np.cross(v, u)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def canonical(q) -> np.ndarray:
    """Normalize ``q`` and flip its sign so that ``w >= 0``."""
    q = np.asarray(q, dtype=float)
    n = math.sqrt(q @ q)
    if n == 0.0 or not math.isfinite(n):
        raise ValueError(f"cannot normalize quaternion {q}")
    return q / (-n if q[0] < 0.0 else n)


def quat_from_angle_axis(v) -> np.ndarray:
    x, y, z = v
    theta2 = x * x + y * y + z * z
    theta = math.sqrt(theta2)
    if theta < SMALL_ANGLE:
        # second-order series of cos(t/2), sin(t/2)/t
        c, k = 1.0 - theta2 / 8.0, 0.5 - theta2 / 48.0
    else:
        c, k = math.cos(0.5 * theta), math.sin(0.5 * theta) / theta
    return canonical(np.array([c, k * x, k * y, k * z], dtype=float))


def quat_to_angle_axis(q) -> np.ndarray:
    """Angle-axis vector of ``q`` with magnitude in ``[0, pi]``."""
    q = canonical(q)
    w, vec = q[0], q[1:]
    n = np.sqrt(vec @ vec)
    if n < SMALL_ANGLE:
        return 2.0 * vec / w
    return (2.0 * np.arctan2(n, w) / n) * vec


def quat_to_rotmat(q) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotmat_to_quat(R) -> np.ndarray:
    """Shepperd's method: extract the largest quaternion component first."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    k = int(np.argmax([tr, R[0, 0], R[1, 1], R[2, 2]]))
    if k == 0:
        s = 2.0 * np.sqrt(1.0 + tr)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif k == 1:
        s = 2.0 * np.sqrt(1.0 + 2.0 * R[0, 0] - tr)
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif k == 2:
        s = 2.0 * np.sqrt(1.0 + 2.0 * R[1, 1] - tr)
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + 2.0 * R[2, 2] - tr)
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    return canonical(q)


def quat_multiply(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return canonical(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_inverse(q) -> np.ndarray:
    q = canonical(q)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def check_rotation(R, tol: float = ORTHONORMAL_TOL) -> None:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise ValueError("rotation matrix must be a finite 3x3 array")
    err = np.max(np.abs(R.T @ R - np.eye(3)))
    det = np.linalg.det(R)
    if err > tol or abs(det - 1.0) > tol:
        raise ValueError(
            f"matrix is not a rotation (orthonormality error {err:.3g}, det {det:.12g})"
        )


def log_vee(R) -> np.ndarray:
    """Angle-axis vector ``v`` with ``exp(skew(v)) == R`` and ``|v| <= pi``.

    Raises ``ValueError`` when ``R`` is not orthonormal to within 1e-6.
    """
    check_rotation(R)
    return quat_to_angle_axis(rotmat_to_quat(R))


def exp_skew(v) -> np.ndarray:
    """Rotation matrix ``exp(skew(v))``."""
    return quat_to_rotmat(quat_from_angle_axis(v))


def quat_partial_wrt_theta(q) -> np.ndarray:
    """4x3 Jacobian of ``q * quat_from_angle_axis(theta)`` at ``theta = 0``."""
    w, x, y, z = q
    return 0.5 * np.array(
        [
            [-x, -y, -z],
            [w, -z, y],
            [z, w, -x],
            [-y, x, w],
        ]
    )


def yaw_of(q) -> float:
    """Heading angle (rad) of the body x axis projected on the world xy plane."""
    R = quat_to_rotmat(q)
    return float(np.arctan2(R[1, 0], R[0, 0]))


def quat_multiply_batch(a, b) -> np.ndarray:
    """Row-wise Hamilton product of ``(n, 4)`` arrays (not canonicalized)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, av = a[:, :1], a[:, 1:]
    bw, bv = b[:, :1], b[:, 1:]
    w = aw * bw - np.sum(av * bv, axis=1, keepdims=True)
    v = aw * bv + bw * av + np.cross(av, bv)
    return np.hstack([w, v])


def quat_log_batch(q) -> np.ndarray:
    """Row-wise angle-axis vectors (magnitude in ``[0, pi]``) of ``(n, 4)`` quaternions."""
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q, axis=1, keepdims=True)
    q = np.where(q[:, :1] < 0, -q, q)
    w, v = q[:, :1], q[:, 1:]
    n = np.linalg.norm(v, axis=1, keepdims=True)
    small = n < SMALL_ANGLE
    safe_n = np.where(small, 1.0, n)
    safe_w = np.where(w > 0, w, 1.0)
    return np.where(small, 2.0 / safe_w, 2.0 * np.arctan2(n, w) / safe_n) * v
