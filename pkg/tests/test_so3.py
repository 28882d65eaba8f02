import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftfuse.so3 import (
    IDENTITY_QUAT,
    exp_skew,
    log_vee,
    quat_from_angle_axis,
    quat_inverse,
    quat_multiply,
    quat_partial_wrt_theta,
    quat_to_rotmat,
    skew,
)


def expm_series(M, terms=30):
    out = np.eye(3)
    term = np.eye(3)
    for k in range(1, terms):
        term = term @ M / k
        out = out + term
    return out


def random_quat(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return q if q[0] >= 0 else -q


def Rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


vec3 = st.lists(st.floats(-10, 10), min_size=3, max_size=3).map(np.array)


class TestSkew:
    def test_zero(self):
        assert np.array_equal(skew([0, 0, 0]), np.zeros((3, 3)))

    def test_values(self):
        assert np.array_equal(skew([1, 2, 3]), [[0, -3, 2], [3, 0, -1], [-2, 1, 0]])

    def test_cross_product(self):
        assert np.array_equal(skew([1, 0, 0]) @ [0, 1, 0], [0, 0, 1])

    @given(vec3, vec3)
    def test_antisymmetric_and_cross(self, v, u):
        M = skew(v)
        assert np.array_equal(M, -M.T)
        np.testing.assert_allclose(M @ u, np.cross(v, u), atol=1e-9)

    @given(vec3, vec3, st.floats(-5, 5), st.floats(-5, 5))
    def test_linear(self, u, v, a, b):
        np.testing.assert_allclose(
            skew(a * u + b * v), a * skew(u) + b * skew(v), rtol=0, atol=1e-12
        )


class TestQuaternion:
    def test_identity(self):
        assert np.array_equal(quat_from_angle_axis([0, 0, 0]), IDENTITY_QUAT)
        assert np.array_equal(quat_to_rotmat(IDENTITY_QUAT), np.eye(3))

    def test_quarter_turn(self):
        q = quat_from_angle_axis([0, 0, np.pi / 2])
        np.testing.assert_allclose(q, [np.cos(np.pi / 4), 0, 0, np.sin(np.pi / 4)], atol=1e-15)
        np.testing.assert_allclose(
            quat_to_rotmat(q), [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15
        )

    def test_matches_matrix_exponential(self):
        v = np.array([0.3, -0.2, 0.1])
        R = quat_to_rotmat(quat_from_angle_axis(v))
        assert np.max(np.abs(R - expm_series(skew(v)))) <= 1e-12

    def test_small_angle_branch(self):
        v = np.array([3e-9, -1e-9, 2e-9])
        R = quat_to_rotmat(quat_from_angle_axis(v))
        assert np.max(np.abs(R - expm_series(skew(v)))) <= 1e-15
        np.testing.assert_allclose(log_vee(R), v, rtol=1e-6, atol=0)

    def test_multiply_identity_and_inverse(self):
        rng = np.random.default_rng(0)
        a = random_quat(rng)
        np.testing.assert_allclose(quat_multiply(a, IDENTITY_QUAT), a, atol=1e-15)
        np.testing.assert_allclose(quat_multiply(a, quat_inverse(a)), IDENTITY_QUAT, atol=1e-15)

    def test_multiply_matches_matrix_composition(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            a, b = random_quat(rng), random_quat(rng)
            lhs = quat_to_rotmat(quat_multiply(a, b))
            assert np.max(np.abs(lhs - quat_to_rotmat(a) @ quat_to_rotmat(b))) <= 1e-12

    def test_associative(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            a, b, c = (random_quat(rng) for _ in range(3))
            np.testing.assert_allclose(
                quat_multiply(quat_multiply(a, b), c),
                quat_multiply(a, quat_multiply(b, c)),
                atol=1e-12,
            )

    def test_inverse(self):
        np.testing.assert_array_equal(quat_inverse([1, 0, 0, 0]), [1, 0, 0, 0])
        np.testing.assert_allclose(
            quat_inverse([0.7071, 0, 0, 0.7071]), np.array([1, 0, 0, -1]) / np.sqrt(2), atol=1e-15
        )
        rng = np.random.default_rng(3)
        for _ in range(1000):
            q = random_quat(rng)
            assert np.linalg.norm(quat_multiply(q, quat_inverse(q)) - IDENTITY_QUAT) <= 1e-12

    @given(vec3)
    @settings(max_examples=300)
    def test_unit_norm_and_sign(self, v):
        q = quat_from_angle_axis(v)
        assert abs(np.linalg.norm(q) - 1.0) <= 1e-9
        assert q[0] >= 0.0

    def test_rotmat_orthonormal(self):
        rng = np.random.default_rng(4)
        for _ in range(500):
            R = quat_to_rotmat(random_quat(rng))
            assert np.max(np.abs(R.T @ R - np.eye(3))) <= 1e-9
            assert abs(np.linalg.det(R) - 1.0) <= 1e-9


class TestLogVee:
    def test_identity(self):
        assert np.array_equal(log_vee(np.eye(3)), np.zeros(3))

    def test_rz(self):
        np.testing.assert_allclose(log_vee(Rz(0.5)), [0, 0, 0.5], atol=1e-15)

    def test_near_pi(self):
        axis = np.ones(3) / np.sqrt(3)
        angle = np.pi - 1e-7
        v = axis * angle
        # oracle: rotation built through the quaternion route
        R = quat_to_rotmat(quat_from_angle_axis(v))
        np.testing.assert_allclose(log_vee(R), v, atol=1e-6)

    def test_rejects_non_rotation(self):
        with pytest.raises(ValueError):
            log_vee(np.eye(3) * 1.001)
        with pytest.raises(ValueError):
            log_vee(np.diag([1.0, 1.0, -1.0]))

    def test_round_trip_from_quaternion(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            q = random_quat(rng)
            q2 = quat_from_angle_axis(log_vee(quat_to_rotmat(q)))
            assert min(np.abs(q2 - q).max(), np.abs(q2 + q).max()) <= 1e-9

    def test_round_trip_from_vector(self):
        rng = np.random.default_rng(6)
        for _ in range(1000):
            d = rng.normal(size=3)
            v = d / np.linalg.norm(d) * rng.uniform(0.0, np.pi - 1e-6)
            np.testing.assert_allclose(log_vee(exp_skew(v)), v, rtol=0, atol=1e-9)

    def test_exp_of_log(self):
        rng = np.random.default_rng(7)
        for _ in range(500):
            R = quat_to_rotmat(random_quat(rng))
            v = log_vee(R)
            assert np.linalg.norm(v) <= np.pi + 1e-12
            assert np.max(np.abs(expm_series(skew(v), 40) - R)) <= 1e-9


class TestPartial:
    def test_identity(self):
        expected = 0.5 * np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
        np.testing.assert_array_equal(quat_partial_wrt_theta(IDENTITY_QUAT), expected)

    def test_quarter_turn_z(self):
        c = 0.7071
        expected = 0.5 * np.array([[0, 0, -c], [c, -c, 0], [c, c, 0], [0, 0, c]])
        np.testing.assert_allclose(quat_partial_wrt_theta([c, 0, 0, c]), expected, atol=0)

    def test_finite_differences(self):
        rng = np.random.default_rng(8)
        h = 1e-6
        for _ in range(100):
            q = random_quat(rng)
            J = np.empty((4, 3))
            for k in range(3):
                e = np.zeros(3)
                e[k] = h
                # no sign canonicalization: raw Hamilton product
                plus = _raw_mul(q, quat_from_angle_axis(e))
                minus = _raw_mul(q, quat_from_angle_axis(-e))
                J[:, k] = (plus - minus) / (2 * h)
            assert np.max(np.abs(J - quat_partial_wrt_theta(q))) <= 1e-6


def _raw_mul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def test_batch_helpers_match_scalar_versions():
    from driftfuse.so3 import canonical, quat_log_batch, quat_multiply_batch, quat_to_angle_axis

    rng = np.random.default_rng(12)
    a = rng.normal(size=(200, 4))
    b = rng.normal(size=(200, 4))
    a[:3] = [1.0, 1e-12, 0.0, 0.0]  # small-angle branch
    prod = quat_multiply_batch(a / np.linalg.norm(a, axis=1, keepdims=True), b / np.linalg.norm(b, axis=1, keepdims=True))
    for k in range(200):
        ref = quat_multiply(a[k] / np.linalg.norm(a[k]), b[k] / np.linalg.norm(b[k]))
        np.testing.assert_allclose(canonical(prod[k]), ref, atol=1e-14)
        np.testing.assert_allclose(quat_log_batch(a[k : k + 1])[0], quat_to_angle_axis(a[k]), atol=1e-14)
