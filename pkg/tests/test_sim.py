import numpy as np
import pytest

from driftfuse.filter import predict
from driftfuse.measurements import SensorConfig, h_position, orientation_innovation
from driftfuse.sim import (
    ImuSpec,
    SensorSpec,
    TrajectoryProfile,
    generate_truth,
    synthesize_imu,
    synthesize_sensor,
)
from driftfuse.so3 import log_vee, quat_from_angle_axis, quat_to_rotmat
from driftfuse.state import DriftPose, NominalState, ProcessNoiseParams

TINY = ProcessNoiseParams(*(np.full(3, 1e-12) for _ in range(4)))


def dead_reckon(truth, imu):
    state = NominalState(p=truth.p[0], v=truth.v[0], q=truth.q[0])
    P = np.eye(18) * 1e-6
    for prev, u in zip(imu[:-1], imu[1:]):
        state, P = predict(state, P, u, u.t - prev.t, TINY)
    return state


class TestTruth:
    def test_hover(self):
        truth = generate_truth(TrajectoryProfile("hover", center=(0, 0, 1), duration=5), 50)
        np.testing.assert_array_equal(truth.p, np.tile([0, 0, 1], (len(truth), 1)))
        assert not np.any(truth.v) and not np.any(truth.a) and not np.any(truth.w)

    def test_circle_centripetal(self):
        truth = generate_truth(TrajectoryProfile("circle", amplitude=1, period=2 * np.pi), 100)
        np.testing.assert_allclose(np.linalg.norm(truth.a, axis=1), 1.0, atol=1e-12)

    @pytest.mark.parametrize("kind", ["line", "circle", "lissajous", "waypoint-spline"])
    def test_derivatives_consistent(self, kind):
        prof = TrajectoryProfile(kind, amplitude=2, period=8, duration=8, yaw_profile="sinusoid", tilt_amplitude=0.1)
        errs = []
        for rate in (100, 200):
            truth = generate_truth(prof, rate)
            h = 1 / rate
            v_fd = (truth.p[2:] - truth.p[:-2]) / (2 * h)
            a_fd = (truth.v[2:] - truth.v[:-2]) / (2 * h)
            err = np.abs(v_fd - truth.v[1:-1]).max()
            if kind != "waypoint-spline":
                # spline jerk jumps at the knots, so only v is checked there
                err = max(err, np.abs(a_fd - truth.a[1:-1]).max())
            errs.append(err)
        assert errs[0] < 1e-2
        # central differences converge as h^2
        assert errs[0] / errs[1] > 3.5

    def test_body_rate_matches_attitude(self):
        prof = TrajectoryProfile("lissajous", amplitude=2, period=10, yaw_profile="tangent", tilt_amplitude=0.1)
        truth = generate_truth(prof, 400)
        h = 1 / 400
        for k in range(1, len(truth) - 1, 97):
            R0, R1 = quat_to_rotmat(truth.q[k - 1]), quat_to_rotmat(truth.q[k + 1])
            w_fd = log_vee(R0.T @ R1) / (2 * h)
            np.testing.assert_allclose(w_fd, truth.w[k], atol=1e-4)

    def test_deterministic(self):
        prof = TrajectoryProfile("waypoint-spline", amplitude=2, period=10, seed=3)
        a, b = generate_truth(prof, 50), generate_truth(prof, 50)
        assert a.p.tobytes() == b.p.tobytes()

    def test_rate_precondition(self):
        with pytest.raises(ValueError):
            generate_truth(TrajectoryProfile("circle", period=1.0), 1.5)

    def test_tangent_needs_motion(self):
        with pytest.raises(ValueError):
            TrajectoryProfile("line", yaw_profile="tangent")


class TestImu:
    def test_hover_reaction(self):
        truth = generate_truth(TrajectoryProfile("hover", duration=1), 100)
        for mode in ("increment", "sample"):
            imu = synthesize_imu(truth, ImuSpec(mode=mode))
            for u in imu:
                np.testing.assert_allclose(u.a, [0, 0, 9.81], atol=1e-12)
                np.testing.assert_allclose(u.w, 0, atol=1e-12)

    def test_constant_bias(self):
        truth = generate_truth(TrajectoryProfile("circle", duration=5), 100)
        ideal = synthesize_imu(truth, ImuSpec())
        biased = synthesize_imu(truth, ImuSpec(accel_bias=[0.1, 0, 0], accel_sigma=0.05), seed=1)
        diff = np.array([b.a - i.a for b, i in zip(biased, ideal)])
        np.testing.assert_allclose(diff.mean(axis=0), [0.1, 0, 0], atol=0.01)

    def test_deterministic(self):
        truth = generate_truth(TrajectoryProfile("circle", duration=2), 100)
        spec = ImuSpec(accel_sigma=0.1, gyro_sigma=0.01)
        a = synthesize_imu(truth, spec, seed=7)
        b = synthesize_imu(truth, spec, seed=7)
        assert all(x.a.tobytes() == y.a.tobytes() and x.w.tobytes() == y.w.tobytes() for x, y in zip(a, b))

    @pytest.mark.parametrize(
        "profile",
        [
            TrajectoryProfile("circle", amplitude=1, period=2 * np.pi, duration=7.3),
            TrajectoryProfile("lissajous", amplitude=2, period=10, duration=7.3, yaw_profile="tangent", tilt_amplitude=0.1),
        ],
    )
    def test_dead_reckoning_converges_quadratically(self, profile):
        errors = []
        for rate in (100, 200):
            truth = generate_truth(profile, rate)
            final = dead_reckon(truth, synthesize_imu(truth))
            errors.append(np.linalg.norm(final.p - truth.p[-1]))
            assert np.linalg.norm(final.v - truth.v[-1]) < 1e-8
        assert errors[0] / errors[1] >= 3.5

    def test_point_sampling_is_first_order(self):
        profile = TrajectoryProfile("circle", amplitude=1, period=2 * np.pi, duration=7.3)
        errors = []
        for rate in (100, 200):
            truth = generate_truth(profile, rate)
            final = dead_reckon(truth, synthesize_imu(truth, ImuSpec(mode="sample")))
            errors.append(np.linalg.norm(final.p - truth.p[-1]))
        assert 1.5 < errors[0] / errors[1] < 2.5


class TestSensor:
    @staticmethod
    def truth():
        prof = TrajectoryProfile("lissajous", amplitude=2, period=10, duration=10, yaw_profile="sinusoid")
        return generate_truth(prof, 200)

    def test_noise_free_equals_truth(self):
        truth = self.truth()
        stream = synthesize_sensor(truth, SensorSpec("s", ("position", "orientation", "velocity"), 30))
        index = {t: i for i, t in enumerate(truth.t)}
        for m in stream.measurements:
            i = index[m.t]
            expected = {"position": truth.p[i], "velocity": truth.v[i], "orientation": truth.q[i]}[m.kind]
            np.testing.assert_allclose(m.value, expected, atol=1e-15)

    def test_constant_offset(self):
        truth = self.truth()
        spec = SensorSpec("s", ("position",), 10, drift_model="constant", drift_p=[0.5, 0, 0])
        stream = synthesize_sensor(truth, spec)
        index = {t: i for i, t in enumerate(truth.t)}
        for m in stream.measurements:
            np.testing.assert_allclose(m.value - truth.p[index[m.t]], [0.5, 0, 0], atol=1e-14)

    def test_zero_innovation_at_truth(self):
        truth = self.truth()
        q_i = quat_from_angle_axis([0, 0, 0.2])
        spec = SensorSpec("s", ("position", "orientation"), 10, drift_model="constant", drift_p=[0.1, 0.2, 0.3], drift_q=q_i)
        sensor = SensorConfig("s", ("position", "orientation"), estimate_drift=True)
        index = {t: i for i, t in enumerate(truth.t)}
        for m in synthesize_sensor(truth, spec).measurements:
            i = index[m.t]
            state = NominalState(p=truth.p[i], q=truth.q[i], drift={"s": DriftPose([0.1, 0.2, 0.3], q_i)})
            if m.kind == "position":
                assert np.abs(m.value - h_position(state, sensor)).max() < 1e-12
            else:
                assert np.abs(orientation_innovation(state, sensor, m.value)).max() < 1e-12

    def test_outlier_labels_exact(self):
        truth = self.truth()
        spec = SensorSpec(
            "s", ("position",), 50, outlier_prob=0.2, outlier_magnitude={"position": [5, 5, 5]}
        )
        stream = synthesize_sensor(truth, spec, seed=2)
        index = {t: i for i, t in enumerate(truth.t)}
        labels = [m.outlier for m in stream.measurements]
        assert 0.1 < np.mean(labels) < 0.3
        for m in stream.measurements:
            err = np.abs(m.value - truth.p[index[m.t]]).max()
            assert (err > 4.9) == m.outlier

    def test_latency_and_rate(self):
        truth = self.truth()
        stream = synthesize_sensor(truth, SensorSpec("s", ("velocity",), 15, latency=0.02))
        t = np.array([m.t for m in stream.measurements])
        assert len(t) == 151
        np.testing.assert_allclose(np.diff(t).mean(), 1 / 15, rtol=1e-2)
        assert all(m.t_rx == pytest.approx(m.t + 0.02) for m in stream.measurements)

    def test_random_walk_drift_statistics(self):
        truth = generate_truth(TrajectoryProfile("hover", duration=100), 20)
        spec = SensorSpec("s", ("position",), 2, drift_model="random-walk", walk_p=0.01)
        finals = np.array([synthesize_sensor(truth, spec, seed=s).drift[-1].p for s in range(300)])
        # variance of a random walk after 100 s is walk^2 * 100
        assert finals.std() == pytest.approx(0.1, rel=0.1)

    def test_deterministic(self):
        truth = self.truth()
        spec = SensorSpec("s", ("position", "orientation"), 10, noise={"position": 0.1, "orientation": 0.01},
                          drift_model="random-walk", walk_p=1e-3, walk_theta=1e-4, outlier_prob=0.05,
                          outlier_magnitude={"position": 1.0, "orientation": 0.2})
        a, b = synthesize_sensor(truth, spec, seed=9), synthesize_sensor(truth, spec, seed=9)
        assert [m.value.tobytes() for m in a.measurements] == [m.value.tobytes() for m in b.measurements]
