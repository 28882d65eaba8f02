"""Named simulation scenarios bundling a trajectory, an IMU, sensors and a matching run config."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .sim import (
    DriftSample,
    ImuSpec,
    SensorSpec,
    SensorStream,
    TrajectoryProfile,
    TruthSeries,
    generate_truth,
    merge_streams,
    synthesize_imu,
    synthesize_sensor,
)
from .so3 import quat_from_angle_axis
from .state import ImuSample


@dataclass
class Scenario:
    profile: TrajectoryProfile
    imu_rate: float
    imu: ImuSpec
    sensors: list[SensorSpec]
    process_noise: dict
    sensor_config: list[dict]
    initial_covariance: dict = field(default_factory=dict)

    def config_dict(self, truth: TruthSeries) -> dict:
        """Run configuration starting from the true initial pose."""
        s = truth[0]
        return {
            "process_noise": dict(self.process_noise),
            "initial_covariance": dict(self.initial_covariance),
            "initial_state": {
                "p": s.p.tolist(),
                "v": s.v.tolist(),
                "q": s.q.tolist(),
            },
            "sensors": [dict(c) for c in self.sensor_config],
        }


@dataclass
class SimulationRun:
    truth: TruthSeries
    imu: list[ImuSample]
    streams: list[SensorStream]
    records: list  # IMU samples and measurements in arrival order
    config: dict

    @property
    def drift_truth(self) -> list[DriftSample]:
        return [d for s in self.streams for d in s.drift]


def lab_scenario(duration: float = 300.0) -> Scenario:
    """Indoor flight with a drifting SLAM pose, a UWB-like position fix and a VIO pose/velocity."""
    accel_sigma, gyro_sigma = 0.02, 0.002
    return Scenario(
        profile=TrajectoryProfile(
            "lissajous", amplitude=2.0, period=30.0, yaw_profile="sinusoid",
            duration=duration, tilt_amplitude=0.05,
        ),
        imu_rate=200.0,
        imu=ImuSpec(
            accel_bias=np.array([0.05, -0.04, 0.03]),
            gyro_bias=np.array([0.003, -0.002, 0.001]),
            accel_sigma=np.full(3, accel_sigma),
            gyro_sigma=np.full(3, gyro_sigma),
        ),
        sensors=[
            SensorSpec(
                "cartographer", ("position", "orientation"), 10.0,
                noise={"position": [0.05, 0.05, 0.25], "orientation": [0.01, 0.01, 0.02]},
                drift_model="random-walk", drift_p=np.array([0.3, -0.2, 0.0]),
                drift_q=quat_from_angle_axis(np.array([0.0, 0.0, np.radians(3.0)])),
                walk_p=3e-3, walk_theta=2e-4, latency=0.02,
            ),
            SensorSpec("uwb", ("position",), 15.0, noise={"position": [0.1, 0.1, 0.3]}, latency=0.01),
            SensorSpec(
                "vio", ("position", "orientation", "velocity"), 30.0,
                noise={"position": [0.08, 0.08, 0.06], "orientation": [0.008, 0.008, 0.012], "velocity": 0.05},
                drift_model="constant", drift_p=np.array([0.05, -0.03, 0.02]),
                drift_q=quat_from_angle_axis(np.array([0.0, 0.0, np.radians(1.0)])),
                latency=0.005,
            ),
        ],
        process_noise={
            "sigma_v2": accel_sigma**2,
            "sigma_theta2": gyro_sigma**2,
            "sigma_a2": 1e-4,
            "sigma_w2": 1e-6,
        },
        initial_covariance={"a_b": 1e-2, "w_b": 1e-4},
        sensor_config=[
            {
                "id": "cartographer",
                "kinds": ["position", "orientation"],
                "estimate_drift": True,
                "drift_walk": {"p": 3e-3, "theta": 2e-4},
                "variance": {"position": [0.05**2, 0.05**2, 0.25**2], "orientation": [0.01**2, 0.01**2, 0.02**2]},
                "limits": {"position": [0.5, 0.5, 1.5], "orientation": [0.1, 0.1, 0.15]},
            },
            {
                "id": "uwb",
                "kinds": ["position"],
                "variance": {"position": [0.1**2, 0.1**2, 0.3**2]},
                "limits": {"position": [0.6, 0.6, 1.8]},
            },
            {
                "id": "vio",
                "kinds": ["position", "orientation", "velocity"],
                "estimate_drift": True,
                "variance": {
                    "position": [0.08**2, 0.08**2, 0.06**2],
                    "orientation": [0.008**2, 0.008**2, 0.012**2],
                    "velocity": 0.05**2,
                },
                "limits": {"position": [0.5, 0.5, 0.4], "orientation": [0.08, 0.08, 0.1], "velocity": 0.3},
            },
        ],
    )


PRESETS = {"lab": lab_scenario}


def simulate(scenario: Scenario, seed: int = 0) -> SimulationRun:
    """Generate truth, IMU and sensor streams; every random stream derives from ``seed``."""
    truth_seed, imu_seed, *sensor_seeds = np.random.SeedSequence(seed).generate_state(2 + len(scenario.sensors))
    profile = replace(scenario.profile, seed=int(truth_seed))
    truth = generate_truth(profile, scenario.imu_rate)
    imu = synthesize_imu(truth, scenario.imu, seed=int(imu_seed))
    streams = [synthesize_sensor(truth, spec, seed=int(s)) for spec, s in zip(scenario.sensors, sensor_seeds)]
    return SimulationRun(truth, imu, streams, merge_streams(imu, streams), scenario.config_dict(truth))
