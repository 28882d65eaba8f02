"""Timestamp-ordered replay: IMU samples drive prediction, measurements drive correction."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .arbiter import ArbiterVerdict, gate, stale_verdict
from .config import ConfigError, RunConfig
from .filter import correct, inject_and_reset, predict
from .logio import StateEstimate, VerdictRecord
from .measurements import (
    Measurement,
    bootstrap_orientation,
    bootstrap_position,
    innovation_and_jacobian,
)
from .state import ImuSample, initial_covariance

log = logging.getLogger(__name__)


class ReplayError(RuntimeError):
    def __init__(self, index: int, t: float, cause: Exception):
        super().__init__(f"record {index} (t={t:.6f}): {cause}")
        self.index = index
        self.t = t
        self.__cause__ = cause


class FusionFilter:
    """Filter instance bound to one sensor registry.

    Not thread-safe: callers serialize ``process_imu`` / ``process_measurement``.
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self.sensors = {s.sensor_id: s for s in config.sensors}
        self.limits = config.arbiter_limits()
        self.state = config.initial_state.copy()
        if list(self.state.drift) != config.drift_ids:
            raise ConfigError("initial drift states do not match the drift sensor registry")
        self.P = initial_covariance(config.drift_ids, config.initial_covariance)
        rates = []
        for sid in config.drift_ids:
            s = self.sensors[sid]
            rates += [s.drift_walk_p**2] * 3 + [s.drift_walk_theta**2] * 3
        self.drift_rates = np.array(rates) if any(rates) else None
        self.t: float | None = None
        self._booted: dict[str, dict] = {sid: {} for sid in config.drift_ids}

    def process_imu(self, u: ImuSample) -> None:
        if self.t is None:
            self.t = u.t
            return
        self.state, self.P = predict(
            self.state,
            self.P,
            u,
            u.t - self.t,
            self.config.process_noise,
            second_order=self.config.second_order_fx,
            drift_rates=self.drift_rates,
        )
        self.t = u.t

    def _bootstrap(self, m: Measurement) -> bool:
        """Use a drift sensor's first position/orientation sample as its origin."""
        sensor = self.sensors[m.sensor_id]
        booted = self._booted.get(m.sensor_id)
        if booted is None or not sensor.bootstrap_origin or m.kind == "velocity" or m.kind in booted:
            return False
        pose = self.state.drift[m.sensor_id]
        if m.kind == "orientation":
            pose.q = bootstrap_orientation(self.state, m.value)
            booted["orientation"] = True
            if "position" in booted:
                p_mv, anchor = booted["position"]
                pose.p = bootstrap_position(anchor, p_mv, pose.q)
        else:
            pose.p = bootstrap_position(self.state, m.value, pose.q)
            booted["position"] = (m.value.copy(), self.state.copy())
        return True

    def process_measurement(self, m: Measurement) -> tuple[ArbiterVerdict, bool]:
        """Gate and fuse one measurement; returns the verdict and a bootstrap flag."""
        sensor = self.sensors.get(m.sensor_id)
        if sensor is None:
            raise ConfigError(f"measurement from unregistered sensor {m.sensor_id!r}")
        if m.kind not in sensor.kinds:
            raise ConfigError(f"sensor {m.sensor_id!r} is not configured for {m.kind}")
        if self.t is not None and self.t - m.t > self.config.staleness:
            return stale_verdict(), False
        if self._bootstrap(m):
            return ArbiterVerdict(True, (), np.zeros(3)), True

        y, H = innovation_and_jacobian(
            self.state, sensor, m, self.config.exact_drift_jacobians, self.config.orientation_drift_measured_frame
        )
        verdict = gate(y, self.limits.get(m.sensor_id, m.kind))
        if verdict.accepted:
            V = sensor.variance.get(m.kind, m.variance)
            dx, self.P = correct(self.P, y, H, V)
            self.state, _, self.P = inject_and_reset(
                self.state, dx, self.P, self.config.reset_jacobian
            )
        return verdict, False

    def estimate(self) -> StateEstimate:
        s = self.state
        return StateEstimate(
            self.t,
            s.p.copy(),
            s.v.copy(),
            s.q.copy(),
            s.a_b.copy(),
            s.w_b.copy(),
            s.g.copy(),
            {sid: d.copy() for sid, d in s.drift.items()},
            np.diag(self.P).copy(),
        )


@dataclass
class ReplayResult:
    estimates: list[StateEstimate] = field(default_factory=list)
    verdicts: list[VerdictRecord] = field(default_factory=list)


def _arrival(rec) -> tuple[float, int]:
    if isinstance(rec, ImuSample):
        return rec.t, 0
    return rec.t_rx, 1


def replay(config: RunConfig, records) -> ReplayResult:
    """Run the filter over IMU samples and measurements in arrival order.

    An estimate is emitted for every IMU timestamp once all measurements
    arriving before the next IMU sample have been applied. Other record
    types are ignored. Verdict and error indices refer to positions in
    ``records``.
    """
    items = [(i, r) for i, r in enumerate(records) if isinstance(r, (ImuSample, Measurement))]
    if config.start is not None:
        items = [(i, r) for i, r in items if r.t >= config.start]
    if config.end is not None:
        items = [(i, r) for i, r in items if r.t <= config.end]
    unknown = {r.sensor_id for _, r in items if isinstance(r, Measurement)} - {s.sensor_id for s in config.sensors}
    if unknown:
        raise ConfigError(f"log references sensors missing from the registry: {sorted(unknown)}")
    keys = [_arrival(r) for _, r in items]
    if any(a > b for a, b in zip(keys, keys[1:])):
        items = [items[k] for k in sorted(range(len(items)), key=keys.__getitem__)]

    flt = FusionFilter(config)
    result = ReplayResult()
    for index, rec in items:
        try:
            if isinstance(rec, ImuSample):
                if flt.t is not None:
                    result.estimates.append(flt.estimate())
                flt.process_imu(rec)
            else:
                verdict, boot = flt.process_measurement(rec)
                result.verdicts.append(VerdictRecord(rec.t, rec.sensor_id, rec.kind, index, verdict, boot))
        except ConfigError:
            raise
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            raise ReplayError(index, rec.t, exc) from exc
    if flt.t is not None:
        result.estimates.append(flt.estimate())
    return result
