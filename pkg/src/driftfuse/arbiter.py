"""Component-wise innovation limit test applied before fusion."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_FLOOR = {"position": 0.05, "velocity": 0.05, "orientation": 0.02}
MIN_HISTORY = 100


class ArbiterError(KeyError):
    """No limits configured for a sensor/kind pair."""


@dataclass(frozen=True)
class ArbiterVerdict:
    accepted: bool
    violating_axes: tuple[int, ...]
    innovation: np.ndarray | None
    stale: bool = False


@dataclass
class ArbiterLimits:
    """Per-axis absolute innovation limits keyed by ``(sensor_id, kind)``."""

    table: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)

    def set(self, sensor_id: str, kind: str, limits) -> None:
        limits = np.broadcast_to(np.asarray(limits, dtype=float), (3,)).copy()
        if np.any(~(limits > 0)):
            raise ValueError(f"arbiter limits for {sensor_id}/{kind} must be positive")
        self.table[(sensor_id, kind)] = limits

    def get(self, sensor_id: str, kind: str) -> np.ndarray:
        try:
            return self.table[(sensor_id, kind)]
        except KeyError:
            raise ArbiterError(f"no arbiter limits configured for {sensor_id}/{kind}") from None


def gate(innovation, limits) -> ArbiterVerdict:
    """Accept only if every ``|innovation[k]| <= limits[k]``."""
    innovation = np.asarray(innovation, dtype=float)
    bad = np.flatnonzero(~(np.abs(innovation) <= limits))
    return ArbiterVerdict(bad.size == 0, tuple(int(k) for k in bad), innovation.copy())


def stale_verdict() -> ArbiterVerdict:
    """Verdict for a measurement too old to apply; no innovation is formed."""
    return ArbiterVerdict(False, (), None, stale=True)


def suggest_limits(innovation_history, safety_factor: float = 1.5) -> np.ndarray:
    """Max per-axis deviation from the mean, scaled by ``safety_factor``.

    Offline helper for choosing starting limits; callers should clamp the
    result with :func:`apply_floor`.
    """
    history = np.asarray(innovation_history, dtype=float)
    if history.ndim != 2 or history.shape[1] != 3:
        raise ValueError("innovation history must be an (n, 3) array")
    if history.shape[0] < MIN_HISTORY:
        raise ValueError(f"need at least {MIN_HISTORY} innovations, got {history.shape[0]}")
    return safety_factor * np.max(np.abs(history - history.mean(axis=0)), axis=0)


def apply_floor(limits, kind: str, floor: float | None = None) -> np.ndarray:
    floor = DEFAULT_FLOOR[kind] if floor is None else floor
    return np.maximum(np.asarray(limits, dtype=float), floor)
