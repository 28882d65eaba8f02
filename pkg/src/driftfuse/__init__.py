"""Error-state Kalman filter for multi-sensor fusion with per-sensor drift estimation."""

__version__ = "0.1.0"
