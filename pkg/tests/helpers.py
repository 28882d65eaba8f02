"""Independent oracles shared by the tests.

Composition and difference of states are written here directly in terms of
the so3 primitives so they do not route through the filter's injection code.
"""
import numpy as np

from driftfuse.so3 import quat_from_angle_axis, quat_inverse, quat_multiply, quat_to_angle_axis
from driftfuse.state import DriftPose, NominalState


def random_quat(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return q if q[0] >= 0 else -q


def random_state(rng, drift_ids=("a", "b")):
    return NominalState(
        p=rng.normal(size=3) * 3,
        v=rng.normal(size=3),
        q=random_quat(rng),
        a_b=rng.normal(size=3) * 0.1,
        w_b=rng.normal(size=3) * 0.01,
        g=np.array([0.0, 0.0, -9.81]) + rng.normal(size=3) * 0.01,
        drift={
            sid: DriftPose(rng.normal(size=3), random_quat(rng)) for sid in drift_ids
        },
    )


def boxplus(x, dx):
    """True state from nominal state and error state."""
    out = x.copy()
    out.p = x.p + dx[0:3]
    out.v = x.v + dx[3:6]
    out.q = quat_multiply(x.q, quat_from_angle_axis(dx[6:9]))
    out.a_b = x.a_b + dx[9:12]
    out.w_b = x.w_b + dx[12:15]
    out.g = x.g + dx[15:18]
    for k, sid in enumerate(x.drift):
        s = 18 + 6 * k
        out.drift[sid].p = x.drift[sid].p + dx[s : s + 3]
        out.drift[sid].q = quat_multiply(x.drift[sid].q, quat_from_angle_axis(dx[s + 3 : s + 6]))
    return out


def boxminus(xt, x):
    """Error state that maps nominal ``x`` onto ``xt``."""
    parts = [
        xt.p - x.p,
        xt.v - x.v,
        quat_to_angle_axis(quat_multiply(quat_inverse(x.q), xt.q)),
        xt.a_b - x.a_b,
        xt.w_b - x.w_b,
        xt.g - x.g,
    ]
    for sid in x.drift:
        parts.append(xt.drift[sid].p - x.drift[sid].p)
        parts.append(
            quat_to_angle_axis(quat_multiply(quat_inverse(x.drift[sid].q), xt.drift[sid].q))
        )
    return np.concatenate(parts)


def central_jacobian(f, n, h=1e-6):
    """Central-difference Jacobian of ``f`` (vector valued) w.r.t. an n-vector at 0."""
    cols = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        cols.append((np.asarray(f(e)) - np.asarray(f(-e))) / (2 * h))
    return np.column_stack(cols)


def config_dict(**overrides):
    """Small valid run configuration with one drift pose sensor and one absolute sensor."""
    cfg = {
        "process_noise": {"sigma_v2": 1e-4, "sigma_theta2": 1e-6, "sigma_a2": 1e-6, "sigma_w2": 1e-8},
        "sensors": [
            {
                "id": "pose",
                "kinds": ["position", "orientation"],
                "estimate_drift": True,
                "variance": {"position": 1e-3, "orientation": 1e-4},
                "limits": {"position": 1.0, "orientation": 0.2},
            },
            {
                "id": "abs",
                "kinds": ["position"],
                "variance": {"position": [1e-2, 1e-2, 4e-2]},
                "limits": {"position": [1.0, 1.0, 2.0]},
            },
        ],
    }
    cfg.update(overrides)
    return cfg
