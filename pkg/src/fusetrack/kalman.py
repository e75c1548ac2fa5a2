"""Constant-velocity Kalman filter over a 10-dim box state.

State layout: [x, y, z, yaw, l, w, h, vx, vy, vz]. The detector measures the
whole state, velocity included.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Detection, wrap_angle

STATE_DIM = 10
YAW = 3
POS = slice(0, 3)
VEL = slice(7, 10)


def _diag10(values, name):
    v = tuple(float(x) for x in values)
    if len(v) != STATE_DIM:
        raise ValueError(f"{name} needs {STATE_DIM} entries, got {len(v)}")
    return v


@dataclass(frozen=True)
class KfNoiseConfig:
    process_noise: tuple = (0.1, 0.1, 0.1, 0.01, 0.01, 0.01, 0.01, 0.1, 0.1, 0.1)
    measurement_noise: tuple = (0.25, 0.25, 0.25, 0.05, 0.05, 0.05, 0.05, 0.25, 0.25, 0.25)
    initial_covariance: tuple = (1.0, 1.0, 1.0, 0.1, 0.1, 0.1, 0.1, 4.0, 4.0, 4.0)

    def __post_init__(self):
        for name in ("process_noise", "measurement_noise", "initial_covariance"):
            v = _diag10(getattr(self, name), name)
            if min(v) <= 0:
                raise ValueError(f"{name} entries must be strictly positive")
            object.__setattr__(self, name, v)


@dataclass(frozen=True, eq=False)
class KfState:
    mean: np.ndarray
    covariance: np.ndarray

    @property
    def center(self) -> np.ndarray:
        return self.mean[POS]

    @property
    def velocity(self) -> np.ndarray:
        return self.mean[VEL]


def _transition(dt: float) -> np.ndarray:
    f = np.eye(STATE_DIM)
    f[0, 7] = f[1, 8] = f[2, 9] = dt
    return f


def _measure(d: Detection) -> np.ndarray:
    return np.concatenate([d.center, [d.yaw], d.dims, d.velocity])


def kf_init(d: Detection, cfg: KfNoiseConfig) -> KfState:
    return KfState(_measure(d), np.diag(cfg.initial_covariance))


def kf_predict(s: KfState, dt: float, cfg: KfNoiseConfig) -> KfState:
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    f = _transition(dt)
    mean = f @ s.mean
    mean[YAW] = wrap_angle(mean[YAW])
    cov = f @ s.covariance @ f.T + np.diag(cfg.process_noise) * dt
    return KfState(mean, 0.5 * (cov + cov.T))


def kf_update(s: KfState, d: Detection, cfg: KfNoiseConfig) -> KfState:
    z = _measure(d)
    if not np.all(np.isfinite(z)):
        raise ValueError("measurement contains non-finite values")
    r = np.diag(cfg.measurement_noise)
    p = s.covariance
    innov = z - s.mean
    innov[YAW] = wrap_angle(innov[YAW])
    # H is the identity, so S = P + R and K = P S^-1
    gain = np.linalg.solve(p + r, p).T
    mean = s.mean + gain @ innov
    mean[YAW] = wrap_angle(mean[YAW])
    ikh = np.eye(STATE_DIM) - gain
    cov = ikh @ p @ ikh.T + gain @ r @ gain.T
    return KfState(mean, 0.5 * (cov + cov.T))


def is_spd(cov: np.ndarray, sym_tol: float = 1e-9) -> bool:
    if np.max(np.abs(cov - cov.T)) > sym_tol:
        return False
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        return False
    return True
