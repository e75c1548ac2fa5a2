"""Track-detection affinity and thresholded greedy assignment.

The affinity blends appearance with motion and location cues::

    A = w_deep * A_deep + w_motion * (A_motion * A_loc)        (elementwise)
    a_motion = t * a_centroid + (1 - t) * a_pseudo

where the trade-off weight ``t`` is either the velocity similarity
``exp(-|v_track - v_det| / r_vel)`` or, for the baseline, the shifted cosine
between the track heading and the observed displacement in the xy-plane.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _backend
from .geometry import Detection, wrap_angle


class TradeOff(str, Enum):
    VELOCITY = "velocity"
    COSINE = "cosine"


@dataclass(frozen=True)
class AssociationConfig:
    w_deep: float = 0.25
    r_vel: float = 1.0
    match_threshold: float = 0.30
    loc_scale: float = 10.0
    centroid_scale: float = 10.0
    pseudo_scale: float = 10.0
    trade_off_term: TradeOff = TradeOff.VELOCITY

    def __post_init__(self):
        object.__setattr__(self, "trade_off_term", TradeOff(self.trade_off_term))
        if not 0.0 <= self.w_deep <= 1.0:
            raise ValueError("w_deep must lie in [0, 1]")
        if self.r_vel <= 0:
            raise ValueError("r_vel must be positive")
        if not 0.0 < self.match_threshold < 1.0:
            raise ValueError("match_threshold must lie in (0, 1)")
        if min(self.loc_scale, self.centroid_scale, self.pseudo_scale) <= 0:
            raise ValueError("distance scales must be positive")

    @property
    def w_motion(self) -> float:
        return 1.0 - self.w_deep


@dataclass(frozen=True, eq=False)
class TrackCue:
    """What association needs to know about a track in the current frame.

    ``box`` is the KF-predicted [x, y, z, yaw, l, w, h], ``velocity`` the
    predicted velocity, ``prev_center`` the filtered centre before prediction.
    """

    box: np.ndarray
    velocity: np.ndarray
    prev_center: np.ndarray
    embedding: np.ndarray
    class_id: int = 0

    @property
    def center(self) -> np.ndarray:
        return self.box[:3]


def _unit_rows(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def embedding_affinity(track_embeds, det_embeds) -> np.ndarray:
    t = _unit_rows(track_embeds)
    d = _unit_rows(det_embeds)
    if t.shape[1] != d.shape[1]:
        raise ValueError(f"embedding dimension mismatch: {t.shape[1]} vs {d.shape[1]}")
    return np.clip((1.0 + t @ d.T) / 2.0, 0.0, 1.0)


def velocity_weight(v_track, v_det, r_vel: float) -> float:
    diff = np.asarray(v_track, dtype=np.float64) - np.asarray(v_det, dtype=np.float64)
    return math.exp(-float(np.linalg.norm(diff)) / r_vel)


def centroid_affinity(c_track, c_det, scale: float) -> float:
    diff = np.asarray(c_track, dtype=np.float64) - np.asarray(c_det, dtype=np.float64)
    return math.exp(-float(np.linalg.norm(diff)) / scale)


def pseudo_affinity(box_track, box_det, scale: float) -> float:
    """State-difference score over [x, y, z, yaw, l, w, h], L1 with wrapped yaw."""
    diff = np.asarray(box_track, dtype=np.float64) - np.asarray(box_det, dtype=np.float64)
    diff[3] = wrap_angle(diff[3])
    return math.exp(-float(np.sum(np.abs(diff))) / scale)


def _cos_xy(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)[:2]
    b = np.asarray(b, dtype=np.float64)[:2]
    norms = float(np.linalg.norm(a) * np.linalg.norm(b))
    # zero-length headings give cos = 0, i.e. an even blend
    return float(a @ b) / norms if norms > 0 else 0.0


def motion_affinity(track: TrackCue, det: Detection, cfg: AssociationConfig) -> float:
    a_centroid = centroid_affinity(track.center, det.center, cfg.centroid_scale)
    a_pseudo = pseudo_affinity(track.box, det.box, cfg.pseudo_scale)
    if cfg.trade_off_term is TradeOff.VELOCITY:
        t = velocity_weight(track.velocity, det.velocity, cfg.r_vel)
    else:
        t = (1.0 + _cos_xy(track.velocity, det.center - track.prev_center)) / 2.0
    return t * a_centroid + (1.0 - t) * a_pseudo


def location_affinity(track: TrackCue, det: Detection, cfg: AssociationConfig) -> float:
    return centroid_affinity(track.center, det.center, cfg.loc_scale)


def motion_location_matrices(tracks, dets, cfg: AssociationConfig):
    """Vectorised A_motion and A_loc over all (track, detection) pairs."""
    n, m = len(tracks), len(dets)
    if n == 0 or m == 0:
        return np.zeros((n, m)), np.zeros((n, m))
    tb = np.array([t.box for t in tracks])
    tv = np.array([t.velocity for t in tracks])
    tp = np.array([t.prev_center for t in tracks])
    db = np.array([d.box for d in dets])
    dv = np.array([d.velocity for d in dets])

    dist = np.linalg.norm(tb[:, None, :3] - db[None, :, :3], axis=2)
    a_centroid = np.exp(-dist / cfg.centroid_scale)
    a_loc = np.exp(-dist / cfg.loc_scale)
    bdiff = tb[:, None, :] - db[None, :, :]
    bdiff[..., 3] = wrap_angle(bdiff[..., 3])
    a_pseudo = np.exp(-np.sum(np.abs(bdiff), axis=2) / cfg.pseudo_scale)
    if cfg.trade_off_term is TradeOff.VELOCITY:
        dvn = np.linalg.norm(tv[:, None, :] - dv[None, :, :], axis=2)
        t = np.exp(-dvn / cfg.r_vel)
    else:
        disp = db[None, :, :2] - tp[:, None, :2]
        head = tv[:, None, :2]
        dot = np.sum(head * disp, axis=2)
        norms = np.linalg.norm(head, axis=2) * np.linalg.norm(disp, axis=2)
        cos = np.divide(dot, norms, out=np.zeros_like(dot), where=norms > 0)
        t = (1.0 + cos) / 2.0
    a_motion = t * a_centroid + (1.0 - t) * a_pseudo
    return a_motion, a_loc


def affinity(tracks, dets, cfg: AssociationConfig) -> np.ndarray:
    n, m = len(tracks), len(dets)
    if n == 0 or m == 0:
        return np.zeros((n, m))
    a_deep = embedding_affinity([t.embedding for t in tracks], [d.embedding for d in dets])
    a_motion, a_loc = motion_location_matrices(tracks, dets, cfg)
    a = cfg.w_deep * a_deep + cfg.w_motion * (a_motion * a_loc)
    return np.clip(a, 0.0, 1.0)


def greedy_match(a, threshold: float):
    """Greedy assignment on a tracks x detections affinity matrix.

    Returns ``(matches, unmatched_tracks, unmatched_dets)``.
    """
    a = np.ascontiguousarray(np.asarray(a, dtype=np.float64).reshape(np.shape(a)))
    if a.ndim != 2:
        raise ValueError("affinity must be a 2D matrix")
    n, m = a.shape
    matches = [] if a.size == 0 else [(int(i), int(j)) for i, j in _backend.greedy_assign(a, float(threshold))]
    used_r = {i for i, _ in matches}
    used_c = {j for _, j in matches}
    return (
        matches,
        [i for i in range(n) if i not in used_r],
        [j for j in range(m) if j not in used_c],
    )
