"""Per-frame tracking loop: predict, associate, update, manage track lifecycles."""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .association import AssociationConfig, TrackCue, affinity, greedy_match
from .geometry import Detection, TrackedBox
from .kalman import KfNoiseConfig, KfState, kf_init, kf_predict, kf_update


class TrackStatus(str, Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    DEAD = "dead"


@dataclass(frozen=True)
class TrackerConfig:
    association: AssociationConfig = field(default_factory=AssociationConfig)
    kf_noise: KfNoiseConfig = field(default_factory=KfNoiseConfig)
    max_age: int = 10
    min_hits: int = 2
    det_score_floor: float = 0.3
    embed_momentum: float = 0.9
    coast_score_decay: float = 0.5

    def __post_init__(self):
        if self.max_age < 1 or self.min_hits < 1:
            raise ValueError("max_age and min_hits must be >= 1")
        if not 0.0 <= self.embed_momentum <= 1.0:
            raise ValueError("embed_momentum must lie in [0, 1]")
        if not 0.0 <= self.coast_score_decay <= 1.0:
            raise ValueError("coast_score_decay must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class Track:
    id: int
    kf: KfState
    embedding: np.ndarray
    class_id: int
    hits: int = 1
    misses: int = 0
    age: int = 0
    status: TrackStatus = TrackStatus.TENTATIVE
    last_score: float = 0.0

    def output_score(self, decay: float) -> float:
        return self.last_score * decay**self.misses

    def to_box(self, decay: float) -> TrackedBox:
        m = self.kf.mean
        return TrackedBox(
            track_id=self.id,
            center=m[0:3],
            dims=m[4:7],
            yaw=m[3],
            velocity=m[7:10],
            score=self.output_score(decay),
            class_id=self.class_id,
            embedding=self.embedding,
        )


@dataclass(frozen=True, eq=False)
class TrackerState:
    tracks: tuple = ()
    next_id: int = 0
    frame_idx: int = 0


@dataclass(frozen=True, eq=False)
class Frame:
    detections: list
    dt: float
    frame_idx: int = 0


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def _check_detections(dets: list[Detection]):
    for i, d in enumerate(dets):
        try:
            d.validate()
        except ValueError as exc:
            raise ValueError(f"detection {i} rejected: {exc}") from exc


def step(state: TrackerState, frame: Frame, cfg: TrackerConfig) -> tuple[TrackerState, list[TrackedBox]]:
    if not frame.dt > 0:
        raise ValueError(f"frame dt must be > 0, got {frame.dt}")
    dets = list(frame.detections)
    _check_detections(dets)
    noise = cfg.kf_noise

    live = [t for t in state.tracks if t.status is not TrackStatus.DEAD]
    predicted = [replace(t, kf=kf_predict(t.kf, frame.dt, noise), age=t.age + 1) for t in live]
    cues = [
        TrackCue(
            box=np.concatenate([p.kf.mean[0:3], [p.kf.mean[3]], p.kf.mean[4:7]]),
            velocity=p.kf.mean[7:10],
            prev_center=t.kf.mean[0:3],
            embedding=p.embedding,
            class_id=p.class_id,
        )
        for t, p in zip(live, predicted)
    ]

    aff = affinity(cues, dets, cfg.association)
    if aff.size:
        same_class = np.array([c.class_id for c in cues])[:, None] == np.array([d.class_id for d in dets])[None, :]
        aff = np.where(same_class, aff, 0.0)
    matches, unmatched_t, unmatched_d = greedy_match(aff, cfg.association.match_threshold)

    new_tracks: list[Track] = []
    updated: dict[int, Track] = {}
    m = cfg.embed_momentum
    for ti, di in matches:
        t, d = predicted[ti], dets[di]
        hits = t.hits + 1
        status = t.status
        if status is TrackStatus.TENTATIVE and hits >= cfg.min_hits:
            status = TrackStatus.CONFIRMED
        updated[ti] = replace(
            t,
            kf=kf_update(t.kf, d, noise),
            embedding=_unit(m * t.embedding + (1.0 - m) * d.embedding),
            hits=hits,
            misses=0,
            status=status,
            last_score=d.score,
        )
    for ti in unmatched_t:
        t = predicted[ti]
        misses = t.misses + 1
        if misses > cfg.max_age:
            continue  # dead tracks are dropped from the state
        updated[ti] = replace(t, hits=0, misses=misses)
    new_tracks = [updated[i] for i in sorted(updated)]

    next_id = state.next_id
    for di in unmatched_d:
        d = dets[di]
        if d.score < cfg.det_score_floor:
            continue
        status = TrackStatus.CONFIRMED if cfg.min_hits <= 1 else TrackStatus.TENTATIVE
        new_tracks.append(
            Track(
                id=next_id,
                kf=kf_init(d, noise),
                embedding=_unit(np.array(d.embedding)),
                class_id=d.class_id,
                status=status,
                last_score=d.score,
            )
        )
        next_id += 1

    out = [t.to_box(cfg.coast_score_decay) for t in new_tracks if t.status is TrackStatus.CONFIRMED]
    return TrackerState(tuple(new_tracks), next_id, state.frame_idx + 1), out


@dataclass(eq=False)
class TrackOutputLog:
    frames: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    def same_boxes(self, other: "TrackOutputLog") -> bool:
        if len(self.frames) != len(other.frames):
            return False
        for fa, fb in zip(self.frames, other.frames):
            if [b.to_dict() for b in fa] != [b.to_dict() for b in fb]:
                return False
        return True


def run_sequence(frames: list[Frame], cfg: TrackerConfig) -> TrackOutputLog:
    state = TrackerState()
    out = []
    t0 = time.perf_counter()
    for frame in frames:
        state, boxes = step(state, frame, cfg)
        out.append(boxes)
    elapsed = time.perf_counter() - t0
    timing = {
        "frames": len(frames),
        "seconds": elapsed,
        "fps": len(frames) / elapsed if elapsed > 0 else float("inf"),
    }
    return TrackOutputLog(out, timing)
