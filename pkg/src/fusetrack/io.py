"""JSONL readers/writers for detections, track logs and radar sweeps, plus atomic writes.

Schemas (one JSON object per line):

* detections: ``{"scene", "frame_idx", "dt", "detections": [{center, dims, yaw, velocity, score, class_id, embedding}]}``
* track / gt logs: ``{"scene", "frame_idx", "boxes": [{track_id, center, dims, yaw, velocity, score, class_id}]}``
* radar: ``{"scene", "frame_idx", "timestamp", "ego_pose": {"theta", "tx", "ty"}, "points": [[18 floats], ...]}``

``scene`` defaults to ``DEFAULT_SCENE`` when absent.
"""
from __future__ import annotations

import contextlib
import json
import os
import tempfile
from collections import defaultdict
from pathlib import Path

from .geometry import TrackedBox, detection_from_dict, detection_to_dict
from .pillars import EgoPose, RadarSweep
from .tracker import Frame

DEFAULT_SCENE = "scene-0000"


class DataError(ValueError):
    """Malformed input data file."""


@contextlib.contextmanager
def atomic_write(path, mode: str = "w"):
    """Write to a temp file next to ``path`` and rename it into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _lines(path):
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc


def write_detections(path, scenes: dict):
    """``scenes`` maps scene name -> list of ``Frame``."""
    with atomic_write(path) as fh:
        for scene in sorted(scenes):
            for frame in scenes[scene]:
                rec = {
                    "scene": scene,
                    "frame_idx": frame.frame_idx,
                    "dt": frame.dt,
                    "detections": [detection_to_dict(d) for d in frame.detections],
                }
                fh.write(dumps(rec) + "\n")


def read_detections(path) -> dict:
    scenes = defaultdict(list)
    for lineno, rec in _lines(path):
        try:
            dets = [detection_from_dict(d) for d in rec["detections"]]
            frame = Frame(dets, float(rec["dt"]), int(rec["frame_idx"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: bad detection frame: {exc}") from exc
        scenes[rec.get("scene", DEFAULT_SCENE)].append(frame)
    return {k: sorted(v, key=lambda f: f.frame_idx) for k, v in scenes.items()}


def write_track_log(path, scenes: dict):
    """``scenes`` maps scene name -> list of frames, each a list of ``TrackedBox``."""
    with atomic_write(path) as fh:
        for scene in sorted(scenes):
            for k, boxes in enumerate(scenes[scene]):
                rec = {"scene": scene, "frame_idx": k, "boxes": [b.to_dict() for b in boxes]}
                fh.write(dumps(rec) + "\n")


def read_track_log(path) -> dict:
    raw = defaultdict(dict)
    for lineno, rec in _lines(path):
        try:
            boxes = [TrackedBox.from_dict(b) for b in rec["boxes"]]
            raw[rec.get("scene", DEFAULT_SCENE)][int(rec["frame_idx"])] = boxes
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: bad track record: {exc}") from exc
    out = {}
    for scene, frames in raw.items():
        n = max(frames) + 1 if frames else 0
        out[scene] = [frames.get(k, []) for k in range(n)]
    return out


def write_radar(path, scenes: dict):
    """``scenes`` maps scene name -> list of ``RadarSweep`` (one per frame)."""
    with atomic_write(path) as fh:
        for scene in sorted(scenes):
            for k, sweep in enumerate(scenes[scene]):
                p = sweep.ego_pose
                rec = {
                    "scene": scene,
                    "frame_idx": k,
                    "timestamp": sweep.timestamp,
                    "ego_pose": {"theta": p.theta, "tx": p.tx, "ty": p.ty},
                    "points": sweep.points.tolist(),
                }
                fh.write(dumps(rec) + "\n")


def read_radar(path) -> dict:
    scenes = defaultdict(list)
    for lineno, rec in _lines(path):
        try:
            pose = rec.get("ego_pose", {})
            sweep = RadarSweep(
                rec["points"],
                float(rec["timestamp"]),
                EgoPose(float(pose.get("theta", 0.0)), float(pose.get("tx", 0.0)), float(pose.get("ty", 0.0))),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: bad radar sweep: {exc}") from exc
        scenes[rec.get("scene", DEFAULT_SCENE)].append((rec.get("frame_idx", 0), sweep))
    return {k: [s for _, s in sorted(v, key=lambda t: t[0])] for k, v in scenes.items()}
