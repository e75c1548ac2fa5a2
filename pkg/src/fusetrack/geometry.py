"""Shared value types: BEV grid geometry, feature maps, detections and tracked boxes.

Frame convention: ego-centred, x to the right, y forward. Grid rows run along y,
columns along x, and cells are half-open so a coordinate equal to ``+range_m``
falls outside the grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

EMBED_NORM_TOL = 1e-6


def wrap_angle(a):
    """Wrap an angle (scalar or array) into (-pi, pi]; in-range values pass through untouched."""
    wrapped = math.pi - np.mod(math.pi - a, 2.0 * math.pi)
    inside = (a > -math.pi) & (a <= math.pi)
    if np.ndim(a) == 0:
        return float(a) if inside else float(wrapped)
    return np.where(inside, a, wrapped)


@dataclass(frozen=True)
class BevGrid:
    range_m: float = 51.2
    resolution_m: float = 0.8

    def __post_init__(self):
        if not (self.range_m > 0 and self.resolution_m > 0):
            raise ValueError(
                f"grid range and resolution must be positive, got {self.range_m}, {self.resolution_m}"
            )

    @property
    def cells_per_side(self) -> int:
        return int(round(2.0 * self.range_m / self.resolution_m))

    @property
    def shape(self) -> tuple[int, int]:
        n = self.cells_per_side
        return n, n

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        """World (x, y) of the centre of cell (row, col)."""
        x = (col + 0.5) * self.resolution_m - self.range_m
        y = (row + 0.5) * self.resolution_m - self.range_m
        return x, y


def world_to_cell(p, grid: BevGrid) -> tuple[int, int] | None:
    """Map a world point (x, y) to its (row, col) cell, or None if off-grid."""
    n = grid.cells_per_side
    row = math.floor((p[1] + grid.range_m) / grid.resolution_m)
    col = math.floor((p[0] + grid.range_m) / grid.resolution_m)
    if 0 <= row < n and 0 <= col < n:
        return row, col
    return None


def cells_of(xy: np.ndarray, grid: BevGrid) -> np.ndarray:
    """Vectorised world_to_cell: flat cell index (row * n + col) per point, -1 when off-grid.

    Uses the same arithmetic as ``world_to_cell`` so both agree bit for bit.
    """
    n = grid.cells_per_side
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    rows = np.floor((xy[:, 1] + grid.range_m) / grid.resolution_m)
    cols = np.floor((xy[:, 0] + grid.range_m) / grid.resolution_m)
    ok = (rows >= 0) & (rows < n) & (cols >= 0) & (cols < n)
    flat = np.full(len(xy), -1, dtype=np.int64)
    flat[ok] = rows[ok].astype(np.int64) * n + cols[ok].astype(np.int64)
    return flat


class FeatureMap:
    """Channel-major (C, H, W) float64 tensor.

    The wrapped array is read-only; operations producing new maps allocate.
    """

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"FeatureMap needs a (C, H, W) array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("FeatureMap values must be finite")
        arr = arr.view()
        arr.flags.writeable = False
        self.data = arr

    @classmethod
    def from_flat(cls, flat, channels: int, height: int, width: int) -> "FeatureMap":
        flat = np.asarray(flat, dtype=np.float64).ravel()
        if flat.size != channels * height * width:
            raise ValueError(
                f"data length {flat.size} != {channels}*{height}*{width}"
            )
        return cls(flat.reshape(channels, height, width))

    @classmethod
    def zeros(cls, channels: int, height: int, width: int) -> "FeatureMap":
        return cls(np.zeros((channels, height, width)))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def __repr__(self):
        return f"FeatureMap({self.channels}x{self.height}x{self.width})"


def _vec(v, n: int, name: str) -> np.ndarray:
    arr = np.array(v, dtype=np.float64).reshape(-1)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have {n} components, got {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Detection:
    center: np.ndarray
    dims: np.ndarray
    yaw: float
    velocity: np.ndarray
    score: float
    class_id: int
    embedding: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center, 3, "center"))
        object.__setattr__(self, "dims", _vec(self.dims, 3, "dims"))
        object.__setattr__(self, "velocity", _vec(self.velocity, 3, "velocity"))
        emb = np.array(self.embedding, dtype=np.float64).reshape(-1)
        emb.flags.writeable = False
        object.__setattr__(self, "embedding", emb)
        object.__setattr__(self, "yaw", float(wrap_angle(float(self.yaw))))
        object.__setattr__(self, "score", float(self.score))
        object.__setattr__(self, "class_id", int(self.class_id))
        self.validate()

    def validate(self):
        for name in ("center", "dims", "velocity", "embedding"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"detection {name} is not finite")
        if not math.isfinite(self.yaw) or not math.isfinite(self.score):
            raise ValueError("detection yaw/score not finite")
        if np.any(self.dims <= 0):
            raise ValueError(f"detection dims must be positive, got {self.dims}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score {self.score} outside [0, 1]")
        norm = float(np.linalg.norm(self.embedding))
        if abs(norm - 1.0) > EMBED_NORM_TOL:
            raise ValueError(f"embedding must be unit norm, got |e|={norm}")

    @property
    def box(self) -> np.ndarray:
        """7-vector [x, y, z, yaw, l, w, h]."""
        return np.concatenate([self.center, [self.yaw], self.dims])


@dataclass(frozen=True, eq=False)
class TrackedBox:
    track_id: int
    center: np.ndarray
    dims: np.ndarray
    yaw: float
    velocity: np.ndarray
    score: float
    class_id: int
    embedding: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.track_id < 0:
            raise ValueError("track_id must be non-negative")
        object.__setattr__(self, "track_id", int(self.track_id))
        object.__setattr__(self, "center", _vec(self.center, 3, "center"))
        object.__setattr__(self, "dims", _vec(self.dims, 3, "dims"))
        object.__setattr__(self, "velocity", _vec(self.velocity, 3, "velocity"))
        object.__setattr__(self, "yaw", float(self.yaw))
        object.__setattr__(self, "score", float(self.score))
        object.__setattr__(self, "class_id", int(self.class_id))

    def to_dict(self, with_embedding: bool = False) -> dict:
        d = {
            "track_id": self.track_id,
            "center": self.center.tolist(),
            "dims": self.dims.tolist(),
            "yaw": self.yaw,
            "velocity": self.velocity.tolist(),
            "score": self.score,
            "class_id": self.class_id,
        }
        if with_embedding:
            d["embedding"] = self.embedding.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrackedBox":
        return cls(
            track_id=d["track_id"],
            center=d["center"],
            dims=d["dims"],
            yaw=d["yaw"],
            velocity=d["velocity"],
            score=d.get("score", 1.0),
            class_id=d.get("class_id", 0),
            embedding=d.get("embedding", []),
        )


def detection_to_dict(d: Detection) -> dict:
    return {
        "center": d.center.tolist(),
        "dims": d.dims.tolist(),
        "yaw": d.yaw,
        "velocity": d.velocity.tolist(),
        "score": d.score,
        "class_id": d.class_id,
        "embedding": d.embedding.tolist(),
    }


def detection_from_dict(d: dict) -> Detection:
    return Detection(
        center=d["center"],
        dims=d["dims"],
        yaw=d["yaw"],
        velocity=d["velocity"],
        score=d["score"],
        class_id=d["class_id"],
        embedding=d["embedding"],
    )
