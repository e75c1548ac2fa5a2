"""Radar sweep accumulation, pillar averaging and BEV fusion tensor assembly."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol

import numpy as np

from . import _backend
from .geometry import BevGrid, FeatureMap, cells_of

RADAR_CHANNELS = 18
# Channel layout of a radar point. Positions occupy 0..2 so the per-pillar mean
# carries the centroid; the rest mirror the nuScenes radar fields, with the last
# slot reused for the sweep time offset.
CH_X, CH_Y, CH_Z = 0, 1, 2
CH_RCS = 5
CH_VX, CH_VY = 6, 7
CH_VX_COMP, CH_VY_COMP = 8, 9
CH_TIME_OFFSET = 17

IMAGE_BEV_CHANNELS = 64
ENCODED_BEV_CHANNELS = 256


@dataclass(frozen=True)
class EgoPose:
    """2D rigid transform taking sweep-frame coordinates into the reference frame."""

    theta: float = 0.0
    tx: float = 0.0
    ty: float = 0.0

    def apply(self, xy: np.ndarray) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        x, y = xy[:, 0], xy[:, 1]
        return np.stack([c * x - s * y + self.tx, s * x + c * y + self.ty], axis=1)


@dataclass(frozen=True)
class RadarPoint:
    features: np.ndarray

    def __post_init__(self):
        f = np.array(self.features, dtype=np.float64).reshape(-1)
        if f.shape != (RADAR_CHANNELS,):
            raise ValueError(f"radar point needs {RADAR_CHANNELS} features, got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("radar point features must be finite")
        f.flags.writeable = False
        object.__setattr__(self, "features", f)

    @property
    def position(self) -> np.ndarray:
        return self.features[:3]


@dataclass(frozen=True, eq=False)
class RadarSweep:
    """One radar scan. ``points`` is an (N, 18) array, one row per return."""

    points: np.ndarray
    timestamp: float
    ego_pose: EgoPose = field(default_factory=EgoPose)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64).reshape(-1, RADAR_CHANNELS)
        if not np.all(np.isfinite(pts)):
            raise ValueError("radar sweep contains non-finite values")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_points(cls, points: list[RadarPoint], timestamp: float, ego_pose: EgoPose | None = None):
        arr = np.array([p.features for p in points]).reshape(-1, RADAR_CHANNELS)
        return cls(arr, timestamp, ego_pose or EgoPose())


def accumulate_sweeps(sweeps: list[RadarSweep], reference_time: float, max_sweeps: int = 5) -> np.ndarray:
    """Merge the newest ``max_sweeps`` sweeps into the reference frame.

    Returns an (N, 18) array. x/y are moved by each sweep's ego pose, z is kept,
    and the time-offset channel becomes ``reference_time - sweep.timestamp``.
    """
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be >= 1")
    if not sweeps:
        return np.zeros((0, RADAR_CHANNELS))
    stamps = [s.timestamp for s in sweeps]
    if any(b < a for a, b in zip(stamps, stamps[1:])):
        raise ValueError("sweeps must be ordered oldest to newest")
    chunks = []
    for sweep in sweeps[-max_sweeps:]:
        pts = np.array(sweep.points, dtype=np.float64)
        if len(pts):
            pts[:, :2] = sweep.ego_pose.apply(pts[:, :2])
            pts[:, CH_TIME_OFFSET] = reference_time - sweep.timestamp
        chunks.append(pts)
    return np.concatenate(chunks, axis=0)


def pillarize(points, grid: BevGrid) -> FeatureMap:
    """Average every point's 18 features into the BEV cell under it.

    Empty cells stay zero and off-grid points are dropped.
    """
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, RADAR_CHANNELS))
    n = grid.cells_per_side
    cells = np.ascontiguousarray(cells_of(pts[:, :2], grid))
    sums, _ = _backend.pillar_mean(cells, pts, n * n)
    return FeatureMap(np.ascontiguousarray(sums.T).reshape(RADAR_CHANNELS, n, n))


def _concat(a: FeatureMap, b: FeatureMap, a_channels: int, b_channels: int) -> FeatureMap:
    if a.channels != a_channels or b.channels != b_channels:
        raise ValueError(
            f"expected {a_channels}+{b_channels} channels, got {a.channels}+{b.channels}"
        )
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError(
            f"incompatible grids: {a.height}x{a.width} vs {b.height}x{b.width}"
        )
    return FeatureMap(np.concatenate([a.data, b.data], axis=0))


def fuse_concat(image_bev: FeatureMap, radar_bev: FeatureMap) -> FeatureMap:
    """Image channels first, radar channels after: 64 + 18 -> 82."""
    return _concat(image_bev, radar_bev, IMAGE_BEV_CHANNELS, RADAR_CHANNELS)


def residual_concat(encoded_bev: FeatureMap, radar_bev: FeatureMap) -> FeatureMap:
    """Skip connection of the raw radar pillars past the encoder: 256 + 18 -> 274."""
    return _concat(encoded_bev, radar_bev, ENCODED_BEV_CHANNELS, RADAR_CHANNELS)


class FeatureEncoder(Protocol):
    in_channels: int
    out_channels: int

    def __call__(self, fmap: FeatureMap) -> FeatureMap: ...


class StubEncoder:
    """Per-cell fixed random linear projection; stands in for a learned BEV encoder."""

    def __init__(self, in_channels: int, out_channels: int = ENCODED_BEV_CHANNELS, seed: int = 0):
        self.in_channels = in_channels
        self.out_channels = out_channels
        rng = np.random.Generator(np.random.Philox(seed))
        self.weight = rng.standard_normal((out_channels, in_channels)) / math.sqrt(in_channels)

    def __call__(self, fmap: FeatureMap) -> FeatureMap:
        c, h, w = fmap.shape
        out = (self.weight @ fmap.data.reshape(c, h * w)).reshape(self.out_channels, h, w)
        return FeatureMap(out)


def encode_bev(fused: FeatureMap, encoder: FeatureEncoder) -> FeatureMap:
    if fused.channels != encoder.in_channels:
        raise ValueError(
            f"encoder expects {encoder.in_channels} channels, got {fused.channels}"
        )
    return encoder(fused)


class Aggregation(str, Enum):
    PILLAR = "pillar"
    VOXEL = "voxel"


@dataclass(frozen=True)
class FusionConfig:
    aggregation: Aggregation = Aggregation.PILLAR
    residual: bool = True
    max_sweeps: int = 5

    def __post_init__(self):
        object.__setattr__(self, "aggregation", Aggregation(self.aggregation))
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")


def fuse_bev(
    image_bev: FeatureMap,
    radar_points,
    grid: BevGrid,
    cfg: FusionConfig = FusionConfig(),
    encoder: FeatureEncoder | None = None,
) -> FeatureMap:
    """Run the detector-input data path: pillars, concat, encode, optional residual.

    Returns the tensor handed to the detection head: 274 channels with the
    residual connection, 256 without.
    """
    if cfg.aggregation is Aggregation.VOXEL:
        raise NotImplementedError(
            "voxel aggregation with a 3D-conv bev compressor is not implemented; "
            "it underperforms single-bin pillars"
        )
    radar_bev = pillarize(radar_points, grid)
    fused = fuse_concat(image_bev, radar_bev)
    if encoder is None:
        encoder = StubEncoder(fused.channels)
    encoded = encode_bev(fused, encoder)
    if cfg.residual:
        return residual_concat(encoded, radar_bev)
    return encoded
