import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fusetrack.geometry import BevGrid, Detection, FeatureMap, TrackedBox, cells_of, world_to_cell, wrap_angle

GRID = BevGrid()
coord = st.floats(-51.2, 51.2, allow_nan=False)


def test_default_grid():
    assert GRID.cells_per_side == 128
    assert BevGrid(10.0, 0.5).cells_per_side == 40


@pytest.mark.parametrize("rng_m,res", [(0.0, 0.8), (51.2, 0.0), (-1.0, 0.8)])
def test_grid_rejects_nonpositive(rng_m, res):
    with pytest.raises(ValueError):
        BevGrid(rng_m, res)


@pytest.mark.parametrize(
    "p,expected",
    [
        ((0.0, 0.0), (64, 64)),
        ((-51.2, -51.2), (0, 0)),
        ((51.2, 0.0), None),
        ((0.0, 51.2), None),
        ((-51.3, 0.0), None),
        ((0.5, -0.1), (63, 64)),
    ],
)
def test_world_to_cell_examples(p, expected):
    assert world_to_cell(p, GRID) == expected


def test_world_to_cell_origin_is_direct_floor():
    # (0 + 51.2) / 0.8 evaluated directly
    assert math.floor((0.0 + 51.2) / 0.8) == 64


@given(coord, coord)
def test_cell_center_within_half_cell(x, y):
    cell = world_to_cell((x, y), GRID)
    if cell is None:
        # only the open upper edge falls off the grid
        assert max(x, y) > 51.2 - 1e-9
        return
    cx, cy = GRID.cell_center(*cell)
    assert abs(x - cx) <= GRID.resolution_m / 2 + 1e-9
    assert abs(y - cy) <= GRID.resolution_m / 2 + 1e-9


@given(st.integers(0, 127), st.integers(0, 127), st.floats(0.0, 0.79), st.floats(0.0, 0.79))
def test_offsets_within_cell_keep_cell(row, col, dx, dy):
    # lower corner of the cell plus any offset smaller than the resolution
    x0 = -51.2 + col * 0.8 + 1e-6
    y0 = -51.2 + row * 0.8 + 1e-6
    base = world_to_cell((x0, y0), GRID)
    assert base == (row, col)
    shifted = world_to_cell((x0 + dx * (0.8 - 2e-6) / 0.8, y0 + dy * (0.8 - 2e-6) / 0.8), GRID)
    assert shifted == base


@given(st.lists(st.tuples(st.floats(-60, 60), st.floats(-60, 60)), max_size=50))
def test_vectorised_cells_match_scalar(points):
    flat = cells_of(np.array(points, dtype=float).reshape(-1, 2), GRID)
    for p, f in zip(points, flat):
        cell = world_to_cell(p, GRID)
        assert f == (-1 if cell is None else cell[0] * 128 + cell[1])


def test_feature_map_rejects_mismatched_length():
    with pytest.raises(ValueError):
        FeatureMap.from_flat(np.zeros(10), 2, 2, 3)
    fm = FeatureMap.from_flat(np.arange(12.0), 2, 2, 3)
    assert fm.shape == (2, 2, 3)
    assert fm.data[1, 0, 0] == 6.0


def test_feature_map_rejects_non_finite_and_is_read_only():
    with pytest.raises(ValueError):
        FeatureMap(np.array([[[np.nan]]]))
    fm = FeatureMap.zeros(1, 2, 2)
    with pytest.raises(ValueError):
        fm.data[0, 0, 0] = 1.0


def test_detection_validation():
    ok = dict(center=(0, 0, 0), dims=(1, 1, 1), yaw=0.0, velocity=(0, 0, 0), score=0.5, class_id=0, embedding=[1.0, 0.0])
    Detection(**ok)
    for bad in (
        {"dims": (1, 0, 1)},
        {"score": 1.5},
        {"embedding": [1.0, 1.0]},
        {"center": (0, np.inf, 0)},
    ):
        with pytest.raises(ValueError):
            Detection(**{**ok, **bad})


def test_detection_yaw_wrapped():
    d = Detection(center=(0, 0, 0), dims=(1, 1, 1), yaw=3 * math.pi / 2, velocity=(0, 0, 0), score=0.5,
                  class_id=0, embedding=[1.0])
    assert d.yaw == pytest.approx(-math.pi / 2)


@given(st.floats(-50, 50))
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi


def test_tracked_box_round_trip():
    b = TrackedBox(3, (1, 2, 3), (4, 5, 6), 0.1, (1, 0, 0), 0.7, 2)
    assert TrackedBox.from_dict(b.to_dict()).to_dict() == b.to_dict()
    with pytest.raises(ValueError):
        TrackedBox(-1, (0, 0, 0), (1, 1, 1), 0, (0, 0, 0), 1, 0)
