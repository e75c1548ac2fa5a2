import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from fusetrack.geometry import BevGrid, FeatureMap, world_to_cell
from fusetrack.pillars import (
    CH_TIME_OFFSET,
    Aggregation,
    EgoPose,
    FusionConfig,
    RadarPoint,
    RadarSweep,
    StubEncoder,
    accumulate_sweeps,
    encode_bev,
    fuse_bev,
    fuse_concat,
    pillarize,
    residual_concat,
)

GRID = BevGrid()
N = GRID.cells_per_side


def brute_force_mean(points, grid=GRID):
    """Dict of python floats, summed in input order, then divided."""
    sums, counts = {}, {}
    for p in points:
        cell = world_to_cell((float(p[0]), float(p[1])), grid)
        if cell is None:
            continue
        if cell not in sums:
            sums[cell] = [float(v) for v in p]
            counts[cell] = 1
        else:
            acc = sums[cell]
            for k in range(len(p)):
                acc[k] = acc[k] + float(p[k])
            counts[cell] += 1
    n = grid.cells_per_side
    out = np.zeros((len(points[0]) if len(points) else 18, n, n))
    for (r, c), acc in sums.items():
        cnt = counts[(r, c)]
        out[:, r, c] = [v / cnt if cnt > 1 else v for v in acc]
    return out


def random_points(rng, n, spread=55.0):
    pts = rng.normal(scale=3.0, size=(n, 18))
    pts[:, :2] = rng.uniform(-spread, spread, size=(n, 2))
    return pts


def test_two_points_one_cell():
    f1 = np.arange(18.0)
    f2 = np.arange(18.0) * 2
    f1[:3] = (0.1, 0.1, 1.0)
    f2[:3] = (0.5, 0.6, 3.0)
    bev = pillarize(np.stack([f1, f2]), GRID).data
    assert bev.shape == (18, 128, 128)
    np.testing.assert_array_equal(bev[:, 64, 64], (f1 + f2) / 2)
    bev_rest = bev.copy()
    bev_rest[:, 64, 64] = 0
    assert not bev_rest.any()


def test_empty_point_list():
    bev = pillarize(np.zeros((0, 18)), GRID)
    assert bev.shape == (18, 128, 128)
    assert not bev.data.any()


def test_out_of_range_points_dropped():
    p = np.zeros((2, 18))
    p[0, :2] = (51.2, 0.0)
    p[1, :2] = (0.0, -60.0)
    assert not pillarize(p, GRID).data.any()


def test_random_points_match_brute_force(rng):
    pts = random_points(rng, 1000, spread=51.2)
    np.testing.assert_array_equal(pillarize(pts, GRID).data, brute_force_mean(pts))


def test_dense_cell_matches_brute_force(rng):
    # many points in few cells makes the summation order matter
    pts = rng.normal(scale=1e3, size=(3000, 18))
    pts[:, :2] = rng.uniform(-1.5, 1.5, size=(3000, 2))
    np.testing.assert_array_equal(pillarize(pts, GRID).data, brute_force_mean(pts))


@given(arrays(np.float64, st.tuples(st.integers(0, 40), st.just(18)),
              elements=st.floats(-60, 60, allow_nan=False, allow_subnormal=False)))
def test_pillarize_is_brute_force_mean(pts):
    if len(pts) == 0:
        assert not pillarize(pts, GRID).data.any()
        return
    np.testing.assert_array_equal(pillarize(pts, GRID).data, brute_force_mean(pts))


@given(st.integers(0, 2**32 - 1))
def test_position_channels_are_centroids(seed):
    rng = np.random.default_rng(seed)
    pts = random_points(rng, 200, spread=3.0)
    bev = pillarize(pts, GRID).data
    cells = [world_to_cell(tuple(p[:2]), GRID) for p in pts]
    for cell in set(cells):
        members = pts[[c == cell for c in cells]]
        np.testing.assert_allclose(bev[:3, cell[0], cell[1]], members[:, :3].mean(axis=0), rtol=1e-12, atol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_union_is_count_weighted_mean(seed):
    rng = np.random.default_rng(seed)
    a = random_points(rng, 150, spread=4.0)
    b = random_points(rng, 100, spread=4.0)

    def counts(p):
        out = np.zeros((N, N))
        for q in p:
            cell = world_to_cell(tuple(q[:2]), GRID)
            if cell is not None:
                out[cell] += 1
        return out

    ca, cb = counts(a), counts(b)
    both = np.maximum(ca + cb, 1)
    expected = (pillarize(a, GRID).data * ca + pillarize(b, GRID).data * cb) / both
    np.testing.assert_allclose(pillarize(np.vstack([a, b]), GRID).data, expected, rtol=1e-9, atol=1e-9)


def test_backends_agree_bitwise(rng):
    from fusetrack import _fallback
    from fusetrack.geometry import cells_of

    kernels = pytest.importorskip("fusetrack._kernels")
    pts = np.ascontiguousarray(random_points(rng, 5000))
    cells = np.ascontiguousarray(cells_of(pts[:, :2], GRID))
    s1, c1 = _fallback.pillar_mean(cells, pts, N * N)
    s2, c2 = kernels.pillar_mean(cells, pts, N * N)
    np.testing.assert_array_equal(s1, s2)
    np.testing.assert_array_equal(c1, c2)


# --- sweeps -------------------------------------------------------------------

def sweep(points, t, pose=EgoPose()):
    return RadarSweep(np.asarray(points, dtype=float).reshape(-1, 18), t, pose)


def test_single_identity_sweep_is_unchanged(rng):
    pts = rng.normal(size=(3, 18))
    pts[:, CH_TIME_OFFSET] = 0.0
    out = accumulate_sweeps([sweep(pts, 1.0)], 1.0)
    np.testing.assert_array_equal(out, pts)


def test_older_sweep_translated():
    old = sweep(np.zeros((1, 18)), 0.0, EgoPose(0.0, 1.0, 0.0))
    new = sweep(np.zeros((0, 18)), 0.1)
    out = accumulate_sweeps([old, new], 0.1)
    assert out.shape == (1, 18)
    np.testing.assert_array_equal(out[0, :3], (1.0, 0.0, 0.0))
    assert out[0, CH_TIME_OFFSET] == pytest.approx(0.1)


def test_rotation_keeps_z():
    p = np.zeros((1, 18))
    p[0, :3] = (1.0, 0.0, 2.5)
    out = accumulate_sweeps([sweep(p, 0.0, EgoPose(math.pi / 2, 0.0, 0.0)), sweep(p, 1.0)], 1.0)
    np.testing.assert_allclose(out[0, :3], (0.0, 1.0, 2.5), atol=1e-15)


def test_only_newest_sweeps_kept():
    sweeps = []
    for k in range(6):
        p = np.zeros((k + 1, 18))
        p[:, 3] = k
        sweeps.append(sweep(p, float(k)))
    out = accumulate_sweeps(sweeps, 5.0, max_sweeps=5)
    assert len(out) == sum(k + 1 for k in range(1, 6))
    assert set(out[:, 3]) == {1.0, 2.0, 3.0, 4.0, 5.0}


def test_sweep_validation():
    with pytest.raises(ValueError):
        accumulate_sweeps([sweep(np.zeros((0, 18)), 1.0), sweep(np.zeros((0, 18)), 0.0)], 1.0)
    with pytest.raises(ValueError):
        accumulate_sweeps([sweep(np.zeros((0, 18)), 1.0)], 1.0, max_sweeps=0)
    with pytest.raises(ValueError):
        RadarPoint(np.zeros(17))


def test_sweep_from_points():
    pts = [RadarPoint(np.full(18, float(i))) for i in range(3)]
    s = RadarSweep.from_points(pts, 0.0)
    assert s.points.shape == (3, 18)


# --- fusion -------------------------------------------------------------------

def fmap(rng, c, n=N):
    return FeatureMap(rng.normal(size=(c, n, n)))


def test_fuse_concat_zeros():
    out = fuse_concat(FeatureMap.zeros(64, N, N), FeatureMap.zeros(18, N, N))
    assert out.shape == (82, 128, 128)
    assert not out.data.any()


def test_fuse_concat_channel_identity(rng):
    img, radar = fmap(rng, 64), fmap(rng, 18)
    img_copy, radar_copy = img.data.copy(), radar.data.copy()
    out = fuse_concat(img, radar)
    for c in range(64):
        np.testing.assert_array_equal(out.data[c], img.data[c])
    for k in range(18):
        np.testing.assert_array_equal(out.data[64 + k], radar.data[k])
    np.testing.assert_array_equal(img.data, img_copy)
    np.testing.assert_array_equal(radar.data, radar_copy)


def test_residual_concat_channel_identity(rng):
    enc, radar = fmap(rng, 256), fmap(rng, 18)
    out = residual_concat(enc, radar)
    assert out.shape == (274, 128, 128)
    np.testing.assert_array_equal(out.data[:256], enc.data)
    for k in range(18):
        np.testing.assert_array_equal(out.data[256 + k], radar.data[k])
    assert not residual_concat(FeatureMap.zeros(256, N, N), FeatureMap.zeros(18, N, N)).data.any()


def test_concat_rejects_mismatch(rng):
    with pytest.raises(ValueError, match="incompatible grids"):
        fuse_concat(fmap(rng, 64, 8), fmap(rng, 18, 4))
    with pytest.raises(ValueError):
        fuse_concat(fmap(rng, 63, 4), fmap(rng, 18, 4))
    with pytest.raises(ValueError):
        residual_concat(fmap(rng, 256, 4), fmap(rng, 17, 4))


def test_stub_encoder(rng):
    enc = StubEncoder(82)
    assert not encode_bev(FeatureMap.zeros(82, 4, 4), enc).data.any()
    x = fmap(rng, 82, 4)
    a, b = encode_bev(x, enc), encode_bev(x, StubEncoder(82))
    assert a.shape == (256, 4, 4)
    np.testing.assert_array_equal(a.data, b.data)
    assert encode_bev(fmap(rng, 274, 4), StubEncoder(274)).channels == 256
    with pytest.raises(ValueError):
        encode_bev(fmap(rng, 64, 4), enc)


def test_stub_encoder_has_no_spatial_mixing(rng):
    enc = StubEncoder(82)
    x = np.zeros((82, 4, 4))
    x[:, 1, 2] = rng.normal(size=82)
    out = enc(FeatureMap(x)).data
    mask = np.ones((4, 4), dtype=bool)
    mask[1, 2] = False
    assert not out[:, mask].any()


def test_fuse_bev_shapes(rng):
    img = fmap(rng, 64)
    pts = random_points(rng, 100, spread=50)
    assert fuse_bev(img, pts, GRID, FusionConfig(residual=True)).shape == (274, 128, 128)
    assert fuse_bev(img, pts, GRID, FusionConfig(residual=False)).shape == (256, 128, 128)


def test_voxel_aggregation_rejected(rng):
    with pytest.raises(NotImplementedError):
        fuse_bev(fmap(rng, 64), np.zeros((0, 18)), GRID, FusionConfig(aggregation=Aggregation.VOXEL))
