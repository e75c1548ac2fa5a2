import json

import numpy as np
import pytest

from fusetrack import config as config_mod
from fusetrack.config import ConfigError, RunConfig
from fusetrack.io import (
    DataError,
    atomic_write,
    read_detections,
    read_radar,
    read_track_log,
    write_detections,
    write_radar,
    write_track_log,
)
from fusetrack.pipeline import gt_logs, pmap, scene_configs, simulate
from fusetrack.simulator import ScenarioConfig


@pytest.fixture(scope="module")
def bundles():
    return simulate(ScenarioConfig(n_objects=3, n_frames=4, sigma_pos=0.2, clutter_rate=1.0, seed=2), 2)


def test_detection_round_trip(tmp_path, bundles):
    p = tmp_path / "d.jsonl"
    write_detections(p, {n: b.frames for n, b in bundles.items()})
    back = read_detections(p)
    assert sorted(back) == sorted(bundles)
    for name, b in bundles.items():
        for f1, f2 in zip(b.frames, back[name]):
            assert f1.dt == f2.dt and f1.frame_idx == f2.frame_idx
            for d1, d2 in zip(f1.detections, f2.detections):
                np.testing.assert_array_equal(d1.center, d2.center)
                np.testing.assert_array_equal(d1.embedding, d2.embedding)


def test_track_log_round_trip(tmp_path, bundles):
    p = tmp_path / "gt.jsonl"
    logs = gt_logs(bundles)
    write_track_log(p, logs)
    back = read_track_log(p)
    for name in logs:
        assert [[b.to_dict() for b in f] for f in back[name]] == \
               [[{k: v for k, v in b.to_dict().items()} for b in f] for f in logs[name]]


def test_radar_round_trip(tmp_path, bundles):
    p = tmp_path / "r.jsonl"
    write_radar(p, {n: b.radar for n, b in bundles.items()})
    back = read_radar(p)
    for name, b in bundles.items():
        for s1, s2 in zip(b.radar, back[name]):
            np.testing.assert_array_equal(s1.points, s2.points)


def test_scene_defaults_and_bad_lines(tmp_path):
    p = tmp_path / "t.jsonl"
    p.write_text('{"frame_idx": 1, "boxes": []}\n\n')
    assert read_track_log(p) == {"scene-0000": [[], []]}
    p.write_text("{not json\n")
    with pytest.raises(DataError, match=":1:"):
        read_track_log(p)
    p.write_text('{"frame_idx": 0, "dt": 0.5, "detections": [{"center": [0, 0]}]}\n')
    with pytest.raises(DataError):
        read_detections(p)


def test_atomic_write_leaves_no_partial_file(tmp_path):
    p = tmp_path / "x.txt"
    with pytest.raises(RuntimeError):
        with atomic_write(p) as fh:
            fh.write("half")
            raise RuntimeError
    assert list(tmp_path.iterdir()) == []


def test_config_round_trip_and_hash(tmp_path):
    cfg = RunConfig()
    p = tmp_path / "c.json"
    p.write_text(json.dumps(config_mod.to_dict(cfg)))
    back = config_mod.load(p)
    assert config_mod.config_hash(back) == config_mod.config_hash(cfg)
    moved = config_mod.build(RunConfig, {"output_dir": "elsewhere"})
    assert config_mod.config_hash(moved) == config_mod.config_hash(cfg)
    assert config_mod.config_hash(config_mod.with_seed(cfg, 9)) != config_mod.config_hash(cfg)


def test_config_errors(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"scenario": {"n_objects": 3,}}')
    with pytest.raises(ConfigError, match="line 1"):
        config_mod.load(p)
    with pytest.raises(ConfigError, match="unknown keys"):
        config_mod.build(RunConfig, {"tracker": {"max_agee": 3}})
    with pytest.raises(ConfigError):
        config_mod.build(RunConfig, {"tracker": {"association": {"w_deep": 2}}})
    with pytest.raises(ConfigError):
        config_mod.build(RunConfig, {"grid": {"range_m": 40.0}})
    with pytest.raises(ConfigError):
        config_mod.load(tmp_path / "missing.json")


def test_nested_enums_parse():
    cfg = config_mod.build(RunConfig, {"tracker": {"association": {"trade_off_term": "cosine"}},
                                       "scenario": {"motion": "crossing", "n_objects": 4}})
    assert cfg.tracker.association.trade_off_term.value == "cosine"
    assert cfg.scenario.motion.value == "crossing"


def test_scene_seeds_and_pmap():
    cfgs = scene_configs(ScenarioConfig(seed=10), 3)
    assert {n: c.seed for n, c in cfgs.items()} == {"scene-0000": 10, "scene-0001": 11, "scene-0002": 12}
    assert pmap(abs, [-1, -2, 3], jobs=2) == [1, 2, 3]
