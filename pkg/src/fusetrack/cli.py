"""Command-line entry point.

Subcommands: simulate, track, eval, run (all three), ablate, pillarize, bench.
Exit codes: 0 ok, 2 usage/config error, 3 runtime/data error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import pipeline
from .config import ConfigError, Experiment, RunConfig
from .io import (
    DataError,
    atomic_write,
    read_detections,
    read_radar,
    read_track_log,
    write_detections,
    write_radar,
    write_track_log,
)
from .geometry import FeatureMap
from .metrics import EvalResult, evaluate
from .pillars import accumulate_sweeps, fuse_bev, pillarize

log = logging.getLogger("fusetrack")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3


class UsageError(Exception):
    pass


def _setup_logging():
    level = os.environ.get("FUSETRACK_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _load_config(args) -> RunConfig:
    cfg = config_mod.load(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg = config_mod.with_seed(cfg, args.seed)
    return cfg


def _out_dir(args, cfg: RunConfig) -> Path:
    return Path(args.out or cfg.output_dir)


def _require(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {p}")
    return p


def _write_json(path: Path, obj):
    with atomic_write(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _write_csv(path: Path, header: list[str], rows: list[list]):
    with atomic_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# --- commands ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    bundles = pipeline.simulate(cfg.scenario, cfg.n_scenes, args.jobs)
    write_track_log(out / "gt.jsonl", pipeline.gt_logs(bundles))
    write_detections(out / "detections.jsonl", {n: b.frames for n, b in bundles.items()})
    write_radar(out / "radar.jsonl", {n: b.radar for n, b in bundles.items()})
    _write_json(out / "manifest.json", {
        "config_hash": config_mod.config_hash(cfg),
        "config": config_mod.to_dict(cfg),
        "scenes": sorted(bundles),
        "files": ["gt.jsonl", "detections.jsonl", "radar.jsonl"],
    })
    print(f"wrote {len(bundles)} scenes to {out}")
    return EXIT_OK


def cmd_track(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    scenes = read_detections(_require(args.detections))
    logs = pipeline.track(scenes, cfg.tracker, args.jobs)
    write_track_log(out / "tracks.jsonl", {n: lg.frames for n, lg in logs.items()})
    frames = sum(lg.timing["frames"] for lg in logs.values())
    seconds = sum(lg.timing["seconds"] for lg in logs.values())
    timing = {"frames": frames, "seconds": seconds, "fps": frames / seconds if seconds > 0 else None}
    # wall-clock timing lives in its own file so result files stay reproducible
    _write_json(out / "timing.json", timing)
    print(f"tracked {frames} frames in {seconds:.3f} s ({timing['fps'] or 0:.1f} frames/s)")
    return EXIT_OK


def write_eval(out: Path, res: EvalResult):
    _write_json(out / "metrics.json", res.to_dict())
    rows = [
        [r.recall, int(r.achieved), r.threshold, r.achieved_recall, r.motar, r.motp, r.tp, r.fp, r.fn, r.ids]
        for r in res.per_recall
    ]
    _write_csv(out / "per_recall.csv",
               ["recall", "achieved", "threshold", "achieved_recall", "motar", "motp", "tp", "fp", "fn", "ids"], rows)
    _write_csv(out / "motar_curve.csv", ["recall", "motar"], [[r.recall, r.motar] for r in res.per_recall])


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    gt = read_track_log(_require(args.gt))
    pred = read_track_log(_require(args.pred))
    res = evaluate(gt, pred, cfg.eval)
    write_eval(out, res)
    print(json.dumps(res.to_dict()))
    return EXIT_OK


def cmd_run(args) -> int:
    """simulate -> track -> eval, all outputs in one directory."""
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    rc = cmd_simulate(args)
    args.detections = str(out / "detections.jsonl")
    rc = rc or cmd_track(args)
    args.gt, args.pred = str(out / "gt.jsonl"), str(out / "tracks.jsonl")
    return rc or cmd_eval(args)


def cmd_ablate(args) -> int:
    cfg = _load_config(args)
    if args.seeds is not None:
        if args.seeds < 1:
            raise UsageError("--seeds must be >= 1")
        cfg = dataclasses.replace(cfg, ablation_seeds=args.seeds)
    experiment = Experiment(args.experiment or cfg.experiment)
    if experiment is Experiment.SINGLE:
        raise UsageError("ablate needs an ablate_* experiment (config 'experiment' or --experiment)")
    out = _out_dir(args, cfg)
    cells = pipeline.run_ablation(cfg, experiment, args.jobs)
    rows = [c.row() for c in cells]
    header = list(rows[0])
    path = out / f"{experiment.value}.csv"
    _write_csv(path, header, [[r[h] for h in header] for r in rows])
    for r in rows:
        print(f"{r['cell']:<28} AMOTA {r['amota_mean']:.4f}±{r['amota_std']:.4f}  "
              f"AMOTP {r['amotp_mean']:.3f}±{r['amotp_std']:.3f}  IDS {r['ids_mean']:.2f}±{r['ids_std']:.2f}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_pillarize(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    fusion = cfg.fusion
    scenes = read_radar(_require(args.radar))
    arrays, summary = {}, []
    grid = cfg.grid
    for scene in sorted(scenes):
        sweeps = scenes[scene]
        for k, sweep in enumerate(sweeps):
            pts = accumulate_sweeps(sweeps[: k + 1], sweep.timestamp, fusion.max_sweeps)
            bev = pillarize(pts, grid)
            occupied = int(np.count_nonzero(np.any(bev.data != 0, axis=0)))
            summary.append([scene, k, len(pts), occupied])
            arrays[f"{scene}/{k:04d}"] = bev.data.astype(np.float32)
    if args.fused_shape:
        n = grid.cells_per_side
        fused = fuse_bev(FeatureMap.zeros(64, n, n), np.zeros((0, 18)), grid, fusion)
        print(f"detector input tensor: {fused.channels}x{fused.height}x{fused.width}")
    with atomic_write(out / "radar_bev.npz", "wb") as fh:
        np.savez_compressed(fh, **arrays)
    _write_csv(out / "radar_bev.csv", ["scene", "frame_idx", "points", "occupied_cells"], summary)
    print(f"pillarized {len(summary)} frames into {out / 'radar_bev.npz'}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import main as bench_main

    return bench_main(["--repeat", str(args.repeat)])


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fusetrack", description="Camera-radar BEV fusion plumbing and 3D multi-object tracking")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", help="run config JSON")
        if seed:
            p.add_argument("--seed", type=int, help="override scenario.seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--out", help="output directory (default: config output_dir)")

    p = sub.add_parser("simulate", help="generate synthetic scenes")
    common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("track", help="run the tracker over a detections JSONL")
    common(p, seed=False)
    p.add_argument("--detections", required=True)
    p.set_defaults(fn=cmd_track)

    p = sub.add_parser("eval", help="score a track log against ground truth")
    common(p, seed=False)
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("run", help="simulate, track and evaluate")
    common(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("ablate", help="tracker ablation sweep")
    common(p)
    p.add_argument("--experiment", choices=[e.value for e in Experiment if e is not Experiment.SINGLE])
    p.add_argument("--seeds", type=int, help="override ablation_seeds")
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("pillarize", help="accumulate radar sweeps and average them into BEV pillars")
    common(p, seed=False)
    p.add_argument("--radar", required=True)
    p.add_argument("--fused-shape", action="store_true", help="also report the fused detector-input shape")
    p.set_defaults(fn=cmd_pillarize)

    p = sub.add_parser("bench", help="compare compiled and fallback kernels")
    p.add_argument("--repeat", type=int, default=5)
    p.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.fn(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NotImplementedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
