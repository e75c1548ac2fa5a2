"""Scene-level orchestration: simulate -> track -> evaluate, and ablation sweeps."""
from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .association import TradeOff
from .config import Experiment, RunConfig
from .metrics import EvalConfig, EvalResult, evaluate
from .simulator import ScenarioBundle, ScenarioConfig, degrade_velocity, generate
from .tracker import TrackerConfig, run_sequence

THRESHOLD_SWEEP = (0.50, 0.30, 0.18)
WEIGHT_SWEEP = ((0.5, 0.5), (0.75, 0.25), (0.25, 0.75))
TRADEOFF_SWEEP = (TradeOff.COSINE, TradeOff.VELOCITY)
VELNOISE_SWEEP = (0.2, 1.0)


def scene_name(k: int) -> str:
    return f"scene-{k:04d}"


def pmap(fn, items, jobs: int = 1):
    """Ordered map, in a process pool when ``jobs > 1``."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def scene_configs(scenario: ScenarioConfig, n_scenes: int) -> dict[str, ScenarioConfig]:
    return {scene_name(k): dataclasses.replace(scenario, seed=scenario.seed + k) for k in range(n_scenes)}


def simulate(scenario: ScenarioConfig, n_scenes: int, jobs: int = 1) -> dict[str, ScenarioBundle]:
    cfgs = scene_configs(scenario, n_scenes)
    return dict(zip(cfgs, pmap(generate, cfgs.values(), jobs)))


def _track_one(args):
    frames, cfg = args
    return run_sequence(frames, cfg)


def track(frames_by_scene: dict, cfg: TrackerConfig, jobs: int = 1) -> dict:
    """Run the tracker on every scene; returns scene -> TrackOutputLog."""
    names = sorted(frames_by_scene)
    logs = pmap(_track_one, [(frames_by_scene[n], cfg) for n in names], jobs)
    return dict(zip(names, logs))


def gt_logs(bundles: dict[str, ScenarioBundle]) -> dict:
    return {name: b.gt_log for name, b in bundles.items()}


def run_bundles(bundles: dict[str, ScenarioBundle], tracker: TrackerConfig, eval_cfg: EvalConfig) -> EvalResult:
    logs = track({n: b.frames for n, b in bundles.items()}, tracker)
    return evaluate(gt_logs(bundles), {n: log.frames for n, log in logs.items()}, eval_cfg)


# --- ablations ---------------------------------------------------------------

@dataclass(frozen=True)
class Cell:
    label: str
    tracker: TrackerConfig
    sigma_vel: float | None = None  # re-noise detection velocities when set


def ablation_cells(experiment: Experiment, base: TrackerConfig) -> list[Cell]:
    assoc = base.association
    if experiment is Experiment.ABLATE_THRESHOLD:
        return [
            Cell(f"threshold={t:.2f}", dataclasses.replace(base, association=dataclasses.replace(assoc, match_threshold=t)))
            for t in THRESHOLD_SWEEP
        ]
    if experiment is Experiment.ABLATE_WEIGHTS:
        return [
            Cell(f"w_deep={wd:.2f} w_motion={wm:.2f}", dataclasses.replace(base, association=dataclasses.replace(assoc, w_deep=wd)))
            for wd, wm in WEIGHT_SWEEP
        ]
    if experiment is Experiment.ABLATE_TRADEOFF:
        return [
            Cell(f"trade_off={t.value}", dataclasses.replace(base, association=dataclasses.replace(assoc, trade_off_term=t)))
            for t in TRADEOFF_SWEEP
        ]
    if experiment is Experiment.ABLATE_VELNOISE:
        return [Cell(f"sigma_vel={s:.1f}", base, s) for s in VELNOISE_SWEEP]
    return [Cell("single", base)]


def _run_cell_seed(args) -> tuple[float, float, int]:
    cell, scenario, n_scenes, eval_cfg = args
    bundles = simulate(scenario, n_scenes)
    if cell.sigma_vel is not None:
        bundles = {n: degrade_velocity(b, cell.sigma_vel, b.config.seed) for n, b in bundles.items()}
    res = run_bundles(bundles, cell.tracker, eval_cfg)
    return res.amota, res.amotp, res.ids_total


def seed_scenarios(cfg: RunConfig) -> list[ScenarioConfig]:
    base = cfg.scenario.seed
    return [dataclasses.replace(cfg.scenario, seed=base + i * cfg.n_scenes) for i in range(cfg.ablation_seeds)]


@dataclass
class CellSummary:
    label: str
    amota: np.ndarray
    amotp: np.ndarray
    ids: np.ndarray

    def row(self) -> dict:
        return {
            "cell": self.label,
            "seeds": len(self.amota),
            "amota_mean": float(np.mean(self.amota)),
            "amota_std": float(np.std(self.amota)),
            "amotp_mean": float(np.mean(self.amotp)),
            "amotp_std": float(np.std(self.amotp)),
            "ids_mean": float(np.mean(self.ids)),
            "ids_std": float(np.std(self.ids)),
        }


def run_ablation(cfg: RunConfig, experiment: Experiment | None = None, jobs: int = 1) -> list[CellSummary]:
    experiment = Experiment(experiment or cfg.experiment)
    cells = ablation_cells(experiment, cfg.tracker)
    scenarios = seed_scenarios(cfg)
    work = [(cell, sc, cfg.n_scenes, cfg.eval) for cell in cells for sc in scenarios]
    results = pmap(_run_cell_seed, work, jobs)
    out = []
    for i, cell in enumerate(cells):
        chunk = np.array(results[i * len(scenarios):(i + 1) * len(scenarios)], dtype=np.float64)
        out.append(CellSummary(cell.label, chunk[:, 0], chunk[:, 1], chunk[:, 2]))
    return out
