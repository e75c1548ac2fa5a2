"""nuScenes-style tracking metrics: AMOTA, AMOTP, IDS, plus mean velocity error.

A log maps scene name -> list of frames -> list of ``TrackedBox``. Ground truth
uses the same schema with gt identities in ``track_id``.

For each target recall ``r`` the confidence threshold is the highest one whose
recall reaches ``r``; there

    MOTAR(r) = max(0, 1 - (IDS + FP + FN - (1 - r) * P) / (r * P))

with ``P`` the number of ground-truth boxes, capped at 1 when the reached
recall overshoots ``r``. Frame matching follows CLEAR-MOT: a gt keeps the
prediction id it was last matched to while that box stays inside the gate;
everything else is matched greedily, closest first. Recalls that no threshold reaches
score MOTAR 0 and MOTP equal to the match gate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import TrackedBox


@dataclass(frozen=True)
class EvalConfig:
    dist_threshold_m: float = 2.0
    recall_steps: int = 40
    min_recall: float = 0.05

    def __post_init__(self):
        if self.dist_threshold_m <= 0:
            raise ValueError("dist_threshold_m must be positive")
        if self.recall_steps < 2:
            raise ValueError("recall_steps must be >= 2")
        if not 0.0 < self.min_recall <= 1.0:
            raise ValueError("min_recall must lie in (0, 1]")

    def recall_grid(self) -> np.ndarray:
        return np.linspace(self.min_recall, 1.0, self.recall_steps)


@dataclass(frozen=True)
class RecallRow:
    recall: float
    achieved: bool
    threshold: float
    achieved_recall: float
    motar: float
    motp: float
    tp: int
    fp: int
    fn: int
    ids: int


@dataclass
class EvalResult:
    amota: float
    amotp: float
    ids_total: int
    mave: float
    per_recall: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "amota": self.amota,
            "amotp": self.amotp,
            "ids_total": self.ids_total,
            "mave": None if math.isnan(self.mave) else self.mave,
        }


def _dist2d(a: TrackedBox, b: TrackedBox) -> float:
    return math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1])


def _candidates(gt_boxes, pred_boxes, gate_m: float):
    """Same-class (distance, gt_idx, pred_idx) pairs inside the gate, closest first."""
    pairs = []
    for gi, g in enumerate(gt_boxes):
        for pi, p in enumerate(pred_boxes):
            if g.class_id != p.class_id:
                continue
            d = _dist2d(g, p)
            if d <= gate_m:
                pairs.append((d, gi, pi))
    pairs.sort()
    return pairs


def _greedy(pairs, active=None):
    used_g, used_p, out = set(), set(), []
    for d, gi, pi in pairs:
        if gi in used_g or pi in used_p or (active is not None and not active[pi]):
            continue
        used_g.add(gi)
        used_p.add(pi)
        out.append((gi, pi, d))
    return out


def _match_with_memory(g, p, pairs, active, last_id, gate_m):
    """Keep last frame's gt -> pred pairings that are still valid, then match the rest greedily."""
    pred_idx = {b.track_id: i for i, b in enumerate(p) if active[i]}
    kept, used_p = [], set()
    for gi, box in enumerate(g):
        pi = pred_idx.get(last_id.get(box.track_id, -1))
        if pi is None or pi in used_p or p[pi].class_id != box.class_id:
            continue
        d = _dist2d(box, p[pi])
        if d <= gate_m:
            kept.append((gi, pi, d))
            used_p.add(pi)
    if not kept:
        return _greedy(pairs, active)
    used_g = {gi for gi, _, _ in kept}
    rest = [(d, gi, pi) for d, gi, pi in pairs if gi not in used_g and pi not in used_p]
    return kept + _greedy(rest, active)


def match_frame(gt_boxes, pred_boxes, gate_m: float):
    """Greedy closest-first matching within one frame.

    Returns ``(tp_pairs, fp, fn)`` where tp_pairs are (gt_idx, pred_idx, distance).
    """
    tp = _greedy(_candidates(gt_boxes, pred_boxes, gate_m))
    return tp, len(pred_boxes) - len(tp), len(gt_boxes) - len(tp)


@dataclass
class _Stats:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    ids: int = 0
    dist_sum: float = 0.0
    vel_err_sum: float = 0.0
    tp_scores: list = field(default_factory=list)


class SceneResults:
    """Pre-matched ground truth and predictions, evaluable at any confidence threshold."""

    def __init__(self, gt_log: dict, pred_log: dict, cfg: EvalConfig):
        self.cfg = cfg
        self.frames = []  # per scene: list of (gt, pred, candidates)
        n_gt = 0
        scores = []
        for scene in sorted(set(gt_log) | set(pred_log)):
            gframes = gt_log.get(scene, [])
            pframes = pred_log.get(scene, [])
            seq = []
            for k in range(max(len(gframes), len(pframes))):
                g = list(gframes[k]) if k < len(gframes) else []
                p = list(pframes[k]) if k < len(pframes) else []
                n_gt += len(g)
                scores.extend(b.score for b in p)
                seq.append((g, p, _candidates(g, p, cfg.dist_threshold_m)))
            self.frames.append(seq)
        if n_gt == 0:
            raise ValueError("ground truth is empty; tracking metrics are undefined")
        self.n_gt = n_gt
        self.scores = np.unique(np.array(scores, dtype=np.float64))[::-1]
        self._cache: dict[float, _Stats] = {}

    def stats(self, threshold: float) -> _Stats:
        if threshold in self._cache:
            return self._cache[threshold]
        s = _Stats()
        for seq in self.frames:
            last_id: dict[int, int] = {}
            for g, p, pairs in seq:
                active = [b.score >= threshold for b in p]
                tp = _match_with_memory(g, p, pairs, active, last_id, self.cfg.dist_threshold_m)
                n_active = sum(active)
                s.tp += len(tp)
                s.fp += n_active - len(tp)
                s.fn += len(g) - len(tp)
                for gi, pi, d in tp:
                    gid, pid = g[gi].track_id, p[pi].track_id
                    if gid in last_id and last_id[gid] != pid:
                        s.ids += 1
                    last_id[gid] = pid
                    s.dist_sum += d
                    dv = p[pi].velocity[:2] - g[gi].velocity[:2]
                    s.vel_err_sum += math.hypot(dv[0], dv[1])
                    s.tp_scores.append(p[pi].score)
        self._cache[threshold] = s
        return s

    def threshold_for(self, r: float) -> float | None:
        """Highest confidence threshold whose recall reaches ``r``, or None."""
        need = r * self.n_gt - 1e-9
        full = self.stats(-math.inf)
        if full.tp < need:
            return None
        ranked = sorted(full.tp_scores, reverse=True)
        k = max(1, math.ceil(need))
        guess = ranked[k - 1]
        # matching can shift as boxes drop out, so confirm and walk down if needed
        for thr in self.scores[self.scores <= guess]:
            if self.stats(float(thr)).tp >= need:
                return float(thr)
        return -math.inf if full.tp >= need else None

    def row(self, r: float) -> RecallRow:
        thr = self.threshold_for(r)
        if thr is None:
            return RecallRow(r, False, math.nan, math.nan, 0.0, self.cfg.dist_threshold_m, 0, 0, 0, 0)
        s = self.stats(thr)
        p = self.n_gt
        motar = min(1.0, max(0.0, 1.0 - (s.ids + s.fp + s.fn - (1.0 - r) * p) / (r * p)))
        motp = s.dist_sum / s.tp if s.tp else self.cfg.dist_threshold_m
        return RecallRow(r, True, thr, s.tp / p, motar, motp, s.tp, s.fp, s.fn, s.ids)


def motar_at_recall(scene_results: SceneResults, r: float) -> float:
    return scene_results.row(r).motar


def evaluate(gt_log: dict, pred_log: dict, cfg: EvalConfig = EvalConfig()) -> EvalResult:
    res = SceneResults(gt_log, pred_log, cfg)
    rows = [res.row(float(r)) for r in cfg.recall_grid()]
    amota = float(np.mean([row.motar for row in rows]))
    amotp = float(np.mean([row.motp for row in rows]))
    achieved = [row for row in rows if row.achieved]
    ids_total, mave = 0, math.nan
    if achieved:
        best = max(achieved, key=lambda row: row.motar)  # first maximum wins
        s = res.stats(best.threshold)
        ids_total = s.ids
        if s.tp:
            mave = s.vel_err_sum / s.tp
    return EvalResult(amota, amotp, ids_total, mave, rows)
