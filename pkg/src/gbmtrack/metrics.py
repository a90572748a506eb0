"""Detection precision/recall and CLEAR MOT tracking metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .io import group_by_frame
from .types import ConfigError, GbmTrackError, center_distance, iou_matrix


@dataclass
class EvalConfig:
    match_threshold_iou: float = 0.5
    motp_mode: str = "iou"

    def __post_init__(self):
        if not 0.0 < self.match_threshold_iou <= 1.0:
            raise ConfigError("match_threshold_iou must lie in (0, 1]")
        if self.motp_mode not in ("iou", "center_distance"):
            raise ConfigError("motp_mode must be 'iou' or 'center_distance'")


@dataclass
class DetectionScores:
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int
    # True where a ratio had an empty denominator and was set to 1.0
    precision_undefined: bool = False
    recall_undefined: bool = False


def greedy_iou_matches(truth_boxes, det_boxes, threshold: float):
    """One-to-one matches by descending IoU, ties by (truth, detection) index."""
    M = iou_matrix(truth_boxes, det_boxes)
    cand = [(-M[i, j], i, j) for i in range(M.shape[0]) for j in range(M.shape[1])
            if M[i, j] >= threshold]
    cand.sort()
    ut, ud, out = set(), set(), []
    for _neg, i, j in cand:
        if i in ut or j in ud:
            continue
        ut.add(i)
        ud.add(j)
        out.append((i, j))
    return out


def precision_recall(truth, detections, cfg: EvalConfig | None = None) -> DetectionScores:
    """Greedy per-frame matching of detections against ground truth.

    ``truth`` and ``detections`` are flat sequences of records carrying a
    ``frame`` attribute.
    """
    cfg = cfg or EvalConfig()
    gt = group_by_frame(truth)
    dets = group_by_frame(detections)
    tp = fp = fn = 0
    for f in sorted(set(gt) | set(dets)):
        g = [o.box for o in gt.get(f, [])]
        d = [o.box for o in dets.get(f, [])]
        m = len(greedy_iou_matches(g, d, cfg.match_threshold_iou))
        tp += m
        fp += len(d) - m
        fn += len(g) - m
    p_undef, r_undef = tp + fp == 0, tp + fn == 0
    return DetectionScores(
        precision=1.0 if p_undef else tp / (tp + fp),
        recall=1.0 if r_undef else tp / (tp + fn),
        tp=tp, fp=fp, fn=fn,
        precision_undefined=p_undef, recall_undefined=r_undef,
    )


@dataclass
class FrameTally:
    frame: int
    matches: int = 0
    misses: int = 0
    false_positives: int = 0
    mismatches: int = 0
    truth_count: int = 0
    distances: List[float] = field(default_factory=list)


@dataclass
class MatchState:
    """Correspondence state carried from frame to frame."""

    # truth id -> track id of the last established correspondence
    last_match: Dict[int, int] = field(default_factory=dict)
    tallies: List[FrameTally] = field(default_factory=list)


@dataclass
class MotResult:
    motp: float
    mota: float
    matches: int
    misses: int
    false_positives: int
    mismatches: int
    truth_total: int
    no_matches: bool
    tallies: List[FrameTally]

    def report(self) -> Dict[str, float]:
        return {
            "MOTA": self.mota, "MOTP": self.motp, "misses": self.misses,
            "fps": self.false_positives, "mismatches": self.mismatches,
            "matches": self.matches, "gt_total": self.truth_total,
        }


def _optimal_matches(weights: np.ndarray):
    """Maximum-weight assignment ignoring zero-weight pairs."""
    if weights.size == 0:
        return []
    r, c = linear_sum_assignment(weights, maximize=True)
    return [(i, j) for i, j in zip(r, c) if weights[i, j] > 0]


def mot_frame(state: MatchState, frame: int, truth, tracks, cfg: EvalConfig) -> FrameTally:
    """Score one frame and advance ``state``."""
    thr = cfg.match_threshold_iou
    gboxes = [g.box for g in truth]
    hboxes = [h.box for h in tracks]
    M = iou_matrix(gboxes, hboxes)
    gid = [g.id for g in truth]
    hid = [h.track_id for h in tracks]
    h_index = {h: k for k, h in enumerate(hid)}
    pairs = []
    used_g, used_h = set(), set()
    # keep correspondences that are still valid
    for i, o in enumerate(gid):
        h = state.last_match.get(o)
        k = h_index.get(h) if h is not None else None
        if k is not None and k not in used_h and M[i, k] >= thr:
            pairs.append((i, k))
            used_g.add(i)
            used_h.add(k)
    free_g = [i for i in range(len(gid)) if i not in used_g]
    free_h = [k for k in range(len(hid)) if k not in used_h]
    if free_g and free_h:
        sub = M[np.ix_(free_g, free_h)]
        sub = np.where(sub >= thr, sub, 0.0)
        for a, b in _optimal_matches(sub):
            pairs.append((free_g[a], free_h[b]))
    tally = FrameTally(frame, truth_count=len(gid))
    for i, k in pairs:
        o, h = gid[i], hid[k]
        prev = state.last_match.get(o)
        if prev is not None and prev != h:
            tally.mismatches += 1
        state.last_match[o] = h
        if cfg.motp_mode == "iou":
            tally.distances.append(float(M[i, k]))
        else:
            tally.distances.append(center_distance(gboxes[i], hboxes[k]))
    tally.matches = len(pairs)
    tally.misses = len(gid) - len(pairs)
    tally.false_positives = len(hid) - len(pairs)
    state.tallies.append(tally)
    return tally


def summarize(tallies: Sequence[FrameTally]) -> MotResult:
    c = sum(t.matches for t in tallies)
    m = sum(t.misses for t in tallies)
    fp = sum(t.false_positives for t in tallies)
    mme = sum(t.mismatches for t in tallies)
    g = sum(t.truth_count for t in tallies)
    d = math.fsum(x for t in tallies for x in t.distances)
    motp = d / c if c else float("nan")
    if g:
        mota = 1.0 - (m + fp + mme) / g
    else:
        mota = 1.0 if fp == 0 else float("-inf")
    return MotResult(motp, mota, c, m, fp, mme, g, c == 0, list(tallies))


def _frame_span(records):
    frames = [r.frame for r in records]
    return (min(frames), max(frames)) if frames else None


def evaluate_mot(truth, tracks, cfg: EvalConfig | None = None,
                 n_frames: int | None = None) -> MotResult:
    """CLEAR MOT over a sequence.

    ``truth`` is a flat list of GroundTruthObject and ``tracks`` a flat list
    of TrackRecord. Frames run from 0 to ``n_frames - 1`` (by default up to
    the last ground-truth frame); track records outside that range are an
    error.
    """
    cfg = cfg or EvalConfig()
    if n_frames is None:
        span = _frame_span(truth)
        n_frames = span[1] + 1 if span else 0
    tspan = _frame_span(tracks)
    if tspan is not None and (tspan[0] < 0 or tspan[1] >= n_frames):
        raise GbmTrackError(
            f"track frames {tspan[0]}..{tspan[1]} fall outside ground-truth frames 0..{n_frames - 1}")
    gt = group_by_frame(truth)
    hy = group_by_frame(tracks)
    state = MatchState()
    for f in range(n_frames):
        mot_frame(state, f, gt.get(f, []), hy.get(f, []), cfg)
    return summarize(state.tallies)
