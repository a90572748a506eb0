"""Greedy detection-to-track assignment and track birth/death."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterator, List, Sequence, Tuple

from .gbm import MIN_HEADING_SPEED, KalmanConfig, TrackState, TrackStatus, update
from .types import BoundingBox, ConfigError, Detection, TrackRecord


@dataclass
class AssociationConfig:
    gate_distance: float = 40.0
    tendency_max_angle: float = math.pi / 2
    t_confirm: int = 2
    t_miss: int = 5
    # miss budget for tentative tracks; None means the same as t_miss
    t_miss_tentative: int | None = None
    # smoothing factor for the box size carried by a track
    size_smoothing: float = 0.3

    def __post_init__(self):
        if self.gate_distance <= 0:
            raise ConfigError("gate_distance must be positive")
        if self.t_confirm < 1 or self.t_miss < 1:
            raise ConfigError("t_confirm and t_miss must be >= 1")
        if self.t_miss_tentative is not None and self.t_miss_tentative < 0:
            raise ConfigError("t_miss_tentative must be >= 0")
        if not 0.0 < self.size_smoothing <= 1.0:
            raise ConfigError("size_smoothing must lie in (0, 1]")


def track_box(track: TrackState) -> BoundingBox:
    w, h = track.box_size
    return BoundingBox.from_center(float(track.theta[0]), float(track.theta[1]), float(w), float(h))


def motion_consistent(track: TrackState, det: Detection, cfg: AssociationConfig) -> bool:
    """Does the detection lie along the track's direction of travel?

    The displacement is measured from the track's last corrected position,
    so a track that overshoots in prediction can still claim its vehicle.
    """
    if track.speed < MIN_HEADING_SPEED:
        return True
    origin = track.prev_position if track.prev_position is not None else track.position
    cx, cy = det.box.center
    dx, dy = cx - float(origin[0]), cy - float(origin[1])
    norm = math.hypot(dx, dy)
    if norm == 0.0:
        return True
    cos = (dx * track.theta[2] + dy * track.theta[3]) / (norm * track.speed)
    return math.acos(max(-1.0, min(1.0, cos))) <= cfg.tendency_max_angle


def candidate_pairs(tracks: Sequence[TrackState], detections: Sequence[Detection],
                    cfg: AssociationConfig) -> List[Tuple[float, int, int]]:
    """All gated (distance, track_id, detection_index) triples."""
    pairs = []
    for t in tracks:
        tx, ty = float(t.theta[0]), float(t.theta[1])
        for k, d in enumerate(detections):
            cx, cy = d.box.center
            dist = math.hypot(cx - tx, cy - ty)
            if dist <= cfg.gate_distance and motion_consistent(t, d, cfg):
                pairs.append((dist, t.track_id, k))
    return pairs


def associate(tracks: Sequence[TrackState], detections: Sequence[Detection],
              cfg: AssociationConfig):
    """Greedy nearest-first matching.

    Returns ``(matches, unmatched_track_ids, unmatched_detection_indices)``
    where ``matches`` is a list of ``(track_id, detection_index)``.
    """
    pairs = sorted(candidate_pairs(tracks, detections, cfg))
    used_t, used_d = set(), set()
    matches = []
    for _dist, tid, k in pairs:
        if tid in used_t or k in used_d:
            continue
        used_t.add(tid)
        used_d.add(k)
        matches.append((tid, k))
    unmatched_tracks = [t.track_id for t in tracks if t.track_id not in used_t]
    unmatched_dets = [k for k in range(len(detections)) if k not in used_d]
    return matches, unmatched_tracks, unmatched_dets


def step_lifecycle(tracks: Sequence[TrackState], detections: Sequence[Detection], matches,
                   unmatched_tracks, unmatched_detections, cfg: AssociationConfig,
                   kcfg: KalmanConfig, ids: Iterator[int]) -> List[TrackState]:
    """Apply updates, misses and births. Dead tracks are dropped from the result."""
    by_id = {t.track_id: t for t in tracks}
    out: List[TrackState] = []
    a = cfg.size_smoothing
    for tid, k in matches:
        t = by_id[tid]
        det = detections[k]
        t = update(t, det.box.center, kcfg)
        w = (1 - a) * t.box_size[0] + a * det.box.w
        h = (1 - a) * t.box_size[1] + a * det.box.h
        hits = t.hits + 1
        status = t.status
        if status is TrackStatus.TENTATIVE and hits >= cfg.t_confirm:
            status = TrackStatus.CONFIRMED
        out.append(replace(t, hits=hits, misses=0, status=status, box_size=(w, h)))
    for tid in unmatched_tracks:
        t = by_id[tid]
        misses = t.misses + 1
        limit = cfg.t_miss
        if t.status is not TrackStatus.CONFIRMED and cfg.t_miss_tentative is not None:
            limit = cfg.t_miss_tentative
        if misses > limit:
            continue
        out.append(replace(t, misses=misses))
    for k in unmatched_detections:
        det = detections[k]
        t = kcfg.initial_state(det.box.center, next(ids), (det.box.w, det.box.h))
        if cfg.t_confirm <= 1:
            t = replace(t, status=TrackStatus.CONFIRMED)
        out.append(t)
    out.sort(key=lambda s: s.track_id)
    return out


def emit_records(frame: int, tracks: Sequence[TrackState], max_coast: int | None = None
                 ) -> List[TrackRecord]:
    """Track records for confirmed tracks; coasting ones only up to ``max_coast`` misses."""
    out = []
    for t in tracks:
        if t.status is not TrackStatus.CONFIRMED:
            continue
        if max_coast is not None and t.misses > max_coast:
            continue
        out.append(TrackRecord(frame, t.track_id, track_box(t)))
    return out

