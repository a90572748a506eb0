"""Frame-by-frame tracking loop: force, prediction, association, lifecycle."""

from __future__ import annotations

import itertools
from typing import Dict, List, Sequence

import numpy as np

from .association import AssociationConfig, associate, emit_records, step_lifecycle, track_box
from .gbm import GbmConfig, KalmanConfig, TrackState, heading_of, predict, traffic_force
from .types import Detection, TrackRecord


class GbmTracker:
    """Multi-vehicle tracker with group-behaviour constrained prediction.

    With ``use_gbm=False`` the traffic force is forced to zero and the
    tracker is a plain constant-velocity Kalman tracker with the same
    association and lifecycle rules.
    """

    def __init__(self, kalman: KalmanConfig | None = None, gbm: GbmConfig | None = None,
                 assoc: AssociationConfig | None = None, use_gbm: bool = True,
                 max_coast: int | None = None, image_size=None):
        self.kalman = kalman or KalmanConfig()
        self.gbm = gbm or GbmConfig()
        self.assoc = assoc or AssociationConfig()
        self.use_gbm = use_gbm
        self.max_coast = max_coast
        # (width, height); tracks predicted entirely outside are retired
        self.image_size = image_size
        self.tracks: List[TrackState] = []
        self._ids = itertools.count(1)
        # undamped predicted position of each track at the previous frame
        self._prev_pred: Dict[int, np.ndarray] = {}
        self.last_forces: Dict[int, float] = {}
        self._headings: Dict[int, float] = {}

    def _forces(self) -> Dict[int, float]:
        if not self.use_gbm or not self.tracks:
            return {t.track_id: 0.0 for t in self.tracks}
        F = self.kalman.F
        preds, prevs = [], []
        for t in self.tracks:
            p = F @ t.theta
            head = heading_of(p[2:])
            if head is not None:
                self._headings[t.track_id] = head
            elif self.gbm.remember_heading:
                head = self._headings.get(t.track_id)
            preds.append((p[:2], p[2:], head))
            prevs.append(self._prev_pred.get(t.track_id, p[:2]))
        forces = {t.track_id: traffic_force(i, preds, prevs, self.gbm)
                  for i, t in enumerate(self.tracks)}
        self._prev_pred = {t.track_id: preds[i][0] for i, t in enumerate(self.tracks)}
        return forces

    def predict_all(self) -> List[TrackState]:
        forces = self._forces()
        self.last_forces = forces
        return [predict(t, forces[t.track_id], self.kalman, self.gbm) for t in self.tracks]

    def _inside(self, t: TrackState) -> bool:
        if self.image_size is None:
            return True
        W, H = self.image_size
        b = track_box(t)
        return b.x + b.w > 0 and b.y + b.h > 0 and b.x < W and b.y < H

    def step(self, frame: int, detections: Sequence[Detection]) -> List[TrackRecord]:
        predicted = [t for t in self.predict_all() if self._inside(t)]
        matches, lost, new = associate(predicted, detections, self.assoc)
        self.tracks = step_lifecycle(predicted, detections, matches, lost, new,
                                     self.assoc, self.kalman, self._ids)
        alive = {t.track_id for t in self.tracks}
        self._prev_pred = {k: v for k, v in self._prev_pred.items() if k in alive}
        self._headings = {k: v for k, v in self._headings.items() if k in alive}
        return emit_records(frame, self.tracks, self.max_coast)


def run_tracker(detections_by_frame, n_frames: int, **kwargs) -> List[TrackRecord]:
    """Track a whole sequence. ``detections_by_frame`` maps frame -> detections."""
    tracker = GbmTracker(**kwargs)
    out: List[TrackRecord] = []
    for f in range(n_frames):
        out.extend(tracker.step(f, detections_by_frame.get(f, [])))
    return out
