"""CLEAR MOT scoring on a hand-built example.

One vehicle for ten frames; the tracker switches ids at frame 6 and
reports a stray box at frame 8.
"""
from gbmtrack.metrics import evaluate_mot
from gbmtrack.types import BoundingBox, GroundTruthObject, TrackRecord

truth = [GroundTruthObject(f, 1, BoundingBox(3.0 * f, 10, 12, 6)) for f in range(10)]
tracks = [TrackRecord(f, 1 if f < 6 else 2, BoundingBox(3.0 * f + 1, 10, 12, 6)) for f in range(10)]
tracks.append(TrackRecord(8, 9, BoundingBox(200, 200, 12, 6)))

r = evaluate_mot(truth, tracks)
for t in r.tallies:
    print(f"frame {t.frame}: matches {t.matches} misses {t.misses} fp {t.false_positives} "
          f"mme {t.mismatches}")
print(f"\nMOTA = 1 - (misses + fp + mme) / truth = 1 - ({r.misses} + {r.false_positives} + "
      f"{r.mismatches}) / {r.truth_total} = {r.mota:.3f}")
print(f"MOTP (mean IoU over matches) = {r.motp:.3f}")
