"""Tracking a busy junction with and without the group behaviour model.

Same detections, same association and lifecycle rules; the only switch is
whether nearby same-direction vehicles damp each other's predicted motion.
"""
from gbmtrack.fixtures import scenario
from gbmtrack.pipeline import ScenarioData, TrackerConfig, run_scenario

for name in ("light", "medium", "heavy"):
    data = ScenarioData.simulate(scenario(name))
    print(f"{name}: {len({g.id for g in data.truth})} vehicles, {len(data.detections)} detections")
    for label, cfg in (("GBM     ", TrackerConfig.fixture()),
                       ("Kalman  ", TrackerConfig.fixture(use_gbm=False))):
        r = run_scenario(data, cfg)
        print(f"  {label} MOTA {r.mota:.3f}  MOTP {r.motp:.3f}  "
              f"misses {r.misses:4d}  fp {r.false_positives:4d}  mme {r.mismatches:3d}")
