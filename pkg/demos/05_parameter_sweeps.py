"""Sweeping the influence radius sigma_w on the crowded junction.

Writes sweep.csv and sweep.svg into the current directory through the
same functions the ``gbmtrack sweep`` and ``gbmtrack plot`` commands use.
"""
import csv

from gbmtrack.fixtures import scenario
from gbmtrack.pipeline import ScenarioData, TrackerConfig, interior_max, sweep_tracker
from gbmtrack.svg import curve_svg

data = ScenarioData.simulate(scenario("crowded"))
values = [0.5, 2.0, 8.0, 32.0, 128.0]
rows = sweep_tracker(data, "sigma_w", values, TrackerConfig.fixture())
for r in rows:
    print(f"sigma_w={r['value']:6g}  MOTA {r['MOTA']:.4f}  MOTP {r['MOTP']:.4f}")
print("MOTP peaks inside the range:", interior_max([r["MOTP"] for r in rows]))

with open("sweep.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["sigma_w", "MOTA", "MOTP"])
    w.writerows([r["value"], r["MOTA"], r["MOTP"]] for r in rows)
with open("sweep.svg", "w") as fh:
    fh.write(curve_svg(values, [r["MOTP"] for r in rows], "sigma_w", "MOTP", log_x=True))
print("wrote sweep.csv and sweep.svg")
