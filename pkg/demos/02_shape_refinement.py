"""Shape-prior graph cut as a false-positive filter.

A rendered frame holds one vehicle and one pole. Both get a vehicle-sized
detection; the cut inside each window is compared with the template mask.
"""
from gbmtrack.fixtures import POLE_TEMPLATE, pole_frame
from gbmtrack.segment import SegmentationConfig, refine_detections

img, dets = pole_frame(0)
kept, windows = refine_detections(img, dets, POLE_TEMPLATE, SegmentationConfig(),
                                  return_windows=True)
for name, det, win in zip(("vehicle", "pole"), dets, windows):
    verdict = "kept" if det in kept else "rejected"
    print(f"{name:8s} box={det.box} overlap={win.overlap:.2f} "
          f"foreground={win.fg_fraction:.2f} -> {verdict}")

print("\nvehicle labelling (# = object):")
for row in windows[0].labels:
    print("  " + "".join("#" if v else "." for v in row))
