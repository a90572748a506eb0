"""Named synthetic scenarios and tracker settings used by demos, sweeps and tests.

The scenarios share one geometry: a 320 x 320 four-arm junction with small
(10 x 5 px) vehicles, so that neighbouring vehicles in a queue sit within a
couple of force radii of each other.
"""

from __future__ import annotations

from typing import Dict, List, Tuple

import numpy as np

from .parts import DetectorConfig, PartModel
from .segment import ShapeTemplate, rectangle_template
from .simulator import (DetectorNoise, DriverModel, Lane, LightCycle, Pole, ScenarioConfig,
                        child_rng, render_frame)
from .types import BoundingBox, ConfigError, Detection, GroundTruthObject

# traffic density presets: (seed, spawn_rate)
DENSITY = {"light": (1, 0.01), "medium": (2, 0.02), "heavy": (3, 0.04)}

# tracker settings shared by every fixture comparison
FIXTURE_TRACKER = {
    "q_scale": 0.02,
    "r_scale": 1.0,
    "gate_distance": 15.0,
}


def junction_scenario(seed: int, spawn_rate: float, frames: int = 500, **overrides) -> ScenarioConfig:
    base = dict(
        seed=seed, frames=frames, spawn_rate=spawn_rate,
        vehicle_size=(10.0, 5.0), size_jitter=1.0,
        lanes=[Lane("W", 6.0), Lane("E", -6.0), Lane("N", -6.0), Lane("S", 6.0)],
        min_headway=2.0, speed_range=(1.5, 3.0),
        light_cycle=LightCycle(100, 100, {"EW": 0, "NS": 100}),
        detector_noise=DetectorNoise(0.1, 0.3, 0.5, 0.3, 0.3),
        driver=DriverModel(jam_gap=3.0),
    )
    base.update(overrides)
    return ScenarioConfig(**base)


def scenario(name: str) -> ScenarioConfig:
    """``light``, ``medium``, ``heavy``, ``crowded`` or ``eta``."""
    if name in DENSITY:
        seed, rate = DENSITY[name]
        return junction_scenario(seed, rate)
    if name == "crowded":
        return junction_scenario(42, 0.05, max_vehicles=20)
    if name == "eta":
        # horizontal traffic only, so one box shape fits every vehicle
        return junction_scenario(7, 0.03, frames=200, lanes=[Lane("W", 6.0), Lane("E", -6.0)])
    raise ConfigError(f"unknown fixture scenario '{name}'")


# -- synthetic part responses -------------------------------------------------

ETA_DETECTOR = DetectorConfig(box_size=(10, 5))


def _bump(grid: np.ndarray, cx: float, cy: float, peak: float, width: float = 1.0) -> None:
    H, W = grid.shape
    r = int(np.ceil(6 * width))
    x0, x1 = max(0, int(cx) - r), min(W, int(cx) + r + 1)
    y0, y1 = max(0, int(cy) - r), min(H, int(cy) + r + 1)
    if x0 >= x1 or y0 >= y1:
        return
    yy, xx = np.mgrid[y0:y1, x0:x1] + 0.5
    g = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * width ** 2))
    sub = grid[y0:y1, x0:x1]
    np.maximum(sub, sub + (peak - sub) * g, out=sub)


def response_model(truth: List[GroundTruthObject], size: Tuple[int, int], seed: int,
                   frame: int, false_rate: float = 3.0) -> PartModel:
    """Root plus one part response over a frame, peaked at vehicles and clutter.

    Each vehicle gets a root peak drawn uniformly from [-1.1, 0.2], so a
    threshold sweep through [-1.0, -0.5] keeps admitting real vehicles.
    Clutter peaks are Poisson(``false_rate``) per frame in [-1.1, -0.4].
    """
    W, H = size
    rng = child_rng(seed, 4, frame)
    root = -1.5 + 0.05 * rng.standard_normal((H, W))
    part = -0.2 + 0.02 * rng.standard_normal((H, W))
    for g in sorted(truth, key=lambda g: g.id):
        cx, cy = g.box.center
        _bump(root, cx, cy, float(rng.uniform(-1.1, 0.2)))
    for _ in range(int(rng.poisson(false_rate))):
        _bump(root, float(rng.uniform(0, W)), float(rng.uniform(0, H)),
              float(rng.uniform(-1.1, -0.4)))
    return PartModel(root, [part], [(2, 0)], [(0.05, 0.0, 0.05, 0.0)],
                     search_radius=1, bias=0.2, part_ids=["front"])


# -- distractor rejection -----------------------------------------------------

POLE_TEMPLATE = {"0": rectangle_template(12, 6, corner=2)}


def pole_frame(replicate: int, noise_amplitude: float = 12.0):
    """One vehicle and one thin pole, each covered by a vehicle-sized detection.

    Returns ``(image, detections)``; the vehicle detection comes first.
    """
    cfg = ScenarioConfig(seed=1000 + replicate, width=64, height=48)
    veh = GroundTruthObject(0, 1, BoundingBox(8.0, 20.0, 12.0, 6.0))
    pole = Pole(BoundingBox(44.0, 14.0, 2.0, 18.0), 200.0)
    img = render_frame([veh], cfg, 0, poles=[pole], noise_amplitude=noise_amplitude)
    dets = [Detection(0, veh.box, 0.5), Detection(0, BoundingBox(39.0, 20.0, 12.0, 6.0), 0.1)]
    return img, dets


def default_templates() -> Dict[str, ShapeTemplate]:
    return dict(POLE_TEMPLATE)
