"""Deterministic road-junction scenarios.

Two straight roads cross at the image centre. Vehicles enter at the image
border, drive straight along their lane, queue behind a signal-controlled
stop line and leave at the opposite border. Car following uses the
Intelligent Driver Model plus a hard bumper-gap clamp, so ``min_headway`` is
never violated.

Randomness comes from numpy's PCG64 generator. The scenario stream is
seeded with ``seed`` directly; detection noise and rendering use child
streams ``SeedSequence(seed, spawn_key=...)`` so that changing the noise
model never changes the ground-truth trajectories.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .types import BoundingBox, ConfigError, Detection, GroundTruthObject, iou_matrix

HEADINGS = {"W": 0.0, "N": math.pi / 2, "E": math.pi, "S": -math.pi / 2}
AXIS = {"W": "EW", "E": "EW", "N": "NS", "S": "NS"}


def scenario_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def child_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass
class Lane:
    entry_side: str
    lane_offset: float = 0.0
    direction: float | None = None

    def __post_init__(self):
        if self.entry_side not in HEADINGS:
            raise ConfigError(f"entry_side must be one of N, S, E, W (got {self.entry_side!r})")
        if self.direction is None:
            self.direction = HEADINGS[self.entry_side]
        elif abs(math.remainder(self.direction - HEADINGS[self.entry_side], 2 * math.pi)) > 1e-9:
            raise ConfigError("lanes run straight: direction must match entry_side")


@dataclass
class LightCycle:
    green: int = 120
    red: int = 120
    phase_offset: Dict[str, int] = field(default_factory=lambda: {"EW": 0, "NS": 120})

    def is_green(self, axis: str, t: int) -> bool:
        if self.red <= 0:
            return True
        if self.green <= 0:
            return False
        return (t + self.phase_offset.get(axis, 0)) % (self.green + self.red) < self.green


@dataclass
class DetectorNoise:
    miss_rate: float = 0.1
    fp_rate: float = 0.3
    center_jitter_sigma: float = 0.7
    size_jitter_sigma: float = 0.4
    occlusion_miss_boost: float = 0.3

    def __post_init__(self):
        if not 0.0 <= self.miss_rate <= 1.0 or not 0.0 <= self.occlusion_miss_boost <= 1.0:
            raise ConfigError("miss_rate and occlusion_miss_boost must lie in [0, 1]")
        if self.fp_rate < 0 or self.center_jitter_sigma < 0 or self.size_jitter_sigma < 0:
            raise ConfigError("fp_rate and jitter sigmas must be >= 0")


@dataclass
class DriverModel:
    """Intelligent Driver Model parameters, per-frame units."""

    max_accel: float = 0.12
    comfort_decel: float = 0.25
    # strongest braking used to decide whether a red light can still be obeyed
    max_decel: float = 0.6
    jam_gap: float = 4.0
    time_headway: float = 5.0
    delta: float = 4.0


@dataclass
class ScenarioConfig:
    seed: int = 0
    frames: int = 500
    width: int = 320
    height: int = 320
    lanes: List[Lane] = field(default_factory=lambda: [
        Lane("W", 8.0), Lane("E", -8.0), Lane("N", -8.0), Lane("S", 8.0)])
    spawn_rate: float = 0.02
    speed_range: Tuple[float, float] = (2.0, 3.5)
    vehicle_size: Tuple[float, float] = (12.0, 6.0)  # (length, width)
    size_jitter: float = 1.0
    light_cycle: LightCycle = field(default_factory=LightCycle)
    min_headway: float = 3.0
    detector_noise: DetectorNoise = field(default_factory=DetectorNoise)
    junction_half_size: float = 20.0
    driver: DriverModel = field(default_factory=DriverModel)
    # cap on vehicles spawned over the whole run; None means unlimited
    max_vehicles: int | None = None

    def __post_init__(self):
        self.lanes = [l if isinstance(l, Lane) else Lane(**l) for l in self.lanes]
        if isinstance(self.light_cycle, dict):
            self.light_cycle = LightCycle(**self.light_cycle)
        if isinstance(self.detector_noise, dict):
            self.detector_noise = DetectorNoise(**self.detector_noise)
        if isinstance(self.driver, dict):
            self.driver = DriverModel(**self.driver)
        self.speed_range = tuple(self.speed_range)
        self.vehicle_size = tuple(self.vehicle_size)
        if self.frames < 0:
            raise ConfigError("frames must be >= 0")
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("image size must be positive")
        if not 0.0 <= self.spawn_rate <= 1.0:
            raise ConfigError("spawn_rate is a per-frame probability in [0, 1]")
        lo, hi = self.speed_range
        if lo < 0 or lo > hi:
            raise ConfigError("speed_range must satisfy 0 <= min <= max")
        if self.min_headway <= 0:
            raise ConfigError("min_headway must be positive")
        if min(self.vehicle_size) - self.size_jitter <= 0:
            raise ConfigError("vehicle_size minus size_jitter must stay positive")

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["speed_range"] = list(self.speed_range)
        d["vehicle_size"] = list(self.vehicle_size)
        return d


@dataclass
class FrameRecord:
    frame: int
    truth: List[GroundTruthObject]
    detections: List[Detection]


@dataclass
class _Vehicle:
    id: int
    lane: int
    s: float  # front bumper distance from the entry border
    v: float
    v0: float
    length: float
    width: float


def _lane_length(cfg: ScenarioConfig, lane: Lane) -> float:
    return float(cfg.width if lane.entry_side in "WE" else cfg.height)


def _stop_line(cfg: ScenarioConfig, lane: Lane) -> float:
    return _lane_length(cfg, lane) / 2.0 - cfg.junction_half_size


def _idm_accel(d: DriverModel, v, v0, gap, dv) -> float:
    free = 1.0 - (v / v0) ** d.delta if v0 > 0 else -1.0
    if gap is None:
        return d.max_accel * free
    s_star = d.jam_gap + max(0.0, v * d.time_headway + v * dv / (2.0 * math.sqrt(d.max_accel * d.comfort_decel)))
    gap = max(gap, 1e-3)
    return d.max_accel * (free - (s_star / gap) ** 2)


def vehicle_box(cfg: ScenarioConfig, lane: Lane, s: float, length: float, width: float) -> BoundingBox:
    mid = s - length / 2.0
    side = lane.entry_side
    if side == "W":
        return BoundingBox.from_center(mid, cfg.height / 2.0 + lane.lane_offset, length, width)
    if side == "E":
        return BoundingBox.from_center(cfg.width - mid, cfg.height / 2.0 + lane.lane_offset, length, width)
    if side == "N":
        return BoundingBox.from_center(cfg.width / 2.0 + lane.lane_offset, mid, width, length)
    return BoundingBox.from_center(cfg.width / 2.0 + lane.lane_offset, cfg.height - mid, width, length)


def _step_lane(cfg: ScenarioConfig, li: int, queue: List[_Vehicle], t: int) -> None:
    lane = cfg.lanes[li]
    drv = cfg.driver
    stop = _stop_line(cfg, lane)
    red = not cfg.light_cycle.is_green(AXIS[lane.entry_side], t)
    leader = None
    for veh in queue:  # front to back
        gap, dv = None, 0.0
        if leader is not None:
            gap = leader.s - leader.length - veh.s
            dv = veh.v - leader.v
        halting = False
        if red and veh.s <= stop:
            to_line = stop - veh.s
            if veh.v * veh.v / (2.0 * drv.max_decel) <= to_line + 1e-9:
                halting = True
                if gap is None or to_line < gap:
                    gap, dv = to_line, veh.v
        a = _idm_accel(drv, veh.v, veh.v0, gap, dv)
        v_new = max(0.0, veh.v + a)
        s_new = veh.s + v_new
        if halting and s_new > stop:
            s_new = stop
        if leader is not None:
            s_new = min(s_new, leader.s - leader.length - cfg.min_headway)
        s_new = max(s_new, veh.s)
        veh.v = s_new - veh.s if s_new != veh.s + v_new else v_new
        veh.s = s_new
        leader = veh


def _visible(cfg: ScenarioConfig, lane: Lane, veh: _Vehicle) -> bool:
    return veh.s > 0.0 and veh.s - veh.length < _lane_length(cfg, lane)


def simulate_truth(cfg: ScenarioConfig) -> List[List[GroundTruthObject]]:
    """Ground truth per frame."""
    rng = scenario_rng(cfg.seed)
    queues: List[List[_Vehicle]] = [[] for _ in cfg.lanes]
    next_id = 1
    spawned = 0
    L0, W0 = cfg.vehicle_size
    lo, hi = cfg.speed_range
    out = []
    for t in range(cfg.frames):
        for li, lane in enumerate(cfg.lanes):
            q = queues[li]
            _step_lane(cfg, li, q, t)
            while q and q[0].s - q[0].length >= _lane_length(cfg, lane):
                q.pop(0)
            # one Bernoulli draw per lane per frame keeps the stream aligned
            want = rng.random() < cfg.spawn_rate
            if not want or (cfg.max_vehicles is not None and spawned >= cfg.max_vehicles):
                continue
            v0 = float(rng.uniform(lo, hi))
            length = L0 + float(rng.uniform(-cfg.size_jitter, cfg.size_jitter))
            width = W0 + float(rng.uniform(-cfg.size_jitter, cfg.size_jitter)) * 0.5
            speed = v0
            if q:
                last = q[-1]
                room = last.s - last.length - cfg.min_headway
                if room < v0:
                    continue  # entry blocked
                if room < 4.0 * length:
                    speed = min(v0, last.v)
            q.append(_Vehicle(next_id, li, speed, speed, v0, length, width))
            next_id += 1
            spawned += 1
        frame_truth = []
        for li, lane in enumerate(cfg.lanes):
            c, s_ = math.cos(lane.direction), math.sin(lane.direction)
            for veh in queues[li]:
                if not _visible(cfg, lane, veh):
                    continue
                frame_truth.append(GroundTruthObject(
                    frame=t, id=veh.id,
                    box=vehicle_box(cfg, lane, veh.s, veh.length, veh.width),
                    velocity=(_clean(veh.v * c), _clean(veh.v * s_)),
                    heading=lane.direction,
                ))
        frame_truth.sort(key=lambda g: g.id)
        out.append(frame_truth)
    return out


def _clean(v: float) -> float:
    return 0.0 if abs(v) < 1e-12 else v


def corrupt_detections(truth: Sequence[GroundTruthObject], noise: DetectorNoise,
                       rng: np.random.Generator, frame: int | None = None,
                       image_size: Tuple[int, int] = (320, 320),
                       fp_size: Tuple[float, float] = (12.0, 6.0)) -> List[Detection]:
    """Noisy detector output for one frame of ground truth.

    Each object is dropped with probability ``miss_rate`` (plus
    ``occlusion_miss_boost`` when a box nearer the camera covers it with
    IoU > 0.3), surviving boxes get Gaussian centre and size jitter, and a
    Poisson number of uniformly placed false positives is appended. True
    detections score around +0.6, false ones around -0.4.
    """
    if frame is None:
        frame = truth[0].frame if truth else 0
    boxes = [g.box for g in truth]
    ov = iou_matrix(boxes, boxes)
    out = []
    for i, g in enumerate(truth):
        p_miss = noise.miss_rate
        bottom = g.box.y + g.box.h
        if any(ov[i, j] > 0.3 and boxes[j].y + boxes[j].h > bottom
               for j in range(len(truth)) if j != i):
            p_miss = min(1.0, p_miss + noise.occlusion_miss_boost)
        u = rng.random()
        jit = rng.normal(size=4)
        score = float(rng.normal(0.6, 0.3))
        if u < p_miss:
            continue
        cx, cy = g.box.center
        cx += noise.center_jitter_sigma * jit[0]
        cy += noise.center_jitter_sigma * jit[1]
        w = max(1.0, g.box.w + noise.size_jitter_sigma * jit[2])
        h = max(1.0, g.box.h + noise.size_jitter_sigma * jit[3])
        out.append(Detection(frame, BoundingBox.from_center(cx, cy, w, h), score))
    n_fp = int(rng.poisson(noise.fp_rate)) if noise.fp_rate > 0 else 0
    W, H = image_size
    for _ in range(n_fp):
        cx, cy = rng.uniform(0, W), rng.uniform(0, H)
        fw, fh = fp_size if rng.random() < 0.5 else fp_size[::-1]
        out.append(Detection(frame, BoundingBox.from_center(float(cx), float(cy), fw, fh),
                             float(rng.normal(-0.4, 0.3))))
    return out


def simulate(cfg: ScenarioConfig) -> List[FrameRecord]:
    truth = simulate_truth(cfg)
    rng = child_rng(cfg.seed, 1)
    L, W = cfg.vehicle_size
    return [
        FrameRecord(t, gt, corrupt_detections(gt, cfg.detector_noise, rng, frame=t,
                                              image_size=(cfg.width, cfg.height),
                                              fp_size=(L, W)))
        for t, gt in enumerate(truth)
    ]


# -- rendering ------------------------------------------------------------------

ROAD_LEVEL = 90.0
MARKING_LEVEL = 200.0


@dataclass(frozen=True)
class Pole:
    """Thin upright distractor (traffic light, lamp post) painted into a frame."""

    box: BoundingBox
    intensity: float = 200.0


def vehicle_intensity(seed: int, vid: int) -> int:
    return int(child_rng(seed, 3, vid).integers(140, 231))


def _rounded_mask(w: int, h: int, r: float) -> np.ndarray:
    if w <= 0 or h <= 0:
        return np.zeros((max(h, 0), max(w, 0)), dtype=bool)
    r = min(r, w / 2.0, h / 2.0)
    yy, xx = np.mgrid[0:h, 0:w] + 0.5
    cx = np.clip(xx, r, w - r)
    cy = np.clip(yy, r, h - r)
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r + 1e-9


def _paint(img, box: BoundingBox, value: float, mask_fn=None) -> None:
    x0, y0, x1, y1 = box.to_pixels()
    H, W = img.shape
    m = mask_fn(x1 - x0, y1 - y0) if mask_fn else np.ones((y1 - y0, x1 - x0), dtype=bool)
    cy0, cy1 = max(0, y0), min(H, y1)
    cx0, cx1 = max(0, x0), min(W, x1)
    if cy0 >= cy1 or cx0 >= cx1:
        return
    sub = m[cy0 - y0:cy1 - y0, cx0 - x0:cx1 - x0]
    region = img[cy0:cy1, cx0:cx1]
    region[sub] = value


def render_frame(truth: Sequence[GroundTruthObject], cfg: ScenarioConfig, frame: int = 0,
                 poles: Sequence[Pole] = (), noise_amplitude: float = 6.0,
                 corner_radius: float = 2.0) -> np.ndarray:
    """Grayscale top-down frame, float array in [0, 255].

    Road at ~90 with textured noise, dashed centre lines at 200 and each
    vehicle as a rounded rectangle at an id-seeded level in [140, 230].
    """
    rng = child_rng(cfg.seed, 2, frame)
    H, W = cfg.height, cfg.width
    img = ROAD_LEVEL + rng.uniform(-noise_amplitude, noise_amplitude, size=(H, W))
    cx, cy = W // 2, H // 2
    j = int(cfg.junction_half_size)
    dash = (np.arange(max(W, H)) // 6) % 2 == 0
    xs = np.arange(W)
    ys = np.arange(H)
    row = dash[:W] & (np.abs(xs + 0.5 - W / 2.0) > j)
    col = dash[:H] & (np.abs(ys + 0.5 - H / 2.0) > j)
    img[cy, row] = MARKING_LEVEL
    img[col, cx] = MARKING_LEVEL
    for p in poles:
        _paint(img, p.box, p.intensity)
    for g in sorted(truth, key=lambda g: (g.box.y + g.box.h, g.id)):
        level = vehicle_intensity(cfg.seed, g.id)
        _paint(img, g.box, level, lambda w, h: _rounded_mask(w, h, corner_radius))
    return np.clip(img, 0, 255)
