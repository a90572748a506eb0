"""End-to-end orchestration: detect, refine, track, evaluate, sweep.

Every stage reads and writes the shared CSV formats, so an external
detector can be spliced in at any point.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Dict, List, Mapping, Sequence

import numpy as np

from . import fixtures
from .association import AssociationConfig
from .gbm import GbmConfig, KalmanConfig
from .io import group_by_frame, read_json, resolve
from .metrics import EvalConfig, MotResult, evaluate_mot, precision_recall
from .parts import DEFAULT_ETA, DetectorConfig, PartModel, detect_frame
from .segment import SegmentationConfig, ShapeTemplate, refine_detections
from .simulator import ScenarioConfig, render_frame, simulate, simulate_truth
from .tracker import run_tracker
from .types import ConfigError, Detection, GroundTruthObject, TrackRecord

_GBM_KEYS = ("sigma_d", "sigma_w", "kappa", "lambda_min", "front_only", "remember_heading")
_ASSOC_KEYS = ("gate_distance", "t_confirm", "t_miss", "t_miss_tentative", "size_smoothing")


@dataclass
class TrackerConfig:
    """Flat, JSON-friendly view of every tracker knob.

    Angles are given in degrees here and converted on construction of the
    underlying configs.
    """

    sigma_d: float = 8.0
    sigma_w: float = 8.0
    kappa: float = 0.3
    lambda_min: float = 0.1
    heading_tolerance_deg: float = 30.0
    front_only: bool = True
    remember_heading: bool = False
    q_scale: float = 0.05
    r_scale: float = 4.0
    gate_distance: float = 40.0
    tendency_max_angle_deg: float = 90.0
    t_confirm: int = 2
    t_miss: int = 5
    t_miss_tentative: int | None = None
    size_smoothing: float = 0.3
    use_gbm: bool = True
    max_coast: int | None = None

    def __post_init__(self):
        # building the parts validates them
        self.gbm()
        self.assoc()
        self.kalman()

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrackerConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown tracker keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def fixture(cls, **overrides) -> "TrackerConfig":
        """Settings used for every synthetic-scenario comparison."""
        return cls(**{**fixtures.FIXTURE_TRACKER, **overrides})

    def to_dict(self) -> dict:
        return asdict(self)

    def gbm(self) -> GbmConfig:
        kw = {k: getattr(self, k) for k in _GBM_KEYS}
        return GbmConfig(heading_tolerance=math.radians(self.heading_tolerance_deg), **kw)

    def assoc(self) -> AssociationConfig:
        kw = {k: getattr(self, k) for k in _ASSOC_KEYS}
        return AssociationConfig(tendency_max_angle=math.radians(self.tendency_max_angle_deg), **kw)

    def kalman(self) -> KalmanConfig:
        return KalmanConfig.from_scales(self.q_scale, self.r_scale)


def track(detections: Sequence[Detection], n_frames: int, cfg: TrackerConfig,
          image_size=None) -> List[TrackRecord]:
    by_frame = group_by_frame(detections)
    return run_tracker(by_frame, n_frames, kalman=cfg.kalman(), gbm=cfg.gbm(),
                       assoc=cfg.assoc(), use_gbm=cfg.use_gbm, max_coast=cfg.max_coast,
                       image_size=image_size)


def passthrough_tracks(detections: Sequence[Detection]) -> List[TrackRecord]:
    """Every detection as its own one-frame track, ids in input order."""
    return [TrackRecord(d.frame, k + 1, d.box) for k, d in enumerate(detections)]


def detect_frames(models: Mapping[int, PartModel], cfg: DetectorConfig) -> List[Detection]:
    out: List[Detection] = []
    for f in sorted(models):
        out.extend(detect_frame(models[f], cfg, f))
    return out


def refine_frames(frames: Mapping[int, np.ndarray], detections: Sequence[Detection],
                  templates: Mapping[str, ShapeTemplate], cfg: SegmentationConfig) -> List[Detection]:
    """Refine per frame; frames without an image pass through unchanged."""
    out: List[Detection] = []
    by_frame = group_by_frame(detections)
    for f in sorted(by_frame):
        if f in frames:
            out.extend(refine_detections(frames[f], by_frame[f], templates, cfg))
        else:
            out.extend(by_frame[f])
    return out


# -- configuration file -------------------------------------------------------


def _section(d: Mapping, key: str, cls):
    sub = d.get(key, {})
    if not isinstance(sub, Mapping):
        raise ConfigError(f"'{key}' must be an object")
    unknown = set(sub) - {f.name for f in fields(cls)}
    if unknown:
        raise ConfigError(f"unknown {key} keys: {sorted(unknown)}")
    sub = dict(sub)
    for k in ("box_size", "fg_fraction_bounds"):
        if k in sub:
            sub[k] = tuple(sub[k])
    try:
        return cls(**sub)
    except TypeError as exc:
        raise ConfigError(f"bad {key} section: {exc}") from None


@dataclass
class PipelineConfig:
    """Everything a ``pipeline`` run needs besides the input files."""

    scenario: ScenarioConfig | None = None
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    use_segmenter: bool = True
    # input paths, relative to the config file
    detections: str | None = None
    truth: str | None = None
    frames_dir: str | None = None
    templates: str | None = None
    models_dir: str | None = None

    @classmethod
    def from_dict(cls, d: Mapping, base: str | None = None) -> "PipelineConfig":
        known = {"scenario", "fixture", "detector", "segmentation", "tracker", "evaluation",
                 "use_segmenter", "use_gbm", "detections", "truth", "frames_dir", "templates",
                 "models_dir", "sweep"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        scen = None
        if "fixture" in d:
            scen = fixtures.scenario(d["fixture"])
        if "scenario" in d:
            sd = d["scenario"]
            if not isinstance(sd, Mapping):
                raise ConfigError("'scenario' must be an object")
            merged = {**(scen.to_dict() if scen else {}), **sd}
            try:
                scen = ScenarioConfig.from_dict(merged)
            except TypeError as exc:
                raise ConfigError(f"bad scenario section: {exc}") from None
        tr = d.get("tracker", {})
        if not isinstance(tr, Mapping):
            raise ConfigError("'tracker' must be an object")
        tr = dict(tr)
        if "use_gbm" in d:
            tr["use_gbm"] = bool(d["use_gbm"])
        paths = {}
        for k in ("detections", "truth", "frames_dir", "templates", "models_dir"):
            if d.get(k) is not None:
                paths[k] = resolve(base, d[k]) if base else d[k]
        return cls(
            scenario=scen,
            detector=_section(d, "detector", DetectorConfig),
            segmentation=_section(d, "segmentation", SegmentationConfig),
            tracker=TrackerConfig.from_dict(tr),
            evaluation=_section(d, "evaluation", EvalConfig),
            use_segmenter=bool(d.get("use_segmenter", True)),
            **paths,
        )

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        d = read_json(path)
        if not isinstance(d, Mapping):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(d, base=path)


# -- in-memory runs over a simulated scenario ---------------------------------


@dataclass
class ScenarioData:
    cfg: ScenarioConfig
    truth: List[GroundTruthObject]
    detections: List[Detection]

    @classmethod
    def simulate(cls, cfg: ScenarioConfig) -> "ScenarioData":
        recs = simulate(cfg)
        return cls(cfg, [g for r in recs for g in r.truth], [d for r in recs for d in r.detections])

    def frames(self) -> Dict[int, np.ndarray]:
        by_frame = group_by_frame(self.truth, self.cfg.frames)
        return {f: render_frame(by_frame[f], self.cfg, f) for f in range(self.cfg.frames)}


def run_scenario(data: ScenarioData, tcfg: TrackerConfig,
                 ecfg: EvalConfig | None = None) -> MotResult:
    """Track the simulated detections and score against the simulated truth."""
    tracks = track(data.detections, data.cfg.frames, tcfg, (data.cfg.width, data.cfg.height))
    return evaluate_mot(data.truth, tracks, ecfg, n_frames=data.cfg.frames)


# -- sweeps -------------------------------------------------------------------

TRACKER_PARAMS = tuple(f.name for f in fields(TrackerConfig) if f.name not in ("use_gbm", "max_coast",
                                                                                 "front_only",
                                                                                 "remember_heading"))
SWEEP_PARAMS = ("eta",) + TRACKER_PARAMS
_INT_PARAMS = ("t_confirm", "t_miss", "t_miss_tentative")
MOT_COLUMNS = ("MOTA", "MOTP", "misses", "fps", "mismatches", "matches", "gt_total")
DET_COLUMNS = ("precision", "recall", "tp", "fp", "fn")


def parse_values(values: str | None = None, span: str | None = None) -> List[float]:
    """Sweep values from ``"a,b,c"`` or an inclusive ``"start:stop:step"`` range."""
    if values:
        try:
            out = [float(v) for v in values.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"bad sweep values '{values}'") from None
    elif span:
        try:
            start, stop, step = (float(v) for v in span.split(":"))
        except ValueError:
            raise ConfigError(f"range must be start:stop:step, got '{span}'") from None
        if step == 0 or (stop - start) * step < 0:
            raise ConfigError(f"range '{span}' never reaches its stop value")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        # rounding keeps printed values free of accumulated float error
        out = [round(start + k * step, 10) for k in range(n)]
    else:
        out = []
    if not out:
        raise ConfigError("sweep range is empty")
    return out


def sweep_tracker(data: ScenarioData, param: str, values: Sequence[float],
                  base: TrackerConfig, ecfg: EvalConfig | None = None) -> List[dict]:
    if param not in TRACKER_PARAMS:
        raise ConfigError(f"cannot sweep '{param}'; choose from {', '.join(SWEEP_PARAMS)}")
    rows = []
    for v in values:
        cast = int(v) if param in _INT_PARAMS else float(v)
        res = run_scenario(data, replace(base, **{param: cast}), ecfg)
        rows.append({"value": v, **res.report()})
    return rows


def eta_models(cfg: ScenarioConfig) -> Dict[int, PartModel]:
    truth = simulate_truth(cfg)
    return {f: fixtures.response_model(gt, (cfg.width, cfg.height), cfg.seed, f)
            for f, gt in enumerate(truth)}


def sweep_eta(models: Mapping[int, PartModel], truth: Sequence[GroundTruthObject],
              values: Sequence[float], base: DetectorConfig,
              ecfg: EvalConfig | None = None) -> List[dict]:
    rows = []
    for v in values:
        dets = detect_frames(models, replace(base, eta=float(v)))
        s = precision_recall(truth, dets, ecfg)
        rows.append({"value": v, "precision": s.precision, "recall": s.recall,
                     "tp": s.tp, "fp": s.fp, "fn": s.fn})
    return rows


def interior_max(values: Sequence[float]) -> bool:
    """Is the (first) maximum strictly inside the sequence?"""
    k = int(np.argmax(values))
    return 0 < k < len(values) - 1


def monotonicity_violations(values: Sequence[float], increasing: bool = True) -> int:
    s = 1 if increasing else -1
    return sum(1 for a, b in zip(values, values[1:]) if s * (b - a) < 0)


__all__ = [
    "DEFAULT_ETA", "PipelineConfig", "ScenarioData", "TrackerConfig", "detect_frames",
    "eta_models", "interior_max", "monotonicity_violations", "parse_values", "passthrough_tracks",
    "refine_frames", "run_scenario", "sweep_eta", "sweep_tracker", "track",
]
