"""Multi-vehicle detection and tracking with a group-behaviour motion constraint.

Stages: part-based detection scoring (:mod:`.parts`), graph-cut shape
refinement (:mod:`.segment`), traffic-force constrained Kalman prediction
(:mod:`.gbm`), greedy gated association (:mod:`.association`), a synthetic
junction simulator (:mod:`.simulator`) and CLEAR MOT scoring (:mod:`.metrics`).
"""

from .association import AssociationConfig, associate
from .gbm import GbmConfig, KalmanConfig, TrackState, predict, traffic_force, update
from .metrics import EvalConfig, evaluate_mot, precision_recall
from .parts import DEFAULT_ETA, DetectorConfig, PartModel, detect_frame, score_hypothesis
from .pipeline import PipelineConfig, TrackerConfig
from .segment import SegmentationConfig, ShapeTemplate, refine_detections, segment
from .simulator import ScenarioConfig, simulate
from .tracker import GbmTracker, run_tracker
from .types import (BoundingBox, ConfigError, DataFormatError, Detection, GbmTrackError,
                    GroundTruthObject, TrackRecord)

__version__ = "0.1.0"
