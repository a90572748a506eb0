"""Shared geometry and record types.

Pixel convention: origin top-left, x to the right, y downward. A box covers
the half-open region [x, x + w) x [y, y + h). Coordinates are real-valued;
rounding only happens when a box is rasterized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

# Grayscale images, response grids, masks and distance fields are plain
# 2-D numpy arrays indexed [row, col] == [y, x].
ImageGrid = np.ndarray


class GbmTrackError(Exception):
    """Base class for package errors."""


class DataFormatError(GbmTrackError):
    """Raised when an input file cannot be parsed."""


class ConfigError(GbmTrackError):
    """Raised for invalid configuration values."""


def round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"box {name} must be finite")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box size must be positive, got {self.w}x{self.h}")

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BoundingBox":
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    @property
    def center(self) -> Tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    def to_pixels(self) -> Tuple[int, int, int, int]:
        """Integer (x0, y0, x1, y1) covering the box, x1/y1 exclusive."""
        x0 = round_half_up(self.x)
        y0 = round_half_up(self.y)
        return x0, y0, round_half_up(self.x + self.w), round_half_up(self.y + self.h)


@dataclass(frozen=True)
class Detection:
    frame: int
    box: BoundingBox
    score: float
    # Id of the strongest part in the detector; selects the shape template.
    part_id: str = "0"

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError("detection score must be finite")


@dataclass(frozen=True)
class GroundTruthObject:
    frame: int
    id: int
    box: BoundingBox
    velocity: Tuple[float, float] = (0.0, 0.0)
    heading: float = 0.0


@dataclass(frozen=True)
class TrackRecord:
    frame: int
    track_id: int
    box: BoundingBox


def iou(a: BoundingBox, b: BoundingBox) -> float:
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    return min(1.0, inter / union)


def iou_matrix(a, b) -> np.ndarray:
    """Pairwise IoU between two box sequences, shape (len(a), len(b))."""
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    A = np.array([[q.x, q.y, q.x + q.w, q.y + q.h] for q in a])
    B = np.array([[q.x, q.y, q.x + q.w, q.y + q.h] for q in b])
    ix = np.minimum(A[:, None, 2], B[None, :, 2]) - np.maximum(A[:, None, 0], B[None, :, 0])
    iy = np.minimum(A[:, None, 3], B[None, :, 3]) - np.maximum(A[:, None, 1], B[None, :, 1])
    inter = np.clip(ix, 0, None) * np.clip(iy, 0, None)
    area_a = (A[:, 2] - A[:, 0]) * (A[:, 3] - A[:, 1])
    area_b = (B[:, 2] - B[:, 0]) * (B[:, 3] - B[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    return np.minimum(inter / union, 1.0)


def center_distance(a: BoundingBox, b: BoundingBox) -> float:
    ax, ay = a.center
    bx, by = b.center
    return math.hypot(ax - bx, ay - by)
