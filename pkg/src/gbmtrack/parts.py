"""Part-based hypothesis scoring over precomputed filter-response grids.

A hypothesis rooted at ``(x, y)`` scores the root response there, plus, for
each part, the best response near its anchor minus a quadratic deformation
cost, plus a bias. Feature extraction and model training happen elsewhere;
this module only combines response grids.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from .io import read_json, read_pgm, resolve, write_json, write_pgm
from .types import BoundingBox, ConfigError, DataFormatError, Detection, iou

# Default acceptance threshold. Far below the usual -0.5 so that the detector
# over-generates candidates and leaves pruning to the shape segmenter.
DEFAULT_ETA = -0.78


@dataclass
class PartModel:
    root_response: np.ndarray
    part_responses: List[np.ndarray] = field(default_factory=list)
    anchors: List[Tuple[int, int]] = field(default_factory=list)
    deform_coeffs: List[Tuple[float, float, float, float]] = field(default_factory=list)
    search_radius: int = 1
    bias: float = 0.0
    part_ids: List[str] | None = None

    def __post_init__(self):
        self.root_response = np.asarray(self.root_response, dtype=float)
        self.part_responses = [np.asarray(r, dtype=float) for r in self.part_responses]
        n = len(self.part_responses)
        if len(self.anchors) != n or len(self.deform_coeffs) != n:
            raise ConfigError("part responses, anchors and deform_coeffs must have equal length")
        for r in self.part_responses:
            if r.shape != self.root_response.shape:
                raise ConfigError("all response grids must share one shape")
        for c in self.deform_coeffs:
            if len(c) != 4 or c[0] < 0 or c[2] < 0:
                raise ConfigError(f"deformation coefficients need a1, a3 >= 0, got {c}")
        if self.search_radius < 0:
            raise ConfigError("search_radius must be >= 0")
        if self.part_ids is None:
            self.part_ids = [str(i + 1) for i in range(n)]

    @property
    def n_parts(self) -> int:
        return len(self.part_responses)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.root_response.shape


@dataclass
class DetectorConfig:
    eta: float = DEFAULT_ETA
    nms_iou: float = 0.5
    box_size: Tuple[float, float] = (24.0, 12.0)

    def __post_init__(self):
        if not 0.0 <= self.nms_iou <= 1.0:
            raise ConfigError("nms_iou must lie in [0, 1]")
        if self.box_size[0] <= 0 or self.box_size[1] <= 0:
            raise ConfigError("box_size must be positive")


def deformation_cost(coeffs, displacement) -> float:
    a1, a2, a3, a4 = coeffs
    dx, dy = displacement
    return max(0.0, a1 * dx * dx + a2 * dx + a3 * dy * dy + a4 * dy)


def _best_placement(model: PartModel, i: int, x: int, y: int) -> Tuple[float, Tuple[int, int] | None]:
    resp = model.part_responses[i]
    h, w = resp.shape
    ax, ay = model.anchors[i]
    r = model.search_radius
    best, where = None, None
    for dy in range(-r, r + 1):
        py = y + ay + dy
        if py < 0 or py >= h:
            continue
        for dx in range(-r, r + 1):
            px = x + ax + dx
            if px < 0 or px >= w:
                continue
            v = resp[py, px] - deformation_cost(model.deform_coeffs[i], (dx, dy))
            if best is None or v > best:
                best, where = v, (px, py)
    return (0.0 if best is None else float(best)), where


def score_hypothesis(model: PartModel, root_loc) -> float:
    x, y = int(root_loc[0]), int(root_loc[1])
    h, w = model.shape
    if not (0 <= x < w and 0 <= y < h):
        raise ValueError("location outside response grid")
    total = float(model.root_response[y, x])
    for i in range(model.n_parts):
        total += _best_placement(model, i, x, y)[0]
    return total + model.bias


def score_map(model: PartModel) -> np.ndarray:
    """Hypothesis score at every root location (same result as score_hypothesis)."""
    h, w = model.shape
    total = model.root_response.copy()
    r = model.search_radius
    for i in range(model.n_parts):
        resp = model.part_responses[i]
        ax, ay = model.anchors[i]
        best = np.full((h, w), -np.inf)
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                # part pixel for root (x, y) is (x + ax + dx, y + ay + dy)
                ox, oy = ax + dx, ay + dy
                shifted = np.full((h, w), -np.inf)
                ys = slice(max(0, -oy), min(h, h - oy))
                xs = slice(max(0, -ox), min(w, w - ox))
                ysrc = slice(ys.start + oy, ys.stop + oy)
                xsrc = slice(xs.start + ox, xs.stop + ox)
                if ys.start < ys.stop and xs.start < xs.stop:
                    shifted[ys, xs] = resp[ysrc, xsrc]
                cand = shifted - deformation_cost(model.deform_coeffs[i], (dx, dy))
                np.maximum(best, cand, out=best)
        best[np.isneginf(best)] = 0.0
        total += best
    return total + model.bias


def strongest_part(model: PartModel, root_loc) -> str:
    """Id of the part with the largest placed response at this root (``"0"`` if none)."""
    x, y = int(root_loc[0]), int(root_loc[1])
    best, best_id = None, "0"
    for i in range(model.n_parts):
        v, where = _best_placement(model, i, x, y)
        if where is not None and (best is None or v > best):
            best, best_id = v, model.part_ids[i]
    return best_id


def nms(boxes: Sequence[BoundingBox], scores: Sequence[float], threshold: float) -> List[int]:
    """Greedy non-maximum suppression. Returns kept indices, best score first."""
    order = sorted(range(len(scores)), key=lambda k: (-scores[k], k))
    keep: List[int] = []
    for k in order:
        if all(iou(boxes[k], boxes[j]) <= threshold for j in keep):
            keep.append(k)
    return keep


def detect_frame(model: PartModel, config: DetectorConfig, frame: int = 0) -> List[Detection]:
    scores = score_map(model)
    ys, xs = np.nonzero(scores > config.eta)
    if len(xs) == 0:
        return []
    bw, bh = config.box_size
    # candidates are pixel centres
    boxes = [BoundingBox.from_center(x + 0.5, y + 0.5, bw, bh) for x, y in zip(xs, ys)]
    vals = [float(scores[y, x]) for x, y in zip(xs, ys)]
    out = []
    for k in nms(boxes, vals, config.nms_iou):
        loc = (int(xs[k]), int(ys[k]))
        out.append(Detection(frame, boxes[k], vals[k], strongest_part(model, loc)))
    return out


# -- JSON descriptor --------------------------------------------------------


def _load_grid(entry, base) -> np.ndarray:
    if isinstance(entry, str):
        entry = {"path": entry}
    path = entry.get("path") or entry.get("response_path")
    if path is None:
        raise DataFormatError("response entry needs a path")
    grid = read_pgm(resolve(base, path))
    return float(entry.get("offset", 0.0)) + float(entry.get("scale", 1.0)) * grid


def load_part_model(path) -> PartModel:
    """Load a model descriptor.

    Schema::

        {"root": {"path": "root.pgm", "scale": 0.01, "offset": -1.5},
         "parts": [{"anchor": [dx, dy], "coeffs": [a1, a2, a3, a4],
                    "response_path": "p1.pgm", "scale": ..., "offset": ...,
                    "id": "front"}],
         "bias": 0.0, "search_radius": 2}

    PGM pixels map to responses as ``offset + scale * pixel``.
    """
    desc = read_json(path)
    try:
        root = _load_grid(desc["root"], path)
        parts = desc.get("parts", [])
        return PartModel(
            root_response=root,
            part_responses=[_load_grid(p, path) for p in parts],
            anchors=[tuple(int(v) for v in p["anchor"]) for p in parts],
            deform_coeffs=[tuple(float(v) for v in p["coeffs"]) for p in parts],
            search_radius=int(desc.get("search_radius", 1)),
            bias=float(desc.get("bias", 0.0)),
            part_ids=[str(p.get("id", i + 1)) for i, p in enumerate(parts)],
        )
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"{path}: bad part model descriptor: {exc}") from exc


def save_part_model(path, model: PartModel, scale: float = 0.01, offset: float = -2.0) -> None:
    """Write ``model`` as a descriptor plus one PGM per response grid.

    Grids are quantised to ``offset + scale * k`` for k in 0..255, so values
    outside ``[offset, offset + 255 * scale]`` are clipped.
    """
    path = Path(path)
    stem = path.stem

    def grid(name, values):
        write_pgm(path.parent / name, (np.asarray(values) - offset) / scale)
        return {"path": name, "scale": scale, "offset": offset}

    parts = []
    for i, resp in enumerate(model.part_responses):
        parts.append({"anchor": list(model.anchors[i]), "coeffs": list(model.deform_coeffs[i]),
                      "id": model.part_ids[i],
                      **grid(f"{stem}_part{i + 1}.pgm", resp)})
        parts[-1]["response_path"] = parts[-1].pop("path")
    write_json(path, {"root": grid(f"{stem}_root.pgm", model.root_response), "parts": parts,
                      "bias": model.bias, "search_radius": model.search_radius})
