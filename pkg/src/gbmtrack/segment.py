"""Graph-cut segmentation of detection windows with a level-set shape prior.

Each window is labelled independently (1 = vehicle, 0 = background) by
minimising

    lambda_region   * sum_p  -log P(I_p | label_p)
  + lambda_boundary * sum_{i~j, l_i != l_j} exp(-(I_i - I_j)^2 / 2 alpha^2) / dist(i, j)
  + lambda_shape    * sum_{i~j, l_i != l_j} phi((pos_i + pos_j) / 2)

where phi is the unsigned distance to the template silhouette. All pairwise
terms are non-negative and only charged across label changes, so one s-t
min cut gives the exact minimiser.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Tuple

import numpy as np
from scipy import ndimage

from .io import read_json, read_pgm, resolve
from .maxflow import FlowGraph
from .types import ConfigError, DataFormatError, Detection, GbmTrackError


@dataclass(frozen=True)
class ShapeTemplate:
    mask: np.ndarray
    phi: np.ndarray
    part_id: str = "0"

    @classmethod
    def from_mask(cls, mask, part_id: str = "0") -> "ShapeTemplate":
        m = np.asarray(mask) > 0
        return cls(m.astype(np.uint8), distance_field(m), part_id)


@dataclass(frozen=True)
class IntensityModel:
    obj_hist: np.ndarray
    back_hist: np.ndarray


@dataclass
class SegmentationConfig:
    alpha: float = 10.0
    lambda_region: float = 1.0
    lambda_boundary: float = 1.0
    lambda_shape: float = 1.0
    accept_overlap: float = 0.5
    fg_fraction_bounds: Tuple[float, float] = (0.2, 0.9)
    connectivity: int = 4
    # context added around each detection box, as a fraction of its size
    window_margin: float = 0.25

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if min(self.lambda_region, self.lambda_boundary, self.lambda_shape) < 0:
            raise ConfigError("term weights must be non-negative")
        if not 0.0 < self.accept_overlap < 1.0:
            raise ConfigError("accept_overlap must lie in (0, 1)")
        lo, hi = self.fg_fraction_bounds
        if not 0.0 < lo < hi < 1.0:
            raise ConfigError("fg_fraction_bounds must satisfy 0 < lo < hi < 1")
        if self.connectivity not in (4, 8):
            raise ConfigError("connectivity must be 4 or 8")
        if self.window_margin < 0:
            raise ConfigError("window_margin must be >= 0")


def distance_field(mask) -> np.ndarray:
    """Euclidean distance from each pixel to the nearest foreground pixel."""
    m = np.asarray(mask) > 0
    if not m.any():
        raise ValueError("empty template")
    return ndimage.distance_transform_edt(~m)


def _hist(values) -> np.ndarray:
    idx = np.clip(np.floor(np.asarray(values, dtype=float) + 0.5), 0, 255).astype(int)
    counts = np.bincount(idx.ravel(), minlength=256).astype(float) + 1.0
    return counts / counts.sum()


def border_ring(shape, width: int = 2) -> np.ndarray:
    ring = np.zeros(shape, dtype=bool)
    ring[:width, :] = True
    ring[-width:, :] = True
    ring[:, :width] = True
    ring[:, -width:] = True
    return ring


def learn_intensity_model(window, template: ShapeTemplate) -> IntensityModel:
    """Object histogram from the template interior, background from the 2-px border ring."""
    window = np.asarray(window, dtype=float)
    if window.shape != template.mask.shape:
        raise ValueError("window and template must have equal dimensions")
    return IntensityModel(
        obj_hist=_hist(window[template.mask > 0]),
        back_hist=_hist(window[border_ring(window.shape)]),
    )


def _region_costs(window, model: IntensityModel):
    idx = np.clip(np.floor(window + 0.5), 0, 255).astype(int)
    return -np.log(model.back_hist[idx]), -np.log(model.obj_hist[idx])


def _bilinear(field: np.ndarray, y, x):
    h, w = field.shape
    y0 = np.clip(np.floor(y).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(x).astype(int), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy, fx = y - y0, x - x0
    return ((1 - fy) * (1 - fx) * field[y0, x0] + (1 - fy) * fx * field[y0, x1]
            + fy * (1 - fx) * field[y1, x0] + fy * fx * field[y1, x1])


def _edges(shape, connectivity: int):
    """(i, j) flat index pairs of the neighbourhood, with their lengths and midpoints."""
    h, w = shape
    idx = np.arange(h * w).reshape(h, w)
    offsets = [(0, 1), (1, 0)]
    if connectivity == 8:
        offsets += [(1, 1), (1, -1)]
    out = []
    for dy, dx in offsets:
        ys = slice(0, h - dy)
        xs = slice(max(0, -dx), w - max(0, dx))
        a = idx[ys, xs].ravel()
        b = idx[ys.start + dy:ys.stop + dy, xs.start + dx:xs.stop + dx].ravel()
        if len(a):
            out.append((a, b, math.hypot(dx, dy)))
    if not out:
        e = np.zeros(0, dtype=int)
        return e, e, np.zeros(0), np.zeros(0), np.zeros(0)
    i = np.concatenate([o[0] for o in out])
    j = np.concatenate([o[1] for o in out])
    dist = np.concatenate([np.full(len(o[0]), o[2]) for o in out])
    my = (i // w + j // w) / 2.0
    mx = (i % w + j % w) / 2.0
    return i, j, dist, my, mx


def pairwise_weights(window, template: ShapeTemplate, cfg: SegmentationConfig):
    """Neighbour pairs and the cost charged when their labels differ."""
    window = np.asarray(window, dtype=float)
    i, j, dist, my, mx = _edges(window.shape, cfg.connectivity)
    flat = window.ravel()
    v = np.exp(-((flat[i] - flat[j]) ** 2) / (2.0 * cfg.alpha ** 2)) / dist
    shape_cost = _bilinear(np.asarray(template.phi, dtype=float), my, mx)
    return i, j, cfg.lambda_boundary * v + cfg.lambda_shape * shape_cost


def energy(labeling, window, model: IntensityModel, template: ShapeTemplate,
           cfg: SegmentationConfig) -> float:
    window = np.asarray(window, dtype=float)
    lab = np.asarray(labeling).astype(bool)
    if lab.shape != window.shape or template.phi.shape != window.shape:
        raise ValueError("labeling, window and template must have equal dimensions")
    cost0, cost1 = _region_costs(window, model)
    region = float(np.where(lab, cost1, cost0).sum())
    i, j, w = pairwise_weights(window, template, cfg)
    flat = lab.ravel()
    cut = flat[i] != flat[j]
    return cfg.lambda_region * region + float(w[cut].sum())


def segment(window, model: IntensityModel, template: ShapeTemplate,
            cfg: SegmentationConfig) -> np.ndarray:
    """Globally optimal labelling (uint8 array, 1 = object) via s-t min cut."""
    window = np.asarray(window, dtype=float)
    if template.phi.shape != window.shape:
        raise ValueError("window and template must have equal dimensions")
    h, w = window.shape
    n = h * w
    s, t = n, n + 1
    g = FlowGraph(n + 2)
    cost0, cost1 = _region_costs(window, model)
    c0 = (cfg.lambda_region * cost0).ravel()
    c1 = (cfg.lambda_region * cost1).ravel()
    # source side = label 1: cutting s->p means p took label 0, p->t means label 1.
    # Only the difference matters; the shared part is a constant.
    for p in range(n):
        d = c0[p] - c1[p]
        if d > 0:
            g.add_edge(s, p, d)
        elif d < 0:
            g.add_edge(p, t, -d)
    i, j, wts = pairwise_weights(window, template, cfg)
    for a, b, c in zip(i.tolist(), j.tolist(), wts.tolist()):
        if c > 0:
            g.add_edge(a, b, c, c)
    g.max_flow(s, t)
    return g.source_side(s)[:n].reshape(h, w).astype(np.uint8)


# -- detection refinement ----------------------------------------------------


def resize_mask(mask, shape) -> np.ndarray:
    """Nearest-neighbour resample of a binary mask to ``shape`` (rows, cols)."""
    mask = np.asarray(mask) > 0
    h, w = shape
    sh, sw = mask.shape
    rows = np.minimum(((np.arange(h) + 0.5) * sh / h).astype(int), sh - 1)
    cols = np.minimum(((np.arange(w) + 0.5) * sw / w).astype(int), sw - 1)
    return mask[np.ix_(rows, cols)]


def _crop(frame: np.ndarray, x0, y0, x1, y1) -> np.ndarray:
    """Crop with edge replication for out-of-frame pixels."""
    h, w = frame.shape
    ys = np.clip(np.arange(y0, y1), 0, h - 1)
    xs = np.clip(np.arange(x0, x1), 0, w - 1)
    return frame[np.ix_(ys, xs)]


@dataclass
class WindowResult:
    detection: Detection
    labels: np.ndarray
    template_mask: np.ndarray
    overlap: float
    fg_fraction: float
    accepted: bool


def evaluate_window(frame, det: Detection, template: ShapeTemplate,
                    cfg: SegmentationConfig) -> WindowResult:
    """Segment one detection window and apply the shape acceptance rule."""
    bx0, by0, bx1, by1 = det.box.to_pixels()
    bw, bh = max(1, bx1 - bx0), max(1, by1 - by0)
    mx = int(math.ceil(cfg.window_margin * bw))
    my = int(math.ceil(cfg.window_margin * bh))
    # the 2-px background ring needs room outside the box
    mx, my = max(mx, 2), max(my, 2)
    window = _crop(np.asarray(frame, dtype=float), bx0 - mx, by0 - my, bx1 + mx, by1 + my)
    tmask = np.zeros(window.shape, dtype=np.uint8)
    tmask[my:my + bh, mx:mx + bw] = resize_mask(template.mask, (bh, bw))
    if not tmask.any():
        tmask[my:my + bh, mx:mx + bw] = 1
    scaled = ShapeTemplate.from_mask(tmask, template.part_id)
    model = learn_intensity_model(window, scaled)
    labels = segment(window, model, scaled, cfg)
    fg = labels > 0
    tm = tmask > 0
    union = np.logical_or(fg, tm).sum()
    rho = float(np.logical_and(fg, tm).sum() / union) if union else 0.0
    frac = float(fg.mean())
    lo, hi = cfg.fg_fraction_bounds
    accepted = rho >= cfg.accept_overlap and lo <= frac <= hi
    return WindowResult(det, labels, tmask, rho, frac, accepted)


def refine_detections(frame, detections, templates: Mapping[str, ShapeTemplate],
                      cfg: SegmentationConfig, return_windows: bool = False):
    """Keep detections whose segmentation matches their shape template.

    ``templates`` maps part id to template. Survivors keep their input order.
    With ``return_windows`` the per-window results are returned as well.
    """
    kept: List[Detection] = []
    windows: List[WindowResult] = []
    for det in detections:
        tpl = templates.get(det.part_id)
        if tpl is None:
            raise GbmTrackError(f"no shape template for part '{det.part_id}'")
        res = evaluate_window(frame, det, tpl, cfg)
        windows.append(res)
        if res.accepted:
            kept.append(det)
    return (kept, windows) if return_windows else kept


def rectangle_template(w: int, h: int, corner: int = 0, part_id: str = "0") -> ShapeTemplate:
    """Filled (optionally rounded) rectangle of w x h pixels."""
    mask = np.ones((h, w), dtype=np.uint8)
    if corner > 0:
        yy, xx = np.mgrid[0:h, 0:w]
        cx = np.clip(xx, corner - 0.5, w - corner - 0.5)
        cy = np.clip(yy, corner - 0.5, h - corner - 0.5)
        mask = ((xx - cx) ** 2 + (yy - cy) ** 2 <= corner ** 2).astype(np.uint8)
    return ShapeTemplate.from_mask(mask, part_id)


def load_templates(path) -> Dict[str, ShapeTemplate]:
    """Load ``templates.json`` (``{part_id: "mask.pgm", ...}``); masks are 0/255 PGMs."""
    desc = read_json(path)
    if not isinstance(desc, dict) or not desc:
        raise DataFormatError(f"{path}: expected a non-empty object of part_id -> file")
    out = {}
    for part_id, rel in desc.items():
        mask = read_pgm(resolve(path, rel)) > 127
        try:
            out[str(part_id)] = ShapeTemplate.from_mask(mask, str(part_id))
        except ValueError as exc:
            raise DataFormatError(f"{path}: template '{part_id}': {exc}") from exc
    return out
