"""Minimal deterministic SVG 1.1 output for trajectories and sweep curves.

Hand-written markup keeps the bytes stable across runs; nothing here
depends on dates, random ids or dictionary ordering.
"""

from __future__ import annotations

import math
from typing import Dict, List, Sequence, Tuple
from xml.sax.saxutils import escape

from .types import GroundTruthObject, TrackRecord

PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


def _n(v: float) -> str:
    s = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _header(w: float, h: float) -> List[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        '<!DOCTYPE svg PUBLIC "-//W3C//DTD SVG 1.1//EN" '
        '"http://www.w3.org/Graphics/SVG/1.1/DTD/svg11.dtd">',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_n(w)}" height="{_n(h)}" viewBox="0 0 {_n(w)} {_n(h)}">',
    ]


def color_for(track_id: int) -> str:
    return PALETTE[track_id % len(PALETTE)]


def trajectory_svg(tracks: Sequence[TrackRecord], truth: Sequence[GroundTruthObject] = (),
                   size: Tuple[float, float] = (320, 320),
                   frame_range: Tuple[int, int] | None = None) -> str:
    """Track centre polylines and last boxes, ground truth drawn dashed."""
    if frame_range is not None:
        lo, hi = frame_range
        tracks = [t for t in tracks if lo <= t.frame <= hi]
        truth = [g for g in truth if lo <= g.frame <= hi]
    w, h = size
    out = _header(w, h)
    out.append(f'<g id="background"><rect x="0" y="0" width="{_n(w)}" height="{_n(h)}" '
               f'fill="#f4f4f4"/></g>')
    gt_paths: Dict[int, List[GroundTruthObject]] = {}
    for g in sorted(truth, key=lambda g: (g.id, g.frame)):
        gt_paths.setdefault(g.id, []).append(g)
    if gt_paths:
        out.append('<g id="truth" fill="none" stroke="#555555" stroke-dasharray="3,2">')
        for gid, seq in gt_paths.items():
            pts = " ".join(f"{_n(g.box.center[0])},{_n(g.box.center[1])}" for g in seq)
            out.append(f'<polyline class="truth" data-id="{gid}" points="{pts}"/>')
        out.append("</g>")
    paths: Dict[int, List[TrackRecord]] = {}
    for t in sorted(tracks, key=lambda t: (t.track_id, t.frame)):
        paths.setdefault(t.track_id, []).append(t)
    if paths:
        out.append('<g id="tracks" fill="none" stroke-width="1.5">')
        for tid, seq in paths.items():
            c = color_for(tid)
            pts = " ".join(f"{_n(t.box.center[0])},{_n(t.box.center[1])}" for t in seq)
            out.append(f'<polyline class="track" data-id="{tid}" stroke="{c}" points="{pts}"/>')
            b = seq[-1].box
            out.append(f'<rect class="track-box" x="{_n(b.x)}" y="{_n(b.y)}" width="{_n(b.w)}" '
                       f'height="{_n(b.h)}" stroke="{c}"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def curve_svg(xs: Sequence[float], ys: Sequence[float], xlabel: str = "", ylabel: str = "",
              size: Tuple[float, float] = (360, 240), log_x: bool = False) -> str:
    """Line plot with one circle marker per point."""
    w, h = size
    ml, mr, mt, mb = 48.0, 12.0, 12.0, 36.0
    out = _header(w, h)
    out.append(f'<g id="background"><rect x="0" y="0" width="{_n(w)}" height="{_n(h)}" '
               f'fill="#ffffff"/></g>')
    pts = [(float(x), float(y)) for x, y in zip(xs, ys) if math.isfinite(y)]
    fx = (lambda v: math.log10(v)) if log_x else (lambda v: v)
    if pts:
        xv = [fx(x) for x, _ in pts]
        yv = [y for _, y in pts]
        x0, x1 = min(xv), max(xv)
        y0, y1 = min(yv), max(yv)
        if x1 == x0:
            x0, x1 = x0 - 1, x1 + 1
        if y1 == y0:
            y0, y1 = y0 - 0.5, y1 + 0.5
        sx = lambda v: ml + (v - x0) / (x1 - x0) * (w - ml - mr)
        sy = lambda v: h - mb - (v - y0) / (y1 - y0) * (h - mt - mb)
        out.append(f'<g id="axes" stroke="#000000" fill="none">'
                   f'<line x1="{_n(ml)}" y1="{_n(h - mb)}" x2="{_n(w - mr)}" y2="{_n(h - mb)}"/>'
                   f'<line x1="{_n(ml)}" y1="{_n(mt)}" x2="{_n(ml)}" y2="{_n(h - mb)}"/></g>')
        out.append(f'<g id="labels" font-family="sans-serif" font-size="10">'
                   f'<text x="{_n(ml)}" y="{_n(h - mb + 12)}">{_n(min(x for x, _ in pts))}</text>'
                   f'<text x="{_n(w - mr)}" y="{_n(h - mb + 12)}" text-anchor="end">'
                   f'{_n(max(x for x, _ in pts))}</text>'
                   f'<text x="{_n(ml - 4)}" y="{_n(h - mb)}" text-anchor="end">{_n(y0)}</text>'
                   f'<text x="{_n(ml - 4)}" y="{_n(mt + 8)}" text-anchor="end">{_n(y1)}</text>'
                   f'<text x="{_n((ml + w - mr) / 2)}" y="{_n(h - 6)}" text-anchor="middle">'
                   f'{escape(xlabel)}</text>'
                   f'<text x="10" y="{_n(mt + 8)}">{escape(ylabel)}</text></g>')
        line = " ".join(f"{_n(sx(a))},{_n(sy(b))}" for a, b in zip(xv, yv))
        out.append(f'<polyline id="curve" fill="none" stroke="#1f77b4" points="{line}"/>')
        out.append('<g id="markers" fill="#1f77b4">')
        for a, b in zip(xv, yv):
            out.append(f'<circle class="marker" cx="{_n(sx(a))}" cy="{_n(sy(b))}" r="2.5"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
