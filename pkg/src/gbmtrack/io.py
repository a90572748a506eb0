"""Readers and writers for the shared CSV formats and binary PGM images.

All CSVs are UTF-8 with LF line endings and a fixed header. Real-valued
fields are written with 6 decimal places.
"""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path
from typing import Dict, Iterable, List

import numpy as np

from .types import BoundingBox, DataFormatError, Detection, GroundTruthObject, TrackRecord

DETECTION_HEADER = ["frame", "x", "y", "w", "h", "score"]
TRACK_HEADER = ["frame", "id", "x", "y", "w", "h"]
TRUTH_HEADER = ["frame", "id", "x", "y", "w", "h", "vx", "vy", "heading"]


def _f(v: float) -> str:
    s = f"{v:.6f}"
    return "0.000000" if s == "-0.000000" else s


def _write_rows(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    Path(path).write_bytes(buf.getvalue().encode("utf-8"))


def _read_rows(path, required) -> List[dict]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise DataFormatError(f"{path}: empty file, expected header {','.join(required)}")
    missing = [c for c in required if c not in reader.fieldnames]
    if missing:
        raise DataFormatError(f"{path}: missing columns {missing}")
    return list(reader)


def _box(row, path, lineno) -> BoundingBox:
    try:
        return BoundingBox(float(row["x"]), float(row["y"]), float(row["w"]), float(row["h"]))
    except (TypeError, ValueError) as exc:
        raise DataFormatError(f"{path}:{lineno}: bad box: {exc}") from exc


def write_detections(path, detections: Iterable[Detection], include_part: bool = False) -> None:
    header = DETECTION_HEADER + (["part_id"] if include_part else [])
    rows = []
    for d in detections:
        b = d.box
        row = [d.frame, _f(b.x), _f(b.y), _f(b.w), _f(b.h), _f(d.score)]
        if include_part:
            row.append(d.part_id)
        rows.append(row)
    _write_rows(path, header, rows)


def read_detections(path) -> List[Detection]:
    """Parse a detections CSV. An optional ``part_id`` column is honoured."""
    out = []
    for n, row in enumerate(_read_rows(path, DETECTION_HEADER), start=2):
        try:
            out.append(
                Detection(
                    frame=int(row["frame"]),
                    box=_box(row, path, n),
                    score=float(row["score"]),
                    part_id=row.get("part_id") or "0",
                )
            )
        except ValueError as exc:
            raise DataFormatError(f"{path}:{n}: {exc}") from exc
    return out


def write_tracks(path, tracks: Iterable[TrackRecord]) -> None:
    rows = [
        [t.frame, t.track_id, _f(t.box.x), _f(t.box.y), _f(t.box.w), _f(t.box.h)]
        for t in tracks
    ]
    _write_rows(path, TRACK_HEADER, rows)


def read_tracks(path) -> List[TrackRecord]:
    out = []
    for n, row in enumerate(_read_rows(path, TRACK_HEADER), start=2):
        try:
            out.append(TrackRecord(int(row["frame"]), int(row["id"]), _box(row, path, n)))
        except ValueError as exc:
            raise DataFormatError(f"{path}:{n}: {exc}") from exc
    return out


def write_truth(path, truth: Iterable[GroundTruthObject]) -> None:
    rows = []
    for g in truth:
        b = g.box
        rows.append([g.frame, g.id, _f(b.x), _f(b.y), _f(b.w), _f(b.h),
                     _f(g.velocity[0]), _f(g.velocity[1]), _f(g.heading)])
    _write_rows(path, TRUTH_HEADER, rows)


def read_truth(path) -> List[GroundTruthObject]:
    out = []
    for n, row in enumerate(_read_rows(path, TRUTH_HEADER), start=2):
        try:
            out.append(
                GroundTruthObject(
                    frame=int(row["frame"]),
                    id=int(row["id"]),
                    box=_box(row, path, n),
                    velocity=(float(row["vx"]), float(row["vy"])),
                    heading=float(row["heading"]),
                )
            )
        except ValueError as exc:
            raise DataFormatError(f"{path}:{n}: {exc}") from exc
    return out


def group_by_frame(items, n_frames: int | None = None) -> Dict[int, list]:
    """Bucket records by their ``frame`` attribute, keeping input order."""
    out: Dict[int, list] = {}
    if n_frames is not None:
        out = {t: [] for t in range(n_frames)}
    for it in items:
        out.setdefault(it.frame, []).append(it)
    return out


# -- PGM ------------------------------------------------------------------


def write_pgm(path, image: np.ndarray) -> None:
    """Write an 8-bit binary PGM (P5, maxval 255). Values are rounded and clipped."""
    img = np.clip(np.floor(np.asarray(image, dtype=float) + 0.5), 0, 255).astype(np.uint8)
    if img.ndim != 2:
        raise ValueError("PGM images must be 2-D")
    h, w = img.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + img.tobytes())


def _pgm_tokens(data: bytes, count: int):
    tokens, pos = [], 2
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DataFormatError("truncated PGM header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates header from raster
    return tokens, pos + 1


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM (P5, maxval <= 255) as a float array of shape (h, w)."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    if data[:2] != b"P5":
        raise DataFormatError(f"{path}: not a binary PGM (P5)")
    try:
        (w, h, maxval), start = _pgm_tokens(data, 3)
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise DataFormatError(f"{path}: bad PGM header") from exc
    if maxval > 255 or maxval <= 0:
        raise DataFormatError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    raster = data[start:start + w * h]
    if len(raster) != w * h:
        raise DataFormatError(f"{path}: truncated raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w).astype(float)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON: {exc}") from exc


def resolve(base, rel) -> str:
    """Resolve ``rel`` against the directory holding ``base``."""
    return os.path.join(os.path.dirname(os.path.abspath(base)), rel)
