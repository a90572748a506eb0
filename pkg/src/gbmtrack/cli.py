"""Command-line entry point: ``gbmtrack <subcommand> [options]``.

Exit codes: 0 success, 2 usage or configuration error, 3 malformed input data.
"""

from __future__ import annotations

import argparse
import csv
import glob
import os
import sys
from dataclasses import replace
from typing import Dict, List

from . import fixtures
from .io import (group_by_frame, read_detections, read_pgm, read_tracks, read_truth,
                 write_detections, write_json, write_pgm, write_tracks, write_truth)
from .metrics import EvalConfig, evaluate_mot
from .parts import load_part_model, save_part_model
from .pipeline import (DET_COLUMNS, MOT_COLUMNS, SWEEP_PARAMS, PipelineConfig,
                       ScenarioData, TrackerConfig, detect_frames, eta_models, parse_values,
                       passthrough_tracks, refine_frames, sweep_eta, sweep_tracker, track)
from .segment import load_templates, refine_detections
from .simulator import ScenarioConfig, render_frame, simulate, simulate_truth
from .svg import curve_svg, trajectory_svg
from .types import ConfigError, DataFormatError, GbmTrackError

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3


class _Ctx:
    def __init__(self, args):
        self.args = args
        self.out_dir = args.out_dir or "."
        os.makedirs(self.out_dir, exist_ok=True)
        self.cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()

    def out(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def say(self, msg: str) -> None:
        if not self.args.quiet:
            print(msg)

    def scenario(self) -> ScenarioConfig:
        a = self.args
        scen = self.cfg.scenario or ScenarioConfig()
        if getattr(a, "fixture", None):
            scen = fixtures.scenario(a.fixture)
        if a.seed is not None:
            scen = replace(scen, seed=a.seed)
        if getattr(a, "frames", None) is not None:
            scen = ScenarioConfig.from_dict({**scen.to_dict(), "frames": a.frames})
        return scen

    def tracker(self) -> TrackerConfig:
        t = self.cfg.tracker
        if getattr(self.args, "fixture", None):
            t = TrackerConfig.fixture(**{k: v for k, v in t.to_dict().items()
                                         if k not in fixtures.FIXTURE_TRACKER})
        if getattr(self.args, "no_gbm", False):
            t = replace(t, use_gbm=False)
        return t

    def evaluation(self) -> EvalConfig:
        e = self.cfg.evaluation
        a = self.args
        if getattr(a, "iou", None) is not None or getattr(a, "motp_mode", None) is not None:
            e = EvalConfig(a.iou if a.iou is not None else e.match_threshold_iou,
                           a.motp_mode or e.motp_mode)
        return e


def _pick(cli_value, cfg_value, what: str, required: bool = True):
    v = cli_value if cli_value is not None else cfg_value
    if v is None and required:
        raise ConfigError(f"{what} is required")
    return v


def _load_models(model: str | None, models_dir: str | None) -> Dict[int, object]:
    if model:
        return {0: load_part_model(model)}
    paths = sorted(glob.glob(os.path.join(models_dir, "[0-9]*.json")))
    if not paths:
        raise ConfigError(f"no per-frame model descriptors in {models_dir}")
    return {int(os.path.basename(p).split(".")[0]): load_part_model(p) for p in paths}


def _load_frames(frames_dir: str) -> Dict[int, object]:
    paths = sorted(glob.glob(os.path.join(frames_dir, "[0-9]*.pgm")))
    if not paths:
        raise ConfigError(f"no frame images in {frames_dir}")
    return {int(os.path.basename(p).split(".")[0]): read_pgm(p) for p in paths}


def _n_frames(explicit, *streams) -> int:
    if explicit is not None:
        return explicit
    last = [r.frame for s in streams for r in s]
    return max(last) + 1 if last else 0


def _print_report(ctx: _Ctx, report: dict) -> None:
    for k in MOT_COLUMNS:
        v = report[k]
        ctx.say(f"{k}: {v:.6f}" if isinstance(v, float) else f"{k}: {v}")


def _json_report(report: dict) -> dict:
    return {k: (None if isinstance(v, float) and v != v else v) for k, v in report.items()}


# -- subcommands --------------------------------------------------------------


def cmd_simulate(ctx: _Ctx) -> None:
    a = ctx.args
    scen = ctx.scenario()
    recs = simulate(scen)
    write_truth(ctx.out("gt.csv"), [g for r in recs for g in r.truth])
    write_detections(ctx.out("det.csv"), [d for r in recs for d in r.detections])
    write_json(ctx.out("scenario.json"), scen.to_dict())
    if a.render:
        os.makedirs(ctx.out("frames"), exist_ok=True)
        for r in recs:
            write_pgm(ctx.out(os.path.join("frames", f"{r.frame:06d}.pgm")),
                      render_frame(r.truth, scen, r.frame))
    if a.responses:
        os.makedirs(ctx.out("responses"), exist_ok=True)
        for r in recs:
            m = fixtures.response_model(r.truth, (scen.width, scen.height), scen.seed, r.frame)
            save_part_model(ctx.out(os.path.join("responses", f"{r.frame:06d}.json")), m)
    ctx.say(f"simulated {scen.frames} frames into {ctx.out_dir}")


def _detector(ctx: _Ctx):
    a = ctx.args
    d = ctx.cfg.detector
    if a.eta is not None:
        d = replace(d, eta=a.eta)
    if a.box is not None:
        d = replace(d, box_size=tuple(a.box))
    return d


def cmd_detect(ctx: _Ctx) -> None:
    a = ctx.args
    if not a.model and not (a.models_dir or ctx.cfg.models_dir):
        raise ConfigError("detect needs --model or --models-dir")
    models = _load_models(a.model, a.models_dir or ctx.cfg.models_dir)
    if a.model and a.frame is not None:
        models = {a.frame: models[0]}
    dets = detect_frames(models, _detector(ctx))
    write_detections(ctx.out("det.csv"), dets, include_part=True)
    ctx.say(f"{len(dets)} detections")


def cmd_refine(ctx: _Ctx) -> None:
    a, c = ctx.args, ctx.cfg
    dets = read_detections(_pick(a.det, c.detections, "--det"))
    templates = load_templates(_pick(a.templates, c.templates, "--templates"))
    frames = _load_frames(_pick(a.frames_dir, c.frames_dir, "--frames-dir"))
    kept = []
    for f, group in sorted(group_by_frame(dets).items()):
        if f not in frames:
            kept.extend(group)
            continue
        survivors, windows = refine_detections(frames[f], group, templates, c.segmentation,
                                               return_windows=True)
        kept.extend(survivors)
        if a.masks:
            os.makedirs(ctx.out("masks"), exist_ok=True)
            for k, w in enumerate(windows):
                write_pgm(ctx.out(os.path.join("masks", f"{f:06d}_{k:03d}.pgm")), w.labels * 255)
    write_detections(ctx.out("refined.csv"), kept, include_part=True)
    ctx.say(f"kept {len(kept)} of {len(dets)} detections")


def cmd_track(ctx: _Ctx) -> None:
    a, c = ctx.args, ctx.cfg
    dets = read_detections(_pick(a.det, c.detections, "--det"))
    n = _n_frames(a.frames, dets)
    size = tuple(a.image_size) if a.image_size else None
    tracks = track(dets, n, ctx.tracker(), size)
    write_tracks(ctx.out("tracks.csv"), tracks)
    ctx.say(f"{len({t.track_id for t in tracks})} tracks over {n} frames")


def cmd_evaluate(ctx: _Ctx) -> None:
    a, c = ctx.args, ctx.cfg
    truth = read_truth(_pick(a.gt, c.truth, "--gt"))
    tracks = read_tracks(a.tracks)
    try:
        res = evaluate_mot(truth, tracks, ctx.evaluation(),
                           n_frames=_n_frames(a.frames, truth, tracks))
    except DataFormatError:
        raise
    except GbmTrackError as exc:
        raise DataFormatError(str(exc)) from exc
    report = res.report()
    _print_report(ctx, report)
    if a.json:
        write_json(ctx.out("report.json"), _json_report(report))


def cmd_pipeline(ctx: _Ctx) -> None:
    a, c = ctx.args, ctx.cfg
    use_seg = c.use_segmenter and not a.no_segmenter
    tcfg = ctx.tracker()
    truth, frames, size = None, {}, None
    if a.fixture or (c.scenario is not None and not (a.det or c.detections or a.models_dir
                                                      or c.models_dir)):
        scen = ctx.scenario()
        data = ScenarioData.simulate(scen)
        dets, truth, n = data.detections, data.truth, scen.frames
        size = (scen.width, scen.height)
        if use_seg:
            frames = data.frames()
    else:
        if a.det or c.detections:
            dets = read_detections(a.det or c.detections)
        elif a.models_dir or c.models_dir:
            dets = detect_frames(_load_models(None, a.models_dir or c.models_dir), _detector(ctx))
        else:
            raise ConfigError("pipeline needs --det, --models-dir or --fixture")
        gt_path = a.gt or c.truth
        truth = read_truth(gt_path) if gt_path else None
        n = _n_frames(a.frames, dets, truth or [])
        if use_seg:
            frames_dir = a.frames_dir or c.frames_dir
            if not frames_dir:
                raise ConfigError("segmentation needs --frames-dir (or pass --no-segmenter)")
            frames = _load_frames(frames_dir)
    if use_seg:
        tpath = a.templates or c.templates
        templates = load_templates(tpath) if tpath else None
        if templates is None:
            if not a.fixture:
                raise ConfigError("segmentation is enabled but no --templates were given")
            templates = fixtures.default_templates()
        dets = refine_frames(frames, dets, templates, c.segmentation)
    tracks = passthrough_tracks(dets) if a.no_track else track(dets, n, tcfg, size)
    write_tracks(ctx.out("tracks.csv"), tracks)
    ctx.say(f"{len(dets)} detections, {len({t.track_id for t in tracks})} tracks")
    if truth is not None:
        res = evaluate_mot(truth, tracks, ctx.evaluation(), n_frames=n)
        report = res.report()
        _print_report(ctx, report)
        write_json(ctx.out("report.json"), _json_report(report))


def cmd_sweep(ctx: _Ctx) -> None:
    a = ctx.args
    values = parse_values(a.values, a.range)
    if a.param not in SWEEP_PARAMS:
        raise ConfigError(f"cannot sweep '{a.param}'; choose from {', '.join(SWEEP_PARAMS)}")
    ecfg = ctx.evaluation()
    if a.param == "eta":
        if not a.fixture:
            a.fixture = "eta"
        scen = ctx.scenario()
        truth = [g for gt in simulate_truth(scen) for g in gt]
        base = ctx.cfg.detector if ctx.args.config else fixtures.ETA_DETECTOR
        rows = sweep_eta(eta_models(scen), truth, values, base, ecfg)
        cols = DET_COLUMNS
    else:
        if not a.fixture and ctx.cfg.scenario is None:
            a.fixture = "crowded"
        data = ScenarioData.simulate(ctx.scenario())
        rows = sweep_tracker(data, a.param, values, ctx.tracker(), ecfg)
        cols = MOT_COLUMNS
    with open(ctx.out("sweep.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([a.param, *cols])
        for r in rows:
            w.writerow([repr(float(r["value"])),
                        *[f"{r[c]:.6f}" if isinstance(r[c], float) else r[c] for c in cols]])
    for r in rows:
        ctx.say(" ".join([f"{a.param}={r['value']:g}"] + [
            f"{c}={r[c]:.4f}" if isinstance(r[c], float) else f"{c}={r[c]}" for c in cols]))


def _read_sweep(path: str):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataFormatError(f"{path}: empty sweep file")
    header, body = rows[0], rows[1:]
    try:
        cols = {h: [float(r[i]) for r in body] for i, h in enumerate(header)}
    except (ValueError, IndexError) as exc:
        raise DataFormatError(f"{path}: bad sweep row: {exc}") from exc
    return header, cols


def cmd_plot(ctx: _Ctx) -> None:
    a = ctx.args
    if not a.tracks and not a.sweep:
        raise ConfigError("plot needs --tracks and/or --sweep")
    if a.tracks:
        tracks = read_tracks(a.tracks)
        truth = read_truth(a.gt) if a.gt else []
        fr = None
        if a.frame_range:
            try:
                lo, hi = (int(v) for v in a.frame_range.split(":"))
            except ValueError:
                raise ConfigError("--frame-range must be start:stop") from None
            fr = (lo, hi)
        with open(ctx.out("trajectories.svg"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(trajectory_svg(tracks, truth, tuple(a.size), fr))
    if a.sweep:
        header, cols = _read_sweep(a.sweep)
        metric = a.metric or header[-1]
        if metric not in cols:
            raise ConfigError(f"sweep file has no column '{metric}'")
        svg = curve_svg(cols[header[0]], cols[metric], header[0], metric, log_x=a.log_x)
        with open(ctx.out("sweep.svg"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(svg)
    ctx.say(f"wrote SVG into {ctx.out_dir}")


# -- argument parsing ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="scenario seed override")
    g.add_argument("--config", default=argparse.SUPPRESS, help="pipeline config JSON")
    g.add_argument("--out-dir", default=argparse.SUPPRESS, help="output directory (default .)")
    g.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="gbmtrack", parents=[common],
                                description="Synthetic multi-vehicle detection and tracking.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="generate a synthetic junction scenario")
    s.add_argument("--fixture", choices=["light", "medium", "heavy", "crowded", "eta"])
    s.add_argument("--frames", type=int)
    s.add_argument("--render", action="store_true", help="also write frames/%%06d.pgm")
    s.add_argument("--responses", action="store_true",
                   help="also write synthetic part responses to responses/")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("detect", parents=[common], help="score part responses into detections")
    s.add_argument("--model", help="one model descriptor JSON")
    s.add_argument("--frame", type=int, help="frame number for --model (default 0)")
    s.add_argument("--models-dir", help="directory of NNNNNN.json descriptors, one per frame")
    s.add_argument("--eta", type=float)
    s.add_argument("--box", type=float, nargs=2, metavar=("W", "H"))
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("refine", parents=[common], help="shape-based rejection of detections")
    s.add_argument("--det")
    s.add_argument("--frames-dir")
    s.add_argument("--templates")
    s.add_argument("--masks", action="store_true", help="write per-window label PGMs")
    s.set_defaults(func=cmd_refine)

    s = sub.add_parser("track", parents=[common], help="track a detections CSV")
    s.add_argument("--det")
    s.add_argument("--frames", type=int)
    s.add_argument("--image-size", type=int, nargs=2, metavar=("W", "H"))
    s.add_argument("--no-gbm", action="store_true", help="plain Kalman baseline")
    s.set_defaults(func=cmd_track)

    s = sub.add_parser("evaluate", parents=[common], help="CLEAR MOT scores")
    s.add_argument("--gt")
    s.add_argument("--tracks", required=True)
    s.add_argument("--frames", type=int)
    s.add_argument("--iou", type=float)
    s.add_argument("--motp-mode", choices=["iou", "center_distance"])
    s.add_argument("--json", action="store_true", help="also write report.json")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("pipeline", parents=[common], help="detect, refine, track, evaluate")
    s.add_argument("--fixture", choices=["light", "medium", "heavy", "crowded", "eta"])
    s.add_argument("--frames", type=int)
    s.add_argument("--det")
    s.add_argument("--models-dir")
    s.add_argument("--eta", type=float)
    s.add_argument("--box", type=float, nargs=2, metavar=("W", "H"))
    s.add_argument("--gt")
    s.add_argument("--frames-dir")
    s.add_argument("--templates")
    s.add_argument("--iou", type=float)
    s.add_argument("--motp-mode", choices=["iou", "center_distance"])
    s.add_argument("--no-gbm", action="store_true")
    s.add_argument("--no-segmenter", action="store_true")
    s.add_argument("--no-track", action="store_true",
                   help="emit each detection as its own one-frame track")
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser("sweep", parents=[common], help="metric as a function of one parameter")
    s.add_argument("--param", required=True, help=f"one of {', '.join(SWEEP_PARAMS)}")
    s.add_argument("--values", help="comma-separated values")
    s.add_argument("--range", help="inclusive start:stop:step")
    s.add_argument("--fixture", choices=["light", "medium", "heavy", "crowded", "eta"])
    s.add_argument("--frames", type=int)
    s.add_argument("--iou", type=float)
    s.add_argument("--motp-mode", choices=["iou", "center_distance"])
    s.add_argument("--no-gbm", action="store_true")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("plot", parents=[common], help="SVG trajectories and sweep curves")
    s.add_argument("--tracks")
    s.add_argument("--gt")
    s.add_argument("--frame-range")
    s.add_argument("--size", type=float, nargs=2, default=(320, 320), metavar=("W", "H"))
    s.add_argument("--sweep")
    s.add_argument("--metric")
    s.add_argument("--log-x", action="store_true")
    s.set_defaults(func=cmd_plot)
    return p


def main(argv: List[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for k, v in (("seed", None), ("config", None), ("out_dir", None), ("quiet", False)):
        if not hasattr(args, k):
            setattr(args, k, v)
    try:
        ctx = _Ctx(args)
        args.func(ctx)
    except DataFormatError as exc:
        print(f"gbmtrack: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, GbmTrackError, OSError) as exc:
        print(f"gbmtrack: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
