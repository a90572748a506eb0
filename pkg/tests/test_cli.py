import json
import re
import subprocess
import sys

import pytest

from gbmtrack.cli import main
from gbmtrack.io import read_tracks, write_json, write_pgm, write_tracks
from gbmtrack.segment import rectangle_template
from gbmtrack.types import BoundingBox, TrackRecord


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    assert run("simulate", "--fixture", "medium", "--frames", "60", "--render", "--out-dir", d,
               "--quiet") == 0
    return d


class TestSimulate:
    def test_outputs(self, sim_dir):
        for name in ("gt.csv", "det.csv", "scenario.json"):
            assert (sim_dir / name).exists()
        assert len(list((sim_dir / "frames").glob("*.pgm"))) == 60
        assert json.loads((sim_dir / "scenario.json").read_text())["frames"] == 60

    def test_byte_deterministic(self, tmp_path):
        for sub in ("a", "b"):
            assert run("--seed", 5, "simulate", "--frames", 30, "--out-dir", tmp_path / sub,
                       "--quiet") == 0
        for name in ("gt.csv", "det.csv", "scenario.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_zero_frames(self, tmp_path):
        assert run("simulate", "--frames", 0, "--out-dir", tmp_path, "--quiet") == 0
        assert (tmp_path / "gt.csv").read_text().count("\n") == 1


class TestStages:
    def test_track_and_evaluate(self, sim_dir, tmp_path, capsys):
        assert run("track", "--det", sim_dir / "det.csv", "--out-dir", tmp_path, "--quiet") == 0
        assert run("evaluate", "--gt", sim_dir / "gt.csv", "--tracks", tmp_path / "tracks.csv",
                   "--json", "--out-dir", tmp_path) == 0
        out = capsys.readouterr().out
        mota = float(re.search(r"MOTA\s*[=:]?\s*(-?[0-9.]+)", out).group(1))
        assert 0.5 < mota <= 1.0
        assert json.loads((tmp_path / "report.json").read_text())["MOTA"] == pytest.approx(mota, abs=1e-3)

    def test_refine(self, sim_dir, tmp_path):
        write_pgm(tmp_path / "car.pgm", rectangle_template(10, 5, corner=2).mask * 255)
        write_json(tmp_path / "templates.json", {"0": "car.pgm"})
        assert run("refine", "--det", sim_dir / "det.csv", "--frames-dir", sim_dir / "frames",
                   "--templates", tmp_path / "templates.json", "--masks", "--out-dir", tmp_path,
                   "--quiet") == 0
        n_in = (sim_dir / "det.csv").read_text().count("\n") - 1
        n_out = (tmp_path / "refined.csv").read_text().count("\n") - 1
        assert 0 < n_out < n_in
        assert len(list((tmp_path / "masks").glob("*.pgm"))) > 0

    def test_empty_template_store(self, sim_dir, tmp_path):
        write_json(tmp_path / "templates.json", {})
        assert run("refine", "--det", sim_dir / "det.csv", "--frames-dir", sim_dir / "frames",
                   "--templates", tmp_path / "templates.json", "--out-dir", tmp_path,
                   "--quiet") == 3

    def test_pipeline_passthrough(self, sim_dir, tmp_path):
        assert run("pipeline", "--det", sim_dir / "det.csv", "--no-segmenter", "--no-track",
                   "--out-dir", tmp_path, "--quiet") == 0
        n_det = (sim_dir / "det.csv").read_text().count("\n") - 1
        tracks = read_tracks(tmp_path / "tracks.csv")
        assert len(tracks) == n_det == len({t.track_id for t in tracks})

    def test_pipeline_with_segmenter(self, sim_dir, tmp_path):
        assert run("pipeline", "--fixture", "light", "--frames", 40, "--out-dir", tmp_path,
                   "--quiet") == 0
        rep = json.loads((tmp_path / "report.json").read_text())
        assert rep["MOTA"] > 0.5


class TestExitCodes:
    def test_segmenter_without_frames(self, sim_dir, tmp_path):
        assert run("pipeline", "--det", sim_dir / "det.csv", "--out-dir", tmp_path, "--quiet") == 2

    def test_malformed_csv(self, tmp_path):
        bad = tmp_path / "det.csv"
        bad.write_text("frame,x,y,w,h,score\n0,1,2,three,4,0.5\n")
        assert run("track", "--det", bad, "--out-dir", tmp_path, "--quiet") == 3

    def test_unknown_subcommand(self):
        assert run("fly") == 2

    def test_empty_range(self, tmp_path):
        assert run("sweep", "--param", "kappa", "--range", "1:0:0.1", "--out-dir", tmp_path) == 2

    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"tracker": {"warp_factor": 9}}))
        assert run("--config", cfg, "track", "--det", "x.csv") == 2

    def test_global_flag_positions(self, tmp_path):
        assert run("--quiet", "--out-dir", tmp_path / "a", "simulate", "--frames", 3) == 0
        assert run("simulate", "--frames", 3, "--quiet", "--out-dir", tmp_path / "b") == 0
        assert (tmp_path / "a" / "gt.csv").read_bytes() == (tmp_path / "b" / "gt.csv").read_bytes()


class TestSweep:
    def test_single_value(self, tmp_path):
        assert run("sweep", "--param", "kappa", "--values", "0.3", "--frames", 60,
                   "--out-dir", tmp_path, "--quiet") == 0
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert lines[0].startswith("kappa,MOTA,MOTP") and len(lines) == 2


class TestPlot:
    def test_empty_tracks(self, tmp_path):
        write_tracks(tmp_path / "tracks.csv", [])
        assert run("plot", "--tracks", tmp_path / "tracks.csv", "--out-dir", tmp_path, "--quiet") == 0
        svg = (tmp_path / "trajectories.svg").read_text()
        assert 'id="background"' in svg and "<polyline" not in svg

    def test_one_track(self, tmp_path):
        write_tracks(tmp_path / "tracks.csv",
                     [TrackRecord(f, 7, BoundingBox(3.0 * f, 10, 6, 3)) for f in range(10)])
        assert run("plot", "--tracks", tmp_path / "tracks.csv", "--out-dir", tmp_path, "--quiet") == 0
        svg = (tmp_path / "trajectories.svg").read_text()
        lines = re.findall(r'<polyline class="track"[^>]*points="([^"]*)"', svg)
        assert len(lines) == 1 and len(lines[0].split()) == 10

    def test_sweep_curve(self, tmp_path):
        rows = ["kappa,MOTA"] + [f"{0.1 * k!r},{0.5 + 0.01 * k}" for k in range(5)]
        (tmp_path / "sweep.csv").write_text("\n".join(rows) + "\n")
        assert run("plot", "--sweep", tmp_path / "sweep.csv", "--out-dir", tmp_path, "--quiet") == 0
        svg = (tmp_path / "sweep.svg").read_text()
        assert svg.count('class="marker"') == 5

    def test_missing_column(self, tmp_path):
        (tmp_path / "sweep.csv").write_text("kappa,MOTA\n0.1,0.5\n")
        assert run("plot", "--sweep", tmp_path / "sweep.csv", "--metric", "MOTP",
                   "--out-dir", tmp_path) == 2


def test_console_script(tmp_path):
    out = subprocess.run([sys.executable, "-m", "gbmtrack.cli", "simulate", "--frames", "2",
                          "--out-dir", str(tmp_path), "--quiet"], capture_output=True)
    assert out.returncode == 0 and (tmp_path / "gt.csv").exists()
