import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gbmtrack.io import write_pgm
from gbmtrack.parts import (DEFAULT_ETA, DetectorConfig, PartModel, deformation_cost, detect_frame,
                            load_part_model, nms, save_part_model, score_hypothesis, score_map)
from gbmtrack.types import BoundingBox, ConfigError, DataFormatError, iou


def joint_bruteforce(model: PartModel, x: int, y: int) -> float:
    """Max over every joint placement of all parts; independent of the library.

    Each joint placement is summed root first, then parts in order, then
    bias. Rounded addition is monotone, so the maximum of these sums is
    exactly what a per-part maximisation summed in the same order gives.
    """
    H, W = model.root_response.shape
    r = model.search_radius
    choices = []
    for resp, (ax, ay), (a1, a2, a3, a4) in zip(model.part_responses, model.anchors,
                                                  model.deform_coeffs):
        opts = []
        for dx in range(-r, r + 1):
            for dy in range(-r, r + 1):
                px, py = x + ax + dx, y + ay + dy
                if 0 <= px < W and 0 <= py < H:
                    d = max(0.0, a1 * dx * dx + a2 * dx + a3 * dy * dy + a4 * dy)
                    opts.append(resp[py, px] - d)
        choices.append(opts or [0.0])
    best = -np.inf
    for combo in itertools.product(*choices):
        total = float(model.root_response[y, x])
        for c in combo:
            total += c
        best = max(best, total + model.bias)
    return best


def random_model(rng, n_parts, radius, shape=(7, 8)):
    H, W = shape
    return PartModel(
        root_response=rng.normal(size=shape),
        part_responses=[rng.normal(size=shape) for _ in range(n_parts)],
        anchors=[tuple(int(v) for v in rng.integers(-3, 4, size=2)) for _ in range(n_parts)],
        deform_coeffs=[(float(rng.uniform(0, 1)), float(rng.normal()), float(rng.uniform(0, 1)),
                        float(rng.normal())) for _ in range(n_parts)],
        search_radius=radius,
        bias=float(rng.normal()),
    )


class TestScoreHypothesis:
    def test_root_only(self):
        m = PartModel(np.full((3, 3), 1.4), bias=-0.5)
        assert score_hypothesis(m, (1, 1)) == pytest.approx(0.9, abs=1e-15)

    def test_forced_placement(self):
        root = np.zeros((5, 5))
        root[2, 2] = 1.0
        part = np.zeros((5, 5))
        part[2, 3] = 0.5
        m = PartModel(root, [part], [(1, 0)], [(1.0, 0.0, 1.0, 0.0)], search_radius=0)
        assert score_hypothesis(m, (2, 2)) == 1.5

    def test_single_part_radius_one(self):
        rng = np.random.default_rng(3)
        m = random_model(rng, 1, 1)
        for x, y in [(0, 0), (3, 3), (7, 6)]:
            assert score_hypothesis(m, (x, y)) == joint_bruteforce(m, x, y)

    def test_out_of_grid(self):
        m = PartModel(np.zeros((3, 4)))
        with pytest.raises(ValueError, match="location outside response grid"):
            score_hypothesis(m, (4, 0))
        with pytest.raises(ValueError, match="location outside response grid"):
            score_hypothesis(m, (0, -1))

    def test_part_with_no_valid_placement_contributes_zero(self):
        m = PartModel(np.ones((3, 3)), [np.full((3, 3), 9.0)], [(10, 10)], [(0, 0, 0, 0)],
                      search_radius=1)
        assert score_hypothesis(m, (1, 1)) == 1.0

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(0, 2), st.integers(0, 2))
    def test_matches_joint_enumeration(self, seed, n_parts, radius):
        rng = np.random.default_rng(seed)
        m = random_model(rng, n_parts, radius)
        for y in range(m.shape[0]):
            for x in range(m.shape[1]):
                assert score_hypothesis(m, (x, y)) == joint_bruteforce(m, x, y)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(0, 3), st.integers(0, 2))
    def test_score_map_agrees(self, seed, n_parts, radius):
        rng = np.random.default_rng(seed)
        m = random_model(rng, n_parts, radius)
        S = score_map(m)
        for y in range(m.shape[0]):
            for x in range(m.shape[1]):
                assert S[y, x] == score_hypothesis(m, (x, y))

    @given(st.integers(0, 2 ** 32 - 1), st.floats(-3, 3))
    def test_bias_shift(self, seed, c):
        rng = np.random.default_rng(seed)
        m = random_model(rng, 2, 1)
        m2 = PartModel(m.root_response, m.part_responses, m.anchors, m.deform_coeffs,
                       m.search_radius, m.bias + c)
        assert np.allclose(score_map(m2) - score_map(m), c, atol=1e-12)

    def test_deformation_cost_clamped(self):
        assert deformation_cost((0.0, -1.0, 0.0, 0.0), (2, 0)) == 0.0
        assert deformation_cost((1.0, 0.5, 2.0, 0.0), (1, -1)) == 3.5


def nms_bruteforce(boxes, scores, thr):
    keep = []
    for k in sorted(range(len(boxes)), key=lambda k: (-scores[k], k)):
        if not any(iou(boxes[k], boxes[j]) > thr for j in keep):
            keep.append(k)
    return keep


class TestDetect:
    def test_nothing_above_eta(self):
        m = PartModel(np.full((10, 10), -2.0))
        assert detect_frame(m, DetectorConfig()) == []

    def test_single_peak(self):
        root = np.full((20, 30), -2.0)
        root[9, 14] = 0.3
        dets = detect_frame(PartModel(root), DetectorConfig(box_size=(6, 4)), frame=4)
        assert len(dets) == 1
        d = dets[0]
        assert d.frame == 4 and d.score == 0.3
        assert d.box.center == (14.5, 9.5)
        assert (d.box.w, d.box.h) == (6, 4)

    def test_two_close_peaks_suppressed(self):
        root = np.full((20, 40), -2.0)
        root[10, 10] = 0.5
        root[10, 11] = 0.4  # 10x4 boxes 1 px apart: IoU 0.818
        dets = detect_frame(PartModel(root), DetectorConfig(box_size=(10, 4)))
        assert [d.score for d in dets] == [0.5]

    def test_output_sorted_by_score(self):
        rng = np.random.default_rng(0)
        dets = detect_frame(random_model(rng, 1, 1, (30, 30)), DetectorConfig(eta=-1.0, box_size=(4, 4)))
        scores = [d.score for d in dets]
        assert scores == sorted(scores, reverse=True)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20), st.integers(2, 8),
                              st.integers(2, 8), st.floats(-1, 1)), max_size=12),
           st.floats(0.1, 0.9))
    def test_nms_matches_bruteforce(self, rows, thr):
        boxes = [BoundingBox(x, y, w, h) for x, y, w, h, _ in rows]
        scores = [s for *_, s in rows]
        assert nms(boxes, scores, thr) == nms_bruteforce(boxes, scores, thr)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.floats(-1.5, 0.5), st.floats(0.0, 1.0))
    def test_eta_monotone(self, seed, eta, gap):
        rng = np.random.default_rng(seed)
        m = random_model(rng, 1, 1, (16, 16))
        S = score_map(m)
        lo, hi = eta, eta + gap
        assert set(zip(*np.nonzero(S > hi))) <= set(zip(*np.nonzero(S > lo)))
        a = detect_frame(m, DetectorConfig(eta=lo, box_size=(4, 3)))
        b = detect_frame(m, DetectorConfig(eta=hi, box_size=(4, 3)))
        assert len(a) >= len(b)

    def test_default_eta(self):
        assert DetectorConfig().eta == DEFAULT_ETA == -0.78


class TestModelValidationAndIo:
    def test_shape_mismatch(self):
        with pytest.raises(ConfigError):
            PartModel(np.zeros((3, 3)), [np.zeros((3, 4))], [(0, 0)], [(0, 0, 0, 0)])

    def test_negative_quadratic(self):
        with pytest.raises(ConfigError):
            PartModel(np.zeros((3, 3)), [np.zeros((3, 3))], [(0, 0)], [(-1, 0, 0, 0)])

    def test_descriptor(self, tmp_path):
        write_pgm(tmp_path / "root.pgm", np.full((4, 5), 100))
        write_pgm(tmp_path / "p.pgm", np.full((4, 5), 50))
        (tmp_path / "m.json").write_text(json.dumps({
            "root": {"path": "root.pgm", "scale": 0.01, "offset": -1.0},
            "parts": [{"anchor": [1, 0], "coeffs": [0.1, 0, 0.1, 0], "response_path": "p.pgm",
                       "scale": 0.02, "offset": 0.0, "id": "front"}],
            "bias": 0.25, "search_radius": 1}))
        m = load_part_model(tmp_path / "m.json")
        assert m.part_ids == ["front"]
        assert score_hypothesis(m, (0, 0)) == pytest.approx(0.0 + 1.0 + 0.25)

    def test_save_load_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        m = random_model(rng, 2, 1)
        m.root_response = np.clip(m.root_response, -1.9, 0.5)
        m.part_responses = [np.clip(r, -1.9, 0.5) for r in m.part_responses]
        save_part_model(tmp_path / "000003.json", m)
        back = load_part_model(tmp_path / "000003.json")
        assert np.abs(back.root_response - m.root_response).max() <= 0.005 + 1e-12
        assert back.anchors == m.anchors and back.search_radius == m.search_radius

    def test_bad_descriptor(self, tmp_path):
        (tmp_path / "m.json").write_text('{"parts": []}')
        with pytest.raises(DataFormatError):
            load_part_model(tmp_path / "m.json")
