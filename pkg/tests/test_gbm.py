import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gbmtrack.gbm import (GbmConfig, KalmanConfig, TrackState, damping_factor, heading_of,
                          influence_weight, pairwise_force, predict, traffic_force, update,
                          white_accel_Q)
from gbmtrack.types import ConfigError


def plain_kalman_predict(theta, P, q):
    """Constant-velocity prediction written out component by component."""
    x, y, vx, vy = theta
    th = np.array([x + vx, y + vy, vx, vy])
    Pn = np.empty((4, 4))
    # F = [[1,0,1,0],[0,1,0,1],[0,0,1,0],[0,0,0,1]]; (F P F^T)_ab summed by hand
    rows = [(0, 2), (1, 3), (2,), (3,)]
    for a in range(4):
        for b in range(4):
            Pn[a, b] = sum(P[i, j] for i in rows[a] for j in rows[b])
    Qm = np.zeros((4, 4))
    for p_, v_ in ((0, 2), (1, 3)):
        Qm[p_, p_] = q / 4
        Qm[p_, v_] = Qm[v_, p_] = q / 2
        Qm[v_, v_] = q
    return th, Pn + Qm


def random_spd(rng, n=4):
    A = rng.normal(size=(n, n))
    return A @ A.T + n * np.eye(n)


class TestForces:
    def test_closed_forms(self):
        for s in (0.5, 8.0, 123.0):
            assert abs(pairwise_force(s, s) - math.exp(-0.5)) <= 1e-12
            assert abs(influence_weight(s, s) - math.exp(-0.5)) <= 1e-12
        assert pairwise_force(0.0, 8.0) == 1.0

    def _pred(self, pos, vel):
        return (np.array(pos, float), np.array(vel, float), heading_of(vel))

    def test_single_target_has_no_force(self):
        p = [self._pred((0, 0), (2, 0))]
        assert traffic_force(0, p, [(0, 0)], GbmConfig()) == 0.0

    def test_leader_pushes_follower_only(self):
        cfg = GbmConfig()
        p = [self._pred((0, 0), (2, 0)), self._pred((8, 0), (2, 0))]
        prev = [(-2, 0), (6, 0)]
        f0 = traffic_force(0, p, prev, cfg)
        assert f0 == pytest.approx(math.exp(-0.5) * math.exp(-0.5), abs=1e-15)
        assert traffic_force(1, p, prev, cfg) == 0.0
        both = GbmConfig(front_only=False)
        assert traffic_force(1, p, prev, both) == pytest.approx(f0)

    def test_heading_gate(self):
        cfg = GbmConfig()
        p = [self._pred((0, 0), (2, 0)), self._pred((5, 0), (0, 2))]
        assert traffic_force(0, p, [(0, 0), (5, 0)], cfg) == 0.0
        p[1] = self._pred((5, 0), (2, 2 * math.tan(math.radians(29))))
        assert traffic_force(0, p, [(0, 0), (5, 0)], cfg) > 0.0

    def test_slow_targets_neutral(self):
        p = [self._pred((0, 0), (0.3, 0)), self._pred((3, 0), (2, 0))]
        assert traffic_force(0, p, [(0, 0), (3, 0)], GbmConfig()) == 0.0
        p = [self._pred((0, 0), (2, 0)), self._pred((3, 0), (0.3, 0))]
        assert traffic_force(0, p, [(0, 0), (3, 0)], GbmConfig()) == 0.0

    @settings(max_examples=50)
    @given(st.lists(st.tuples(st.floats(-30, 30), st.floats(-30, 30), st.floats(-3, 3),
                              st.floats(-3, 3), st.floats(-2, 2), st.floats(-2, 2)),
                    min_size=1, max_size=6))
    def test_matches_direct_sum(self, rows):
        cfg = GbmConfig(front_only=False, heading_tolerance=math.pi)
        preds = [self._pred((x, y), (vx, vy)) for x, y, vx, vy, _, _ in rows]
        prevs = [(x - dx, y - dy) for x, y, _, _, dx, dy in rows]
        for i in range(len(rows)):
            expect = 0.0
            if preds[i][2] is not None:
                for j in range(len(rows)):
                    if j == i or preds[j][2] is None:
                        continue
                    d2 = (rows[i][0] - rows[j][0]) ** 2 + (rows[i][1] - rows[j][1]) ** 2
                    pd2 = sum((prevs[i][k] - prevs[j][k]) ** 2 for k in range(2))
                    expect += math.exp(-pd2 / (2 * 64.0)) * math.exp(-d2 / (2 * 64.0))
            assert traffic_force(i, preds, prevs, cfg) == pytest.approx(expect, abs=1e-12)


class TestPredict:
    @settings(max_examples=100)
    @given(st.integers(0, 2 ** 32 - 1), st.floats(0, 1))
    def test_zero_force_is_plain_kalman(self, seed, q):
        rng = np.random.default_rng(seed)
        theta, P = rng.normal(scale=10, size=4), random_spd(rng)
        k = KalmanConfig(Q=white_accel_Q(q))
        out = predict(TrackState(theta, P, 1), 0.0, k, GbmConfig())
        th, Pn = plain_kalman_predict(theta, P, q)
        assert np.allclose(out.theta, th, rtol=0, atol=1e-12)
        assert np.allclose(out.covariance, Pn, rtol=0, atol=1e-12)
        assert np.array_equal(out.prev_position, theta[:2])

    @settings(max_examples=100)
    @given(st.floats(0, 50), st.floats(0, 1), st.floats(0.01, 1))
    def test_damping_bounds(self, tf, kappa, lam_min):
        cfg = GbmConfig(kappa=kappa, lambda_min=lam_min)
        lam = damping_factor(tf, cfg)
        assert lam_min <= lam <= 1.0

    @settings(max_examples=100)
    @given(st.integers(0, 2 ** 32 - 1), st.floats(0.001, 5))
    def test_damping_slows_without_turning(self, seed, tf):
        rng = np.random.default_rng(seed)
        theta, P = rng.normal(scale=3, size=4), random_spd(rng)
        k, g = KalmanConfig(), GbmConfig(kappa=0.8)
        free = predict(TrackState(theta, P, 1), 0.0, k, g)
        damp = predict(TrackState(theta, P, 1), tf, k, g)
        lam = damping_factor(tf, g)
        assert np.allclose(damp.theta[2:], lam * free.theta[2:], atol=1e-12)
        assert np.allclose(damp.theta[:2], theta[:2] + lam * theta[2:], atol=1e-12)
        assert np.linalg.norm(damp.theta[2:]) <= np.linalg.norm(free.theta[2:]) + 1e-12

    def test_negative_force(self):
        with pytest.raises(ValueError):
            predict(TrackState(np.zeros(4), np.eye(4), 1), -0.1, KalmanConfig(), GbmConfig())

    def test_closing_pair_keeps_gap(self):
        k, g = KalmanConfig(), GbmConfig()
        lead = TrackState(np.array([10.0, 0.0, 1.0, 0.0]), np.eye(4), 1)
        tail = TrackState(np.array([0.0, 0.0, 3.0, 0.0]), np.eye(4), 2)
        preds = [(s.theta[:2] + s.theta[2:], s.theta[2:], heading_of(s.theta[2:])) for s in (lead, tail)]
        tf = traffic_force(1, preds, [lead.theta[:2], tail.theta[:2]], g)
        assert tf > 0
        plain_gap = predict(lead, 0.0, k, g).theta[0] - predict(tail, 0.0, k, g).theta[0]
        gbm_gap = predict(lead, 0.0, k, g).theta[0] - predict(tail, tf, k, g).theta[0]
        assert gbm_gap >= plain_gap


class TestUpdate:
    def test_half_gain(self):
        k = KalmanConfig(R=np.eye(2))
        s = TrackState(np.array([2.0, 4.0, 1.0, 1.0]), np.eye(4), 1)
        out = update(s, (4.0, 0.0), k)
        assert np.allclose(out.theta[:2], [3.0, 2.0], atol=1e-15)

    @settings(max_examples=100)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_trace_never_grows(self, seed):
        rng = np.random.default_rng(seed)
        P = random_spd(rng)
        R = random_spd(rng, 2)
        out = update(TrackState(rng.normal(size=4), P, 1), rng.normal(size=2), KalmanConfig(R=R))
        assert np.trace(out.covariance) <= np.trace(P) + 1e-9
        assert np.allclose(out.covariance, out.covariance.T)
        assert np.linalg.eigvalsh(out.covariance).min() > -1e-9

    def test_bad_measurement(self):
        with pytest.raises(ValueError):
            update(TrackState(np.zeros(4), np.eye(4), 1), (np.nan, 0.0), KalmanConfig())


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(sigma_d=0), dict(sigma_w=-1), dict(kappa=1.5),
                                    dict(lambda_min=0), dict(heading_tolerance=-0.1)])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            GbmConfig(**kw)

    def test_scales(self):
        k = KalmanConfig.from_scales(0.1, 2.0)
        assert np.allclose(k.R, 2 * np.eye(2))
        assert k.Q[2, 2] == pytest.approx(0.1) and k.Q[0, 2] == pytest.approx(0.05)
        with pytest.raises(ConfigError):
            KalmanConfig.from_scales(0.1, 0.0)

    def test_initial_state(self):
        s = KalmanConfig.from_scales(0.1, 3.0).initial_state((4.0, 5.0), 9, (10, 5))
        assert s.theta.tolist() == [4.0, 5.0, 0.0, 0.0]
        assert s.covariance[0, 0] == 3.0 and s.covariance[2, 2] == 25.0
        assert heading_of(s.velocity) is None
