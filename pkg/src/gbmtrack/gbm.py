"""Kalman prediction constrained by the traffic force between vehicles.

Each vehicle feels a repulsive "traffic force" from same-direction
neighbours ahead of it. The force is a sum of Gaussian kernels of the
distance between predicted positions, each weighted by an influence term
computed from the previous frame's predicted positions. During prediction
the force damps the vehicle's velocity: it decelerates when crowded and the
filter reduces to a plain constant-velocity Kalman filter when alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence, Tuple

import numpy as np

from .types import ConfigError

# Below this speed (px/frame) a track has no usable heading.
MIN_HEADING_SPEED = 0.5


class TrackStatus(str, Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    DEAD = "dead"


@dataclass(frozen=True)
class TrackState:
    theta: np.ndarray  # (px, py, vx, vy)
    covariance: np.ndarray
    track_id: int
    age: int = 0
    misses: int = 0
    hits: int = 1
    status: TrackStatus = TrackStatus.TENTATIVE
    box_size: Tuple[float, float] = (1.0, 1.0)
    # corrected position before the latest prediction; None at birth
    prev_position: np.ndarray | None = None

    @property
    def position(self) -> np.ndarray:
        return self.theta[:2]

    @property
    def velocity(self) -> np.ndarray:
        return self.theta[2:]

    @property
    def speed(self) -> float:
        return float(math.hypot(self.theta[2], self.theta[3]))

    @property
    def alive(self) -> bool:
        return self.status is not TrackStatus.DEAD


@dataclass
class GbmConfig:
    sigma_d: float = 8.0
    # influence radius; 8.0 px gave the best localisation in the original tuning
    sigma_w: float = 8.0
    kappa: float = 0.3
    lambda_min: float = 0.1
    heading_tolerance: float = math.radians(30.0)
    front_only: bool = True
    # stopped tracks keep the heading they last moved with
    remember_heading: bool = False

    def __post_init__(self):
        if self.sigma_d <= 0 or self.sigma_w <= 0:
            raise ConfigError("sigma_d and sigma_w must be positive")
        if not 0.0 <= self.kappa <= 1.0:
            raise ConfigError("kappa must lie in [0, 1]")
        if not 0.0 < self.lambda_min <= 1.0:
            raise ConfigError("lambda_min must lie in (0, 1]")
        if self.heading_tolerance < 0:
            raise ConfigError("heading_tolerance must be >= 0")


def constant_velocity_F(dt: float = 1.0) -> np.ndarray:
    F = np.eye(4)
    F[0, 2] = F[1, 3] = dt
    return F


def white_accel_Q(q: float, dt: float = 1.0) -> np.ndarray:
    """Process noise for a piecewise-constant white acceleration of variance q."""
    g = np.array([[dt ** 4 / 4, dt ** 3 / 2], [dt ** 3 / 2, dt ** 2]]) * q
    Q = np.zeros((4, 4))
    Q[np.ix_([0, 2], [0, 2])] = g  # x, vx
    Q[np.ix_([1, 3], [1, 3])] = g  # y, vy
    return Q


@dataclass
class KalmanConfig:
    F: np.ndarray = field(default_factory=constant_velocity_F)
    B: np.ndarray = field(default_factory=lambda: np.zeros((4, 1)))
    u: np.ndarray = field(default_factory=lambda: np.zeros(1))
    Q: np.ndarray = field(default_factory=lambda: white_accel_Q(0.05))
    H: np.ndarray = field(default_factory=lambda: np.eye(2, 4))
    R: np.ndarray = field(default_factory=lambda: np.eye(2) * 4.0)
    init_velocity_var: float = 25.0

    @classmethod
    def from_scales(cls, q_scale: float = 0.05, r_scale: float = 4.0) -> "KalmanConfig":
        if q_scale < 0 or r_scale <= 0:
            raise ConfigError("q_scale must be >= 0 and r_scale > 0")
        return cls(Q=white_accel_Q(q_scale), R=np.eye(2) * r_scale)

    def initial_state(self, position, track_id: int, box_size) -> TrackState:
        P = np.zeros((4, 4))
        P[:2, :2] = self.R
        P[2, 2] = P[3, 3] = self.init_velocity_var
        theta = np.array([position[0], position[1], 0.0, 0.0], dtype=float)
        return TrackState(theta, P, track_id, box_size=tuple(box_size))


def pairwise_force(d: float, sigma_d: float) -> float:
    return math.exp(-d * d / (2.0 * sigma_d * sigma_d))


def influence_weight(prev_dist: float, sigma_w: float) -> float:
    return math.exp(-prev_dist * prev_dist / (2.0 * sigma_w * sigma_w))


def _angle_diff(a: float, b: float) -> float:
    d = (a - b) % (2.0 * math.pi)
    return min(d, 2.0 * math.pi - d)


def traffic_force(i: int, predictions: Sequence, prev_predictions: Sequence,
                  cfg: GbmConfig) -> float:
    """Total force on target ``i``.

    ``predictions`` holds ``(position, velocity, heading)`` per target, with
    ``heading`` ``None`` for targets too slow to have one. ``prev_predictions``
    holds the previous frame's predicted positions, index-aligned.
    """
    pos_i, vel_i, head_i = predictions[i]
    if head_i is None:
        return 0.0
    pi = np.asarray(pos_i, dtype=float)
    prev_i = np.asarray(prev_predictions[i], dtype=float)
    total = 0.0
    for j, (pos_j, _vel_j, head_j) in enumerate(predictions):
        if j == i or head_j is None:
            continue
        if _angle_diff(head_i, head_j) > cfg.heading_tolerance:
            continue
        pj = np.asarray(pos_j, dtype=float)
        if cfg.front_only and float(np.dot(pj - pi, np.asarray(vel_i, dtype=float))) <= 0.0:
            continue
        d = float(np.hypot(*(pi - pj)))
        prev_d = float(np.hypot(*(prev_i - np.asarray(prev_predictions[j], dtype=float))))
        total += influence_weight(prev_d, cfg.sigma_w) * pairwise_force(d, cfg.sigma_d)
    return total


def heading_of(velocity) -> float | None:
    vx, vy = float(velocity[0]), float(velocity[1])
    if math.hypot(vx, vy) < MIN_HEADING_SPEED:
        return None
    return math.atan2(vy, vx)


def damping_factor(tf: float, cfg: GbmConfig) -> float:
    return max(1.0 - cfg.kappa * min(tf, 1.0), cfg.lambda_min)


def predict(state: TrackState, tf: float, kcfg: KalmanConfig, gcfg: GbmConfig) -> TrackState:
    """One prediction step with velocity damped by the traffic force.

    With ``tf == 0`` this is exactly the standard Kalman prediction.
    """
    if tf < 0:
        raise ValueError("traffic force must be non-negative")
    theta = kcfg.F @ state.theta + kcfg.B @ kcfg.u
    P = kcfg.F @ state.covariance @ kcfg.F.T
    if tf > 0:
        lam = damping_factor(tf, gcfg)
        prior_pos = state.theta[:2]
        # re-advance the position with the damped velocity
        step = theta[:2] - prior_pos - theta[2:]
        theta = theta.copy()
        theta[2:] *= lam
        theta[:2] = prior_pos + step + theta[2:]
        L = np.diag([1.0, 1.0, lam, lam])
        P = L @ P @ L.T
    P = P + kcfg.Q
    return replace(state, theta=theta, covariance=P, age=state.age + 1,
                   prev_position=state.theta[:2].copy())


def update(state: TrackState, measurement, kcfg: KalmanConfig) -> TrackState:
    z = np.asarray(measurement, dtype=float)
    if z.shape != (2,) or not np.all(np.isfinite(z)):
        raise ValueError("measurement must be a finite (px, py) pair")
    H, R, P = kcfg.H, kcfg.R, state.covariance
    y = z - H @ state.theta
    S = H @ P @ H.T + R
    K = np.linalg.solve(S, H @ P).T
    theta = state.theta + K @ y
    # Joseph form keeps the posterior symmetric PSD
    I_KH = np.eye(4) - K @ H
    P_new = I_KH @ P @ I_KH.T + K @ R @ K.T
    P_new = 0.5 * (P_new + P_new.T)
    return replace(state, theta=theta, covariance=P_new)
