"""Differential-drive kinematics, stabilizing control law, adaptive speed gain."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_TWO_PI = 2.0 * math.pi


def wrap_angle(theta):
    """Normalize an angle to [-pi, pi)."""
    return (theta + math.pi) % _TWO_PI - math.pi


@dataclass
class RobotState:
    """Planar pose (x, y, theta); theta kept in [-pi, pi)."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        self.theta = wrap_angle(self.theta)

    @property
    def position(self):
        return np.array([self.x, self.y])


@dataclass
class ControlInput:
    v: float
    omega: float


def tracking_errors(state, g):
    """Longitudinal and lateral components of (g - p) in the body frame."""
    dx = g[0] - state.x
    dy = g[1] - state.y
    c, s = math.cos(state.theta), math.sin(state.theta)
    e_v = c * dx + s * dy
    e_perp = -s * dx + c * dy
    return e_v, e_perp


def control_law(state, g, k_v, k_omega, v_max=2.0, omega_max=4.0):
    """Point-stabilizing controller toward g with saturation.

    v is proportional to the longitudinal error; omega steers by the
    arctangent of the lateral-to-longitudinal error ratio, which commands
    reverse motion when the target is behind the robot. omega is 0 exactly
    at the target; with a purely lateral error the angle takes its
    +-pi/2 limit.
    """
    e_v, e_perp = tracking_errors(state, g)
    if math.hypot(e_v, e_perp) <= 1e-12:
        return ControlInput(0.0, 0.0)
    if e_v == 0.0:
        angle = math.copysign(math.pi / 2.0, e_perp)
    else:
        angle = math.atan(e_perp / e_v)
    v = k_v * e_v
    omega = k_omega * angle
    v = max(-v_max, min(v_max, v))
    omega = max(-omega_max, min(omega_max, omega))
    return ControlInput(v, omega)


def adaptive_gain(d_q, d, q1, q2):
    """Speed gain from the ratio of directional to Euclidean obstacle distance.

    Falls back to 1 when the Euclidean distance is zero, and is clamped to
    [sqrt(q1), sqrt(q2)] as a numerical guard.
    """
    if d <= 0.0:
        return 1.0
    ratio = d_q / d
    return max(math.sqrt(q1), min(math.sqrt(q2), ratio))


def integrate(state, u, dt):
    """One RK4 step of the unicycle kinematics under a constant input."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    v, w = u.v, u.omega
    t0 = state.theta
    t1 = t0 + 0.5 * dt * w
    t2 = t0 + dt * w
    kx = v * (math.cos(t0) + 4.0 * math.cos(t1) + math.cos(t2)) / 6.0
    ky = v * (math.sin(t0) + 4.0 * math.sin(t1) + math.sin(t2)) / 6.0
    return RobotState(state.x + dt * kx, state.y + dt * ky, t0 + dt * w)
