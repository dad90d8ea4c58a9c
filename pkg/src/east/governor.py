"""Reference governor: local safe zone, along-path nominal input, Euler update.

The governor is a first-order virtual point that the robot controller
chases. Its input is picked as the point of the reference path furthest
along while still inside the local safe zone, a ball around the governor
whose radius is the distance from the robot's reachable cone to the
inflated static obstacles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import cone_from_state, cone_to_obstacles_distance

INIT_PATH_TOLERANCE = 1e-6


@dataclass
class LocalSafeZone:
    """Ball of admissible governor inputs. radius = 0 freezes the governor."""

    center: np.ndarray
    radius: float

    def contains(self, q):
        return float(np.linalg.norm(np.asarray(q) - self.center)) <= self.radius


def local_safe_zone(state, g, grid, robot_radius, semantics="radius"):
    """Safe zone around the governor from the cone-to-obstacle distance.

    ``semantics`` selects how the distance becomes a ball radius:
    "radius" uses it directly (dimensionally consistent), "paper-literal"
    compares squared norms against it, i.e. radius sqrt(d).
    """
    g = np.asarray(g, dtype=float)
    cone = cone_from_state(state, g)
    d = cone_to_obstacles_distance(cone, grid, robot_radius)
    if semantics == "radius":
        radius = d
    elif semantics == "paper-literal":
        radius = math.sqrt(max(0.0, d))
    else:
        raise ValueError(f"unknown local safe zone semantics: {semantics!r}")
    return LocalSafeZone(g.copy(), max(0.0, radius))


def nominal_input(path, zone):
    """Furthest point of the path inside the zone, with its path parameter.

    Scans segments from the path end toward the start, solving the
    segment-circle quadratic, which realizes the literal maximum even for
    self-intersecting paths. Returns (governor position, None) when the
    path lies entirely outside the zone, which holds the governor in place.
    """
    g = zone.center
    r = zone.radius
    verts = path.vertices
    sig = path.sigmas
    if np.linalg.norm(verts[-1] - g) <= r:
        return verts[-1].copy(), 1.0
    for i in range(len(verts) - 2, -1, -1):
        p0, p1 = verts[i], verts[i + 1]
        u = p1 - p0
        a = float(u @ u)
        if a <= 0.0:
            if np.linalg.norm(p0 - g) <= r:
                return p0.copy(), float(sig[i])
            continue
        w = p0 - g
        b = 2.0 * float(w @ u)
        c = float(w @ w) - r * r
        disc = b * b - 4.0 * a * c
        if disc < -1e-12:
            continue
        disc = max(disc, 0.0)
        s_hi = (-b + math.sqrt(disc)) / (2.0 * a)
        if 0.0 <= s_hi <= 1.0:
            sigma = float(sig[i] + s_hi * (sig[i + 1] - sig[i]))
            return p0 + s_hi * u, sigma
    return g.copy(), None


def governor_step(g, u_bar, k_g, dt):
    """Forward-Euler update of the governor toward its input."""
    if k_g <= 0 or dt <= 0:
        raise ValueError("k_g and dt must be positive")
    if k_g * dt >= 1.0:
        raise ValueError(f"k_g * dt = {k_g * dt} must be < 1 for a stable update")
    g = np.asarray(g, dtype=float)
    u_bar = np.asarray(u_bar, dtype=float)
    return g + k_g * dt * (u_bar - g)


def check_init(state, g0, path, grid, robot_radius):
    """Initial-condition check: positive cone clearance and g0 at the path start."""
    g0 = np.asarray(g0, dtype=float)
    cone = cone_from_state(state, g0)
    d = cone_to_obstacles_distance(cone, grid, robot_radius)
    on_start = float(np.linalg.norm(g0 - path.eval(0.0))) <= INIT_PATH_TOLERANCE
    return d > 0.0 and on_start
