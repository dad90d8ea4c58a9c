"""Barrier constraints for moving obstacles and the governor-input projection.

Each moving obstacle yields one constraint, linear in the governor input,
that keeps a separation certificate nonnegative along the closed loop.
The final input is the point closest to the nominal governor input that
satisfies every constraint and stays inside the local safe zone disk; for
two decision variables this projection is solved exactly by enumerating
candidate active sets.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

UNMODIFIED = "unmodified"
MODIFIED = "modified"
FALLBACK = "fallback"

_FEAS_TOL = 1e-9
_ACTIVE_TOL = 1e-6
_DEGENERATE_GAP = 1e-6  # below this, (g - p)/|g - p| is replaced by 0


@dataclass
class MovingObstacle:
    """Ball obstacle with a measured position and constant-velocity estimate."""

    position: np.ndarray
    velocity: np.ndarray
    radius: float

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)
        if self.radius <= 0:
            raise ValueError("obstacle radius must be positive")


@dataclass
class CbfConstraint:
    """Affine-in-input safety condition a . u + b >= 0 for one obstacle."""

    a: np.ndarray
    b: float
    obstacle_id: int = -1

    def value(self, u):
        return float(self.a @ np.asarray(u)) + self.b


@dataclass
class SafeInputResult:
    u: np.ndarray
    status: str
    active_ids: list = field(default_factory=list)
    solve_time: float = 0.0


def cbf_value(state, g, obstacle, robot_radius):
    """Separation certificate: squared center gap minus squared radii sum.

    Nonnegative exactly when the governor-centered ball containing the
    robot is separated from the inflated obstacle ball.
    """
    g = np.asarray(g, dtype=float)
    gap = float(np.linalg.norm(g - obstacle.position))
    reach = obstacle.radius + robot_radius + float(np.linalg.norm(g - state.position))
    return gap * gap - reach * reach


def cbf_constraint(state, g, obstacle, robot_radius, k_g, gamma, u_robot, obstacle_id=-1):
    """Linear-in-input form of the barrier condition for one moving obstacle.

    The certificate derivative is taken along the closed-loop dynamics:
    the governor relaxes toward its input at rate k_g, the robot moves with
    its currently commanded (saturated) velocity, and the obstacle moves
    with its measured velocity. The decay term gamma * h^2 is extended as
    sign(h) * gamma * h^2 so it pushes back toward safety when h < 0.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    g = np.asarray(g, dtype=float)
    p = state.position
    rel = g - obstacle.position
    gap = g - p
    gap_norm = float(np.linalg.norm(gap))
    n = gap / gap_norm if gap_norm > _DEGENERATE_GAP else np.zeros(2)
    reach = obstacle.radius + robot_radius + gap_norm
    h = float(rel @ rel) - reach * reach

    dh_dg = 2.0 * rel - 2.0 * reach * n
    dh_dp = 2.0 * reach * n
    dh_dpi = -2.0 * rel
    p_dot = u_robot.v * np.array([math.cos(state.theta), math.sin(state.theta)])
    alpha = math.copysign(gamma * h * h, h)
    a = k_g * dh_dg
    b = float(-k_g * (dh_dg @ g) + dh_dp @ p_dot + dh_dpi @ obstacle.velocity) + alpha
    return CbfConstraint(a, b, obstacle_id)


def _feasible(u, constraints, center, radius):
    for c in constraints:
        if c.value(u) < -_FEAS_TOL:
            return False
    return float(np.linalg.norm(u - center)) <= radius + _FEAS_TOL


def _line_circle_points(c, center, radius):
    a = c.a
    nn = float(a @ a)
    if nn <= 0.0:
        return []
    foot = center - a * (c.value(center)) / nn
    gap2 = radius * radius - float((foot - center) @ (foot - center))
    if gap2 < 0.0:
        return []
    tang = np.array([-a[1], a[0]]) / math.sqrt(nn)
    off = math.sqrt(max(0.0, gap2))
    return [foot + off * tang, foot - off * tang]


def solve_safe_input(u_g, zone, constraints):
    """Project the nominal governor input onto the feasible set.

    Exact for this 2-D geometry: the optimum has at most two active linear
    constraints plus possibly the disk, so enumerating projections onto
    lines, line intersections, the circle, and line-circle intersections
    and keeping the feasible candidate nearest u_g recovers the global
    minimizer. An infeasible problem falls back to minimizing the summed
    squared constraint violation over the disk alone, flagged as such.
    """
    t0 = time.perf_counter()
    u_g = np.asarray(u_g, dtype=float)
    center = zone.center
    radius = max(0.0, zone.radius)

    if _feasible(u_g, constraints, center, radius):
        return SafeInputResult(
            u_g.copy(), UNMODIFIED, _active_ids(u_g, constraints),
            time.perf_counter() - t0,
        )

    candidates = []
    if radius == 0.0:
        candidates.append(center.copy())
    else:
        gap = float(np.linalg.norm(u_g - center))
        if gap > radius:
            candidates.append(center + radius * (u_g - center) / gap)
    for i, ci in enumerate(constraints):
        nn = float(ci.a @ ci.a)
        if nn <= 0.0:
            continue
        candidates.append(u_g - ci.a * ci.value(u_g) / nn)
        candidates.extend(_line_circle_points(ci, center, radius))
        for cj in constraints[i + 1:]:
            det = ci.a[0] * cj.a[1] - ci.a[1] * cj.a[0]
            scale = math.sqrt(nn) * float(np.linalg.norm(cj.a))
            if abs(det) <= 1e-12 * max(scale, 1.0):
                continue
            x = (-ci.b * cj.a[1] + cj.b * ci.a[1]) / det
            y = (-cj.b * ci.a[0] + ci.b * cj.a[0]) / det
            candidates.append(np.array([x, y]))

    best, best_d = None, math.inf
    for u in candidates:
        if not _feasible(u, constraints, center, radius):
            continue
        d = float(np.linalg.norm(u - u_g))
        if d < best_d:
            best, best_d = u, d
    if best is not None:
        return SafeInputResult(
            best, MODIFIED, _active_ids(best, constraints), time.perf_counter() - t0
        )

    u = _least_violation(u_g, constraints, center, radius)
    return SafeInputResult(u, FALLBACK, [], time.perf_counter() - t0)


def _active_ids(u, constraints):
    ids = []
    for c in constraints:
        norm = float(np.linalg.norm(c.a))
        if norm > 0 and abs(c.value(u)) / norm <= _ACTIVE_TOL:
            ids.append(c.obstacle_id)
    return ids


def _least_violation(u_g, constraints, center, radius, iterations=100):
    """Projected gradient on the summed squared violations over the disk.

    Keeps the static-safety disk hard while softening the obstacle
    constraints, so static clearance is never traded away.
    """
    def project(u):
        gap = float(np.linalg.norm(u - center))
        if gap <= radius or gap == 0.0:
            return u
        return center + radius * (u - center) / gap

    lipschitz = 2.0 * sum(float(c.a @ c.a) for c in constraints)
    step = 1.0 / lipschitz if lipschitz > 0 else 0.0
    u = project(u_g.copy())
    for _ in range(iterations):
        grad = np.zeros(2)
        for c in constraints:
            s = c.value(u)
            if s < 0:
                grad += 2.0 * s * c.a
        if step == 0.0 or float(np.linalg.norm(grad)) < 1e-14:
            break
        u = project(u - step * grad)
    return u


def brute_force_oracle(u_g, zone, constraints, step):
    """Exhaustive disk-lattice search for the feasible point nearest u_g.

    Scans the lattice anchored at the zone center in growing windows
    around u_g; once a feasible point is found, every lattice point that
    could still be nearer lies inside the already-scanned window, so the
    result equals a full-disk scan. Returns None when no lattice point is
    feasible.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    u_g = np.asarray(u_g, dtype=float)
    center = zone.center
    radius = zone.radius
    if not math.isfinite(radius):
        raise ValueError("oracle needs a finite zone radius")
    n_max = int(math.floor(radius / step))

    def scan(lo_i, hi_i, lo_j, hi_j, exclude=None):
        jj = np.arange(lo_j, hi_j + 1)
        best_pt, best_dist = None, math.inf
        chunk = max(1, 4_000_000 // max(1, len(jj)))
        for i0 in range(lo_i, hi_i + 1, chunk):
            ii = np.arange(i0, min(i0 + chunk, hi_i + 1))
            gi, gj = np.meshgrid(ii, jj, indexing="ij")
            gi = gi.ravel()
            gj = gj.ravel()
            if exclude is not None:
                keep = ~((gi >= exclude[0]) & (gi <= exclude[1])
                         & (gj >= exclude[2]) & (gj <= exclude[3]))
                gi, gj = gi[keep], gj[keep]
            pts = np.stack([center[0] + gi * step, center[1] + gj * step], axis=1)
            ok = np.linalg.norm(pts - center, axis=1) <= radius + 1e-12
            for c in constraints:
                ok &= pts @ c.a + c.b >= -_FEAS_TOL
            pts = pts[ok]
            if len(pts) == 0:
                continue
            d = np.linalg.norm(pts - u_g, axis=1)
            k = int(np.argmin(d))
            if d[k] < best_dist:
                best_pt, best_dist = pts[k], float(d[k])
        return best_pt, best_dist

    ci = (u_g[0] - center[0]) / step
    cj = (u_g[1] - center[1]) / step
    best, best_d = None, math.inf
    prev_box = None
    half = 8
    while True:
        lo_i = max(-n_max, int(math.floor(ci - half)))
        hi_i = min(n_max, int(math.ceil(ci + half)))
        lo_j = max(-n_max, int(math.floor(cj - half)))
        hi_j = min(n_max, int(math.ceil(cj + half)))
        cand, d = scan(lo_i, hi_i, lo_j, hi_j, exclude=prev_box)
        if d < best_d:
            best, best_d = cand, d
        # Any lattice point nearer than (half - 1) steps in Euclidean
        # distance lies inside the scanned window, so the best found is
        # globally nearest once best_d clears that bound.
        full = lo_i == -n_max and hi_i == n_max and lo_j == -n_max and hi_j == n_max
        if best is not None and best_d <= (half - 1) * step:
            return best
        if full:
            return best
        prev_box = (lo_i, hi_i, lo_j, hi_j)
        half *= 2
