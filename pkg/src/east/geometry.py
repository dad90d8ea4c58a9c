"""Cone-shaped reachable sets and Euclidean / directional distances to obstacles.

The closed-loop reachable set of the tracked robot is the convex hull of
its position (apex) and a disk around the target point. Distances from
grid obstacles to that hull drive both the governor's safe zone and the
speed gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gridmap import NO_OBSTACLE_DISTANCE

_EPS = 1e-12


@dataclass(frozen=True)
class ConeSet:
    """Convex hull of an apex point and a disk: {a + t(z - a), z in B_r(b)}.

    Degenerates to the segment [a, b] when r = 0 and to a point when the
    apex and center coincide with r = 0.
    """

    apex: np.ndarray
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "apex", np.asarray(self.apex, dtype=float))
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius < 0:
            raise ValueError("cone radius must be >= 0")


def cone_from_state(state, g):
    """Reachable-set cone for a robot state tracking target g.

    The disk radius is the magnitude of the lateral tracking error, i.e.
    the component of (g - p) orthogonal to the heading.
    """
    g = np.asarray(g, dtype=float)
    d = g - state.position
    e_perp = -math.sin(state.theta) * d[0] + math.cos(state.theta) * d[1]
    return ConeSet(state.position, g, abs(e_perp))


def _tangent_points(a, b, r, span):
    """Both tangent points on the disk boundary as seen from the apex."""
    u = (a - b) / span
    u_perp = np.array([-u[1], u[0]])
    cos_t = r / span
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    t1 = b + r * (cos_t * u + sin_t * u_perp)
    t2 = b + r * (cos_t * u - sin_t * u_perp)
    return t1, t2


def _segment_distances(points, p0, p1):
    """Distances from (N, 2) points to the segment [p0, p1]."""
    d = p1 - p0
    dd = float(d @ d)
    if dd <= _EPS:
        return np.linalg.norm(points - p0, axis=1)
    t = np.clip((points - p0) @ d / dd, 0.0, 1.0)
    proj = p0 + t[:, None] * d
    return np.linalg.norm(points - proj, axis=1)


def points_to_cone_distance(points, cone):
    """Exact Euclidean distances from (N, 2) points to a cone set.

    Interior points get 0. Outside the set the nearest boundary feature is
    one of the two apex-to-disk tangent segments or the disk itself; the
    minimum over those subsets equals the hull distance.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    a, b, r = cone.apex, cone.center, cone.radius
    span = float(np.linalg.norm(b - a))
    to_center = np.linalg.norm(points - b, axis=1)
    if span <= r + _EPS:
        # Apex inside (or on) the disk: the hull is the disk alone.
        return np.maximum(0.0, to_center - r)
    t1, t2 = _tangent_points(a, b, r, span)
    d1 = _segment_distances(points, a, t1)
    d2 = _segment_distances(points, a, t2)
    dist = np.minimum(np.minimum(d1, d2), to_center - r)
    # Containment: inside the disk, or inside the apex-tangent triangle.
    v1, v2, v3 = t1 - a, t2 - t1, a - t2
    s1 = v1[0] * (points[:, 1] - a[1]) - v1[1] * (points[:, 0] - a[0])
    s2 = v2[0] * (points[:, 1] - t1[1]) - v2[1] * (points[:, 0] - t1[0])
    s3 = v3[0] * (points[:, 1] - t2[1]) - v3[1] * (points[:, 0] - t2[0])
    in_tri = ((s1 >= 0) & (s2 >= 0) & (s3 >= 0)) | ((s1 <= 0) & (s2 <= 0) & (s3 <= 0))
    inside = in_tri | (to_center <= r)
    return np.where(inside, 0.0, np.maximum(0.0, dist))


def point_to_cone_distance(z, cone):
    """Euclidean distance from a single point to a cone set (0 if inside)."""
    return float(points_to_cone_distance(np.asarray(z, dtype=float)[None, :], cone)[0])


def cone_boundary_points(cone, n=64):
    """Sample n points along the cone boundary (apex and tangents included)."""
    a, b, r = cone.apex, cone.center, cone.radius
    span = float(np.linalg.norm(b - a))
    if span <= _EPS and r <= _EPS:
        return a[None, :].copy()
    if span <= r + _EPS:
        ang = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
        return b + r * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if r <= _EPS:
        t = np.linspace(0.0, 1.0, n)
        return a + t[:, None] * (b - a)
    t1, t2 = _tangent_points(a, b, r, span)
    # Far arc from t1 to t2 (the side away from the apex).
    u = (a - b) / span
    base = math.atan2(u[1], u[0])
    half = math.acos(min(1.0, r / span))
    tan_len = math.sqrt(max(0.0, span * span - r * r))
    arc_len = r * 2.0 * (math.pi - half)
    total = arc_len + 2.0 * tan_len
    n_arc = max(2, int(round(n * arc_len / total)))
    n_seg = max(2, (n - n_arc) // 2 + 1)
    ang = base + np.linspace(half, 2.0 * math.pi - half, n_arc)
    arc = b + r * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    t = np.linspace(0.0, 1.0, n_seg)[:-1, None]
    seg1 = a + t * (t1 - a)
    seg2 = t2 + t * (a - t2)
    return np.vstack([seg1, arc[::-1], seg2])


@dataclass(frozen=True)
class DirectionalMetric:
    """Quadratic norm weighting the heading axis by q1 and the lateral by q2."""

    heading: np.ndarray
    q1: float
    q2: float

    def __post_init__(self):
        v = np.asarray(self.heading, dtype=float)
        norm = np.linalg.norm(v)
        if norm <= _EPS:
            raise ValueError("heading vector must be nonzero")
        if not (self.q2 >= self.q1 > 0):
            raise ValueError("directional weights need q2 >= q1 > 0")
        object.__setattr__(self, "heading", v / norm)

    @property
    def matrix(self):
        v = self.heading
        return self.q2 * np.eye(2) + (self.q1 - self.q2) * np.outer(v, v)

    def norms(self, vectors):
        """Q-norms of an (N, 2) array of vectors."""
        vectors = np.atleast_2d(vectors)
        along = vectors @ self.heading
        sq = self.q2 * np.einsum("ij,ij->i", vectors, vectors) + (self.q1 - self.q2) * along**2
        return np.sqrt(np.maximum(sq, 0.0))

    @classmethod
    def from_heading_angle(cls, theta, q1, q2):
        return cls(np.array([math.cos(theta), math.sin(theta)]), q1, q2)


def cone_to_obstacles_distance(cone, grid, robot_radius):
    """Distance from the cone to the inflated occupied space of a grid.

    Obstacles are the occupied cell centers inflated by the robot radius
    plus half a cell diagonal; the result is clamped at 0. Returns the
    no-obstacle sentinel on grids without occupied cells. The grid's
    distance field prunes the candidate cells before the exact pass.
    """
    centers = grid.occupied_cell_centers()
    if len(centers) == 0:
        return NO_OBSTACLE_DISTANCE
    inflation = robot_radius + grid.half_diagonal
    from_apex = np.linalg.norm(centers - cone.apex, axis=1)
    field = grid.distance_field()
    ax, ay = grid.world_to_cell(cone.apex)
    reach = float(np.linalg.norm(cone.center - cone.apex)) + cone.radius
    if grid.in_bounds(ax, ay):
        # Nearest center is within the field value at the apex cell plus the
        # apex's offset inside that cell; anything farther than that bound
        # plus the cone extent cannot attain the minimum.
        bound = field.at_cell(ax, ay) + grid.half_diagonal + reach
        mask = from_apex <= bound + grid.resolution
        if mask.any():
            centers = centers[mask]
    dists = points_to_cone_distance(centers, cone)
    return max(0.0, float(dists.min()) - inflation)


def directional_cone_distance(cone, grid, metric, robot_radius, n_boundary=64):
    """Directional (Q-norm) distance from the cone to the inflated obstacles.

    Computed over a boundary discretization of the cone, inflated by
    sqrt(q2) times the robot inflation so the result stays a lower bound.
    Only used to scale the speed gain, never in a safety constraint.
    """
    centers = grid.occupied_cell_centers()
    if len(centers) == 0:
        return NO_OBSTACLE_DISTANCE
    inflation = math.sqrt(metric.q2) * (robot_radius + grid.half_diagonal)
    sq1, sq2 = math.sqrt(metric.q1), math.sqrt(metric.q2)
    euclid = points_to_cone_distance(centers, cone)
    best_euclid = float(euclid.min())
    # Sandwich bound: only centers whose optimistic Q-distance can beat the
    # best pessimistic one need the exact boundary pass.
    keep = sq1 * euclid <= sq2 * best_euclid + _EPS
    centers = centers[keep]
    boundary = cone_boundary_points(cone, n_boundary)
    diffs = centers[:, None, :] - boundary[None, :, :]
    along = diffs @ metric.heading
    sq = metric.q2 * np.einsum("ijk,ijk->ij", diffs, diffs) + (metric.q1 - metric.q2) * along**2
    d_q = math.sqrt(max(0.0, float(sq.min())))
    return max(0.0, d_q - inflation)


def ball_overapprox(state, g):
    """Ball centered at g with radius |g - p|; contains the reachable cone."""
    g = np.asarray(g, dtype=float)
    return g, float(np.linalg.norm(g - state.position))
