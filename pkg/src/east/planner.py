"""Grid path planning that trades travel distance against obstacle clearance.

A* over the occupancy grid with per-edge cost (step length + clearance cost
of the destination cell) and a Euclidean heuristic, which is admissible and
consistent because the clearance term is positive. Results come back as
arclength-parameterized piecewise-linear paths.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

COLLINEAR_TOLERANCE = 1e-9  # m^2, cross-product threshold for vertex merging


class PlanError(Exception):
    pass


class NoPath(PlanError):
    """Goal unreachable through traversable cells."""


class OutOfBounds(PlanError):
    pass


class UntraversableEndpoint(PlanError):
    pass


@dataclass
class PiecewisePath:
    """Piecewise-linear path with vertices at arclength-proportional sigmas."""

    vertices: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.sigmas = np.asarray(self.sigmas, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[0] < 2:
            raise ValueError("a path needs at least two vertices")
        if len(self.sigmas) != len(self.vertices):
            raise ValueError("sigmas and vertices must align")
        if self.sigmas[0] != 0.0 or self.sigmas[-1] != 1.0:
            raise ValueError("sigmas must start at 0 and end at 1")
        if not (np.diff(self.sigmas) > 0).all():
            raise ValueError("sigmas must be strictly increasing")

    @property
    def length(self):
        return float(np.linalg.norm(np.diff(self.vertices, axis=0), axis=1).sum())

    def eval(self, sigma):
        """Point on the path at parameter sigma in [0, 1]."""
        if not 0.0 <= sigma <= 1.0:
            raise ValueError(f"sigma must be in [0, 1], got {sigma}")
        i = int(np.searchsorted(self.sigmas, sigma, side="right")) - 1
        i = min(i, len(self.sigmas) - 2)
        t = (sigma - self.sigmas[i]) / (self.sigmas[i + 1] - self.sigmas[i])
        if t <= 0.0:
            return self.vertices[i].copy()
        if t >= 1.0:
            return self.vertices[i + 1].copy()
        return self.vertices[i] + t * (self.vertices[i + 1] - self.vertices[i])


def path_eval(path, sigma):
    return path.eval(sigma)


def path_cost(path, clearance):
    """Travel-plus-clearance cost of a path evaluated on its vertices."""
    grid = clearance.grid
    costs = []
    for v in path.vertices:
        ix, iy = grid.world_to_cell(v)
        if not grid.in_bounds(ix, iy):
            raise OutOfBounds(f"path vertex {v} outside the grid")
        costs.append(clearance.cost_at(ix, iy))
    diffs = np.diff(path.vertices, axis=0)
    lengths = np.linalg.norm(diffs, axis=1)
    if lengths.sum() == 0.0:
        return costs[0]
    return float(lengths.sum() + sum(costs[1:]))


@dataclass
class PlanQuery:
    start: np.ndarray
    goal: np.ndarray
    clearance: object
    connectivity: int = 8

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=float)
        self.goal = np.asarray(self.goal, dtype=float)
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")


@dataclass
class PlanResult:
    path: PiecewisePath
    cost: float
    expanded: int = field(default=0, repr=False)


def _merge_collinear(points):
    # Keep a vertex only where the direction turns.
    merged = [points[0]]
    for i in range(1, len(points) - 1):
        ax, ay = merged[-1]
        bx, by = points[i]
        cx, cy = points[i + 1]
        cross = (bx - ax) * (cy - by) - (by - ay) * (cx - bx)
        if abs(cross) > COLLINEAR_TOLERANCE:
            merged.append(points[i])
    merged.append(points[-1])
    return merged


def plan(query):
    """Grid-optimal path from start to goal under the clearance edge cost.

    Raises OutOfBounds / UntraversableEndpoint for bad endpoints and NoPath
    when no traversable route exists. Ties on f are broken by larger g and
    then by row-major cell index for cross-run determinism.
    """
    clearance = query.clearance
    grid = clearance.grid
    sx, sy = grid.world_to_cell(query.start)
    gx, gy = grid.world_to_cell(query.goal)
    if not grid.in_bounds(sx, sy):
        raise OutOfBounds(f"start {query.start} outside the grid")
    if not grid.in_bounds(gx, gy):
        raise OutOfBounds(f"goal {query.goal} outside the grid")
    if not clearance.traversable_at(sx, sy):
        raise UntraversableEndpoint(f"start cell ({sx}, {sy}) not traversable")
    if not clearance.traversable_at(gx, gy):
        raise UntraversableEndpoint(f"goal cell ({gx}, {gy}) not traversable")

    w, h = grid.width, grid.height
    res = grid.resolution
    diag = res * math.sqrt(2.0)
    cost_flat = np.where(clearance.traversable, clearance.cost, np.inf).ravel().tolist()
    start = sy * w + sx
    goal = gy * w + gx

    if query.connectivity == 8:
        moves = [(1, 0, res), (-1, 0, res), (0, 1, res), (0, -1, res),
                 (1, 1, diag), (1, -1, diag), (-1, 1, diag), (-1, -1, diag)]
    else:
        moves = [(1, 0, res), (-1, 0, res), (0, 1, res), (0, -1, res)]

    g_score = {start: 0.0}
    came = {}
    closed = set()
    h0 = math.hypot(sx - gx, sy - gy) * res
    open_heap = [(h0, 0.0, start)]
    expanded = 0

    while open_heap:
        f, neg_g, idx = heapq.heappop(open_heap)
        if idx in closed:
            continue
        closed.add(idx)
        expanded += 1
        if idx == goal:
            break
        gi = -neg_g
        iy, ix = divmod(idx, w)
        for dx, dy, step in moves:
            nx, ny = ix + dx, iy + dy
            if not (0 <= nx < w and 0 <= ny < h):
                continue
            nidx = ny * w + nx
            c = cost_flat[nidx]
            if c == math.inf or nidx in closed:
                continue
            ng = gi + step + c
            if ng < g_score.get(nidx, math.inf):
                g_score[nidx] = ng
                came[nidx] = idx
                hn = math.hypot(nx - gx, ny - gy) * res
                heapq.heappush(open_heap, (ng + hn, -ng, nidx))
    else:
        raise NoPath(f"no traversable route to cell ({gx}, {gy})")

    cells = [goal]
    while cells[-1] != start:
        cells.append(came[cells[-1]])
    cells.reverse()
    points = [(grid.origin[0] + (i % w + 0.5) * res, grid.origin[1] + (i // w + 0.5) * res)
              for i in cells]
    if len(points) == 1:
        points = [points[0], points[0]]
    else:
        points = _merge_collinear(points)
    vertices = np.array(points)
    seg = np.linalg.norm(np.diff(vertices, axis=0), axis=1)
    total = seg.sum()
    if total == 0.0:
        sigmas = np.linspace(0.0, 1.0, len(vertices))
    else:
        sigmas = np.concatenate([[0.0], np.cumsum(seg) / total])
        sigmas[-1] = 1.0
    return PlanResult(PiecewisePath(vertices, sigmas), g_score[goal], expanded)
