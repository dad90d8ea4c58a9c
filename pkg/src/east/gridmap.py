"""Occupancy grid, exact Euclidean distance transform, and clearance cost field.

The grid holds ternary cells (free / occupied / unknown). Distances are
measured center-to-center between cells; robot-radius inflation is applied
by subtracting the radius plus half a cell diagonal wherever a
point-to-obstacle distance is consumed, so a single grid serves any robot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

FREE = 0
OCCUPIED = 1
UNKNOWN = 2

# Stand-in for +inf on obstacle-free grids. Large enough that the clearance
# cost underflows to ~0 instead of producing NaN downstream.
NO_OBSTACLE_DISTANCE = 1e6


class GridError(ValueError):
    """Invalid grid construction or configuration."""


class OccupancyGrid:
    """Ternary occupancy grid over a world-aligned rectangle.

    Cells are stored as ``cells[iy, ix]``. The lower-left corner of cell
    (0, 0) sits at ``origin``; cell centers are at origin + (i + 0.5) * res.

    Grids are treated as immutable snapshots: ``integrate_scan`` returns a
    new grid, and derived data (distance field, occupied centers) is cached
    on first use.
    """

    def __init__(self, width, height, resolution, origin=(0.0, 0.0), cells=None):
        if width < 1 or height < 1:
            raise GridError(f"grid dimensions must be >= 1, got {width}x{height}")
        if resolution <= 0:
            raise GridError(f"resolution must be > 0, got {resolution}")
        self.width = int(width)
        self.height = int(height)
        self.resolution = float(resolution)
        self.origin = np.asarray(origin, dtype=float).copy()
        if cells is None:
            cells = np.full((self.height, self.width), UNKNOWN, dtype=np.int8)
        else:
            cells = np.asarray(cells, dtype=np.int8).copy()
            if cells.shape != (self.height, self.width):
                raise GridError(
                    f"cells shape {cells.shape} does not match {self.height}x{self.width}"
                )
        self.cells = cells
        self._distance_field = None
        self._occupied_centers = None

    @property
    def half_diagonal(self):
        """Half a cell diagonal in meters."""
        return self.resolution * math.sqrt(2.0) / 2.0

    def world_to_cell(self, p):
        """Map a world point to (ix, iy) cell indices (may be out of bounds)."""
        ix = int(math.floor((p[0] - self.origin[0]) / self.resolution))
        iy = int(math.floor((p[1] - self.origin[1]) / self.resolution))
        return ix, iy

    def cell_center(self, ix, iy):
        """World coordinates of a cell center."""
        return np.array(
            [
                self.origin[0] + (ix + 0.5) * self.resolution,
                self.origin[1] + (iy + 0.5) * self.resolution,
            ]
        )

    def in_bounds(self, ix, iy):
        return 0 <= ix < self.width and 0 <= iy < self.height

    def contains_point(self, p):
        ix, iy = self.world_to_cell(p)
        return self.in_bounds(ix, iy)

    def state_at(self, ix, iy):
        return int(self.cells[iy, ix])

    def with_cells(self, cells):
        """New snapshot with the same geometry and different cell contents."""
        return OccupancyGrid(self.width, self.height, self.resolution, self.origin, cells)

    def occupied_cell_centers(self):
        """(N, 2) array of world centers of occupied cells (cached)."""
        if self._occupied_centers is None:
            iy, ix = np.nonzero(self.cells == OCCUPIED)
            centers = np.empty((len(ix), 2))
            centers[:, 0] = self.origin[0] + (ix + 0.5) * self.resolution
            centers[:, 1] = self.origin[1] + (iy + 0.5) * self.resolution
            self._occupied_centers = centers
        return self._occupied_centers

    def distance_field(self):
        """Exact Euclidean distance transform of this grid (cached)."""
        if self._distance_field is None:
            self._distance_field = distance_transform(self)
        return self._distance_field

    # Plain-text exchange format: header "width height resolution ox oy",
    # then one row of cell states per grid row (row iy = 0 first).
    def to_text(self):
        lines = [
            f"{self.width} {self.height} {self.resolution:.9g} "
            f"{self.origin[0]:.9g} {self.origin[1]:.9g}"
        ]
        for iy in range(self.height):
            lines.append(" ".join(str(int(v)) for v in self.cells[iy]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if not lines:
            raise GridError("empty grid text")
        head = lines[0].split()
        if len(head) != 5:
            raise GridError(f"bad grid header: {lines[0]!r}")
        width, height = int(head[0]), int(head[1])
        resolution = float(head[2])
        origin = (float(head[3]), float(head[4]))
        if len(lines) != 1 + height:
            raise GridError(f"expected {height} rows, got {len(lines) - 1}")
        cells = np.array(
            [[int(v) for v in ln.split()] for ln in lines[1:]], dtype=np.int8
        )
        if cells.shape != (height, width):
            raise GridError("row length does not match header width")
        if not np.isin(cells, (FREE, OCCUPIED, UNKNOWN)).all():
            raise GridError("cell states must be 0, 1, or 2")
        return cls(width, height, resolution, origin, cells)


@dataclass
class DistanceField:
    """Per-cell distance in meters to the nearest occupied cell center.

    ``sq_cells`` keeps the integer squared cell offsets so equality against
    a brute-force oracle is exact. ``no_obstacle`` marks the sentinel case.
    """

    values: np.ndarray
    sq_cells: np.ndarray | None
    no_obstacle: bool
    resolution: float

    def at_cell(self, ix, iy):
        return float(self.values[iy, ix])


def distance_transform(grid, no_obstacle_value=NO_OBSTACLE_DISTANCE):
    """Exact Euclidean distance transform over cell centers.

    Every cell gets the minimum center-to-center distance to an occupied
    cell (0 on occupied cells). With no occupied cell anywhere, all values
    are the sentinel ``no_obstacle_value``.
    """
    occ = grid.cells == OCCUPIED
    if not occ.any():
        values = np.full(occ.shape, float(no_obstacle_value))
        return DistanceField(values, None, True, grid.resolution)
    # Exact feature transform; distances recomputed from integer offsets so
    # they match a brute-force min bit for bit.
    nearest = ndimage.distance_transform_edt(~occ, return_indices=True, return_distances=False)
    iy, ix = np.indices(occ.shape)
    di = nearest[0].astype(np.int64) - iy
    dj = nearest[1].astype(np.int64) - ix
    sq = di * di + dj * dj
    values = grid.resolution * np.sqrt(sq.astype(float))
    return DistanceField(values, sq, False, grid.resolution)


def clearance_cost(d, c_u, kappa):
    """Exponential obstacle clearance cost, c_u * exp(-kappa * d)."""
    return c_u * np.exp(-kappa * np.asarray(d, dtype=float))


def is_traversable(c, c_f):
    """A clearance cost is traversable when it does not exceed the cutoff."""
    return c <= c_f


@dataclass(frozen=True)
class ClearanceParams:
    """Clearance cost design: upper bound, decay rate, cutoff, unknown-cell cost."""

    c_u: float
    kappa: float
    c_f: float
    c_unknown: float = 3.0

    def __post_init__(self):
        if self.c_u <= 0 or self.kappa <= 0:
            raise GridError("c_u and kappa must be positive")
        if self.c_f >= self.c_u:
            raise GridError(
                f"clearance cutoff c_f={self.c_f} must be < c_u={self.c_u}"
            )


# The three published cost map designs.
CLEARANCE_DESIGNS = {
    "minimum": ClearanceParams(c_u=3.2, kappa=15.0, c_f=1.0),
    "medium": ClearanceParams(c_u=8.3, kappa=7.0, c_f=5.0),
    "maximum": ClearanceParams(c_u=16.9, kappa=1.0, c_f=15.0),
}


class ClearanceField:
    """Clearance cost and traversability over a grid snapshot.

    The distance fed to the cost curve is the robot-inflated one:
    max(0, d_center - r_robot - half_diagonal). Unknown cells are planned
    through as free space but carry the flat ``c_unknown`` cost so paths
    prefer mapped space; their traversability still follows the
    distance-derived cost, which keeps every traversable cell strictly
    clear of occupied cells.
    """

    def __init__(self, grid, params, robot_radius):
        self.grid = grid
        self.params = params
        self.robot_radius = float(robot_radius)
        field = grid.distance_field()
        inflated = np.maximum(0.0, field.values - (robot_radius + grid.half_diagonal))
        base = clearance_cost(inflated, params.c_u, params.kappa)
        self.cost = np.where(grid.cells == UNKNOWN, params.c_unknown, base)
        self.traversable = is_traversable(base, params.c_f)

    def cost_at(self, ix, iy):
        return float(self.cost[iy, ix])

    def traversable_at(self, ix, iy):
        return bool(self.traversable[iy, ix])


@dataclass
class RangeScan:
    """One sweep of range returns. Angles are relative to the robot heading;
    a range >= max_range means the beam saw no obstacle."""

    angles: np.ndarray
    ranges: np.ndarray
    max_range: float


def _ray_setup(grid, origin, angles):
    """Shared DDA initialization for a batch of rays from one origin."""
    res = grid.resolution
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    n = len(angles)
    ix0 = int(math.floor((origin[0] - grid.origin[0]) / res))
    iy0 = int(math.floor((origin[1] - grid.origin[1]) / res))
    cx = np.full(n, ix0, dtype=np.int64)
    cy = np.full(n, iy0, dtype=np.int64)
    step_x = np.sign(dirs[:, 0]).astype(np.int64)
    step_y = np.sign(dirs[:, 1]).astype(np.int64)
    with np.errstate(divide="ignore"):
        inv_dx = np.where(dirs[:, 0] != 0.0, 1.0 / dirs[:, 0], np.inf)
        inv_dy = np.where(dirs[:, 1] != 0.0, 1.0 / dirs[:, 1], np.inf)
    # Distance along the ray to the first x/y cell boundary.
    fx = (origin[0] - grid.origin[0]) / res - ix0
    fy = (origin[1] - grid.origin[1]) / res - iy0
    bound_x = np.where(step_x > 0, 1.0 - fx, fx)
    bound_y = np.where(step_y > 0, 1.0 - fy, fy)
    abs_inv_x = np.where(step_x != 0, np.abs(inv_dx), 0.0)
    abs_inv_y = np.where(step_y != 0, np.abs(inv_dy), 0.0)
    t_max_x = np.where(step_x != 0, bound_x * res * abs_inv_x, np.inf)
    t_max_y = np.where(step_y != 0, bound_y * res * abs_inv_y, np.inf)
    t_delta_x = np.where(step_x != 0, res * abs_inv_x, np.inf)
    t_delta_y = np.where(step_y != 0, res * abs_inv_y, np.inf)
    return cx, cy, step_x, step_y, t_max_x, t_max_y, t_delta_x, t_delta_y


def integrate_scan(grid, pose, scan):
    """Fold one range scan into the grid, returning a new snapshot.

    Cells a beam fully traverses before its return become free; the cell
    containing a return closer than max range becomes occupied. The cell
    holding the sensor itself is never written, out-of-bounds beam portions
    are ignored, and occupied writes win over free writes within one scan.
    """
    if not grid.contains_point((pose.x, pose.y)):
        raise GridError("scan pose is outside the grid")
    origin = np.array([pose.x, pose.y])
    angles = pose.theta + scan.angles
    ranges = np.minimum(scan.ranges, scan.max_range)
    has_hit = scan.ranges < scan.max_range

    cx, cy, step_x, step_y, t_max_x, t_max_y, t_dx, t_dy = _ray_setup(grid, origin, angles)
    n = len(angles)
    active = np.ones(n, dtype=bool)
    t_entry = np.zeros(n)
    free_ix, free_iy, occ_ix, occ_iy = [], [], [], []
    max_steps = int(2 * scan.max_range / grid.resolution) + 4

    first = True
    for _ in range(max_steps):
        if not active.any():
            break
        t_next = np.minimum(t_max_x, t_max_y)
        in_b = active & (cx >= 0) & (cx < grid.width) & (cy >= 0) & (cy < grid.height)
        if not first:
            hit_here = in_b & has_hit & (t_entry <= ranges) & (ranges < t_next)
            free_here = in_b & (t_next <= ranges) & ~hit_here
            if hit_here.any():
                occ_ix.append(cx[hit_here].copy())
                occ_iy.append(cy[hit_here].copy())
            if free_here.any():
                free_ix.append(cx[free_here].copy())
                free_iy.append(cy[free_here].copy())
            active &= ~hit_here
        first = False
        active &= t_entry < ranges
        # Advance the DDA one cell along the axis with the nearer boundary.
        adv_x = active & (t_max_x <= t_max_y)
        adv_y = active & ~adv_x
        t_entry = np.where(active, t_next, t_entry)
        cx = np.where(adv_x, cx + step_x, cx)
        t_max_x = np.where(adv_x, t_max_x + t_dx, t_max_x)
        cy = np.where(adv_y, cy + step_y, cy)
        t_max_y = np.where(adv_y, t_max_y + t_dy, t_max_y)

    cells = grid.cells.copy()
    if free_ix:
        fx = np.concatenate(free_ix)
        fy = np.concatenate(free_iy)
        cells[fy, fx] = FREE
    if occ_ix:
        ox = np.concatenate(occ_ix)
        oy = np.concatenate(occ_iy)
        cells[oy, ox] = OCCUPIED
    return grid.with_cells(cells)
