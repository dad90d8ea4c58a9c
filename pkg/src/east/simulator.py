"""Deterministic multi-rate closed-loop simulation.

One logical clock drives four nested rates: physics integration, the
control/governor update, lidar mapping, and replanning. Everything is
recomputed synchronously at its tick, so two runs of the same scenario
produce bit-identical logs. Moving obstacles follow waypoint polylines at
constant speed and are sensed as tracked objects; they never enter the
occupancy grid.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from . import governor as gov
from .geometry import DirectionalMetric, cone_from_state, cone_to_obstacles_distance, directional_cone_distance
from .gridmap import ClearanceField, RangeScan, _ray_setup, integrate_scan
from .planner import PlanError, PlanQuery, plan
from .safe_input import FALLBACK, MovingObstacle, cbf_constraint, solve_safe_input
from .scenario import InvalidScenario, initial_map, rasterize_world
from .unicycle import ControlInput, RobotState, adaptive_gain, control_law, integrate

log = logging.getLogger(__name__)

GOAL_REACHED = "goal_reached"
COLLISION = "collision"
DNF = "dnf"

LOG_COLUMNS = [
    "t", "x", "y", "theta", "v", "omega", "g_x", "g_y", "ug_x", "ug_y",
    "ubar_x", "ubar_y", "sigma", "zone_radius", "d_cone_obs", "d_robot_obs",
    "k_v", "h_star", "status", "replanned",
]


@dataclass
class LogRecord:
    t: float
    x: float
    y: float
    theta: float
    v: float
    omega: float
    g_x: float
    g_y: float
    ug_x: float
    ug_y: float
    ubar_x: float
    ubar_y: float
    sigma: float
    zone_radius: float
    d_cone_obs: float
    d_robot_obs: float
    k_v: float
    h_star: float
    status: str
    replanned: int


@dataclass
class Metrics:
    plan_path_length: float
    robot_traj_length: float
    finish_time: float
    avg_clearance: float
    min_clearance: float
    min_h_star: float | None
    fallback_count: int
    status: str
    goals_reached: int

    def to_dict(self):
        return {
            "plan_path_length": self.plan_path_length,
            "robot_traj_length": self.robot_traj_length,
            "finish_time": self.finish_time,
            "avg_clearance": self.avg_clearance,
            "min_clearance": self.min_clearance,
            "min_h_star": self.min_h_star,
            "fallback_count": self.fallback_count,
            "status": self.status,
            "goals_reached": self.goals_reached,
        }


class Mover:
    """Waypoint-following ball obstacle at constant speed, instant turns."""

    def __init__(self, spec, mover_id):
        self.id = mover_id
        self.radius = spec.radius
        self.speed = spec.speed
        self.mode = spec.mode
        self.waypoints = spec.waypoints
        self.done = len(self.waypoints) < 2 or self.speed == 0.0
        self.seg = 0
        self.s = 0.0
        self.position = self.waypoints[0].copy()
        self._enter_segment(0)

    def _enter_segment(self, seg):
        n = len(self.waypoints)
        if self.done or n < 2:
            self.unit = np.zeros(2)
            self.seg_len = math.inf
            return
        self.seg = seg
        a = self.waypoints[seg]
        b = self.waypoints[(seg + 1) % n]
        d = b - a
        self.seg_len = float(np.linalg.norm(d))
        self.unit = d / self.seg_len if self.seg_len > 0 else np.zeros(2)

    def velocity(self):
        if self.done:
            return np.zeros(2)
        return self.speed * self.unit

    def advance(self, dt):
        if self.done:
            return
        remaining = self.speed * dt
        # Mid-segment steps add a constant displacement so consecutive
        # positions differ by exactly speed * dt.
        if self.s + remaining < self.seg_len:
            self.s += remaining
            self.position = self.position + self.unit * remaining
            return
        n = len(self.waypoints)
        while remaining > 0:
            room = self.seg_len - self.s
            if remaining < room:
                self.s += remaining
                self.position = self.waypoints[self.seg] + self.unit * self.s
                return
            remaining -= room
            nxt = self.seg + 1
            if self.mode == "loop":
                nxt %= n
            elif nxt >= n - 1:
                self.position = self.waypoints[-1].copy()
                self.done = True
                self.unit = np.zeros(2)
                return
            self._enter_segment(nxt)
            self.s = 0.0
            self.position = self.waypoints[self.seg].copy()

    def snapshot(self):
        return MovingObstacle(self.position.copy(), self.velocity(), self.radius)


def lidar_scan(true_grid, pose, n_beams=360, max_range=10.0):
    """Simulated planar range scan via grid raycasting.

    Evenly spaced beams around the robot heading; each return is the
    distance at which its ray enters the first occupied cell, max_range
    when nothing is hit. The cell containing the sensor is skipped.
    """
    if not true_grid.contains_point((pose.x, pose.y)):
        raise InvalidScenario("scan pose is outside the world")
    angles = np.arange(n_beams) * (2.0 * math.pi / n_beams)
    origin = np.array([pose.x, pose.y])
    cx, cy, step_x, step_y, t_max_x, t_max_y, t_dx, t_dy = _ray_setup(
        true_grid, origin, pose.theta + angles
    )
    n = n_beams
    occ = true_grid.cells
    w, h = true_grid.width, true_grid.height
    ranges = np.full(n, max_range)
    active = np.ones(n, dtype=bool)
    t_entry = np.zeros(n)
    max_steps = int(2 * max_range / true_grid.resolution) + 4
    first = True
    for _ in range(max_steps):
        if not active.any():
            break
        if not first:
            in_b = active & (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
            hit = np.zeros(n, dtype=bool)
            if in_b.any():
                hit[in_b] = occ[cy[in_b], cx[in_b]] == 1
            hit &= t_entry < max_range
            ranges[hit] = t_entry[hit]
            active &= ~hit
        first = False
        active &= t_entry < max_range
        t_next = np.minimum(t_max_x, t_max_y)
        adv_x = active & (t_max_x <= t_max_y)
        adv_y = active & ~adv_x
        t_entry = np.where(active, t_next, t_entry)
        cx = np.where(adv_x, cx + step_x, cx)
        t_max_x = np.where(adv_x, t_max_x + t_dx, t_max_x)
        cy = np.where(adv_y, cy + step_y, cy)
        t_max_y = np.where(adv_y, t_max_y + t_dy, t_max_y)
    return RangeScan(angles, ranges, max_range)


class Simulation:
    """Closed-loop run of one scenario. Use run() or step() repeatedly."""

    def __init__(self, scenario):
        self.scenario = scenario
        p = scenario.params
        self.true_grid = rasterize_world(scenario.world)
        self.map_grid = initial_map(scenario.world, self.true_grid)
        self.clearance_params = scenario.clearance_params
        self.clearance = ClearanceField(self.map_grid, self.clearance_params, scenario.robot_radius)
        self.robot_radius = scenario.robot_radius

        rates = p["rates"]
        self.dt = 1.0 / rates["physics_hz"]
        self.control_every = rates["physics_hz"] // rates["control_hz"]
        self.map_every = rates["physics_hz"] // rates["mapping_hz"]
        self.replan_every = rates["physics_hz"] // rates["replan_hz"]
        self.dt_control = self.dt * self.control_every

        self.state = RobotState(*scenario.start)
        self.movers = [Mover(spec, i) for i, spec in enumerate(scenario.movers)]
        self.goal_index = 0
        self.goal_start_time = 0.0
        self.n = 0
        self.records = []
        self.status = None
        self.plan_result = None
        self.plan_length_total = 0.0
        self.g = None
        self.u = ControlInput(0.0, 0.0)
        self.replanned_since_log = False
        self.map_version = 0
        self.planned_version = -1
        self.replan_seconds = 0.0

        self._true_occ_centers = self.true_grid.occupied_cell_centers()
        self._bootstrap()

    # -- setup ---------------------------------------------------------

    def _bootstrap(self):
        self._mapping_tick()
        if not self._replan_tick(anchor=self.state.position):
            raise InvalidScenario("no initial path from start to the first goal")
        self.g = self.plan_result.path.eval(0.0)
        if not gov.check_init(self.state, self.g, self.plan_result.path,
                              self.map_grid, self.robot_radius):
            raise InvalidScenario(
                "initial condition rejected: the reachable set must start clear "
                "of obstacles with the governor on the path start"
            )

    # -- individual ticks ------------------------------------------------

    def _mapping_tick(self):
        lidar = self.scenario.params["lidar"]
        scan = lidar_scan(self.true_grid, self.state, lidar["beams"], lidar["max_range"])
        new_grid = integrate_scan(self.map_grid, self.state, scan)
        if not np.array_equal(new_grid.cells, self.map_grid.cells):
            self.map_grid = new_grid
            self.clearance = ClearanceField(new_grid, self.clearance_params, self.robot_radius)
            self.map_version += 1

    def _replan_tick(self, anchor=None):
        """Plan toward the current goal; keeps the previous path on failure."""
        if self.planned_version == self.map_version and self.plan_result is not None:
            return True
        if anchor is None:
            anchor = self.g
        t0 = time.perf_counter()
        try:
            result = plan(PlanQuery(anchor, self.scenario.goals[self.goal_index], self.clearance))
        except PlanError as e:
            log.debug("replan failed (%s); keeping previous path", e)
            return self.plan_result is not None
        finally:
            self.replan_seconds += time.perf_counter() - t0
        first_for_goal = self.planned_version < 0
        self.plan_result = result
        self.planned_version = self.map_version
        self.replanned_since_log = True
        if first_for_goal:
            self.plan_length_total += result.path.length
        return True

    def _control_tick(self):
        p = self.scenario.params
        state, g = self.state, self.g
        cone = cone_from_state(state, g)
        d_cone = cone_to_obstacles_distance(cone, self.map_grid, self.robot_radius)
        zone = gov.LocalSafeZone(
            g.copy(),
            d_cone if p["lsz_semantics"] == "radius" else math.sqrt(max(0.0, d_cone)),
        )
        if p["k_v_mode"] == "adaptive":
            metric = DirectionalMetric.from_heading_angle(state.theta, p["q1"], p["q2"])
            d_dir = directional_cone_distance(cone, self.map_grid, metric, self.robot_radius)
            k_v = adaptive_gain(d_dir, d_cone, p["q1"], p["q2"])
        else:
            k_v = p["k_v"]
        self.u = control_law(state, g, k_v, p["k_omega"], p["v_max"], p["omega_max"])

        u_g, sigma = gov.nominal_input(self.plan_result.path, zone)
        constraints = []
        h_star = math.inf
        for mover in self.movers:
            obs = mover.snapshot()
            h = _cbf_value_fast(state, g, obs, self.robot_radius)
            h_star = min(h_star, h)
            if np.linalg.norm(obs.position - state.position) <= p["sensing_radius"]:
                constraints.append(cbf_constraint(
                    state, g, obs, self.robot_radius, p["k_g"], p["gamma"],
                    self.u, obstacle_id=mover.id,
                ))
        result = solve_safe_input(u_g, zone, constraints)

        self.records.append(LogRecord(
            t=self.n * self.dt,
            x=state.x, y=state.y, theta=state.theta,
            v=self.u.v, omega=self.u.omega,
            g_x=g[0], g_y=g[1],
            ug_x=u_g[0], ug_y=u_g[1],
            ubar_x=result.u[0], ubar_y=result.u[1],
            sigma=float("nan") if sigma is None else sigma,
            zone_radius=zone.radius,
            d_cone_obs=d_cone,
            d_robot_obs=self._true_clearance(),
            k_v=k_v,
            h_star=h_star,
            status=result.status,
            replanned=int(self.replanned_since_log),
        ))
        self.replanned_since_log = False
        self.g = gov.governor_step(g, result.u, p["k_g"], self.dt_control)

    def _true_clearance(self):
        """Robot distance to the inflated true obstacle space (may be negative)."""
        if len(self._true_occ_centers) == 0:
            return float(1e6)
        d = float(np.min(np.linalg.norm(self._true_occ_centers - self.state.position, axis=1)))
        return d - self.robot_radius - self.true_grid.half_diagonal

    def _collided(self):
        if len(self._true_occ_centers) > 0:
            d = float(np.min(np.linalg.norm(self._true_occ_centers - self.state.position, axis=1)))
            if d < self.robot_radius:
                return True
        for mover in self.movers:
            if float(np.linalg.norm(mover.position - self.state.position)) < \
                    self.robot_radius + mover.radius:
                return True
        return False

    # -- main loop -------------------------------------------------------

    def step(self):
        """Advance one physics step, running any ticks due at this instant."""
        if self.status is not None:
            return
        if self.n % self.map_every == 0 and self.n > 0:
            self._mapping_tick()
        if self.n % self.replan_every == 0 and self.n > 0:
            self._replan_tick()
        if self.n % self.control_every == 0:
            self._control_tick()

        self.state = integrate(self.state, self.u, self.dt)
        for mover in self.movers:
            mover.advance(self.dt)
        self.n += 1

        if self._collided():
            self.status = COLLISION
            return
        t = self.n * self.dt
        goal = self.scenario.goals[self.goal_index]
        if float(np.linalg.norm(goal - self.state.position)) <= \
                self.scenario.params["goal_tolerance"]:
            if self.goal_index + 1 < len(self.scenario.goals):
                self.goal_index += 1
                self.goal_start_time = t
                self.planned_version = -1
                if not self._replan_tick():
                    self.status = DNF
            else:
                self.status = GOAL_REACHED
        elif t - self.goal_start_time > self.scenario.params["horizon"]:
            self.status = DNF

    def run(self):
        """Run to completion; returns (records, Metrics)."""
        while self.status is None:
            self.step()
        log.info("run %s: %s after %.2f s sim time (replanning %.3f s wall)",
                 self.scenario.name, self.status, self.n * self.dt, self.replan_seconds)
        metrics = compute_metrics(
            self.records, self.plan_length_total,
            status=self.status,
            goals_reached=self.goal_index + (1 if self.status == GOAL_REACHED else 0),
        )
        return self.records, metrics


def _cbf_value_fast(state, g, obs, robot_radius):
    rel = g - obs.position
    reach = obs.radius + robot_radius + float(np.linalg.norm(g - state.position))
    return float(rel @ rel) - reach * reach


def run_scenario(scenario):
    sim = Simulation(scenario)
    return sim.run()


def compute_metrics(records, plan_length, status=GOAL_REACHED, goals_reached=1):
    """Aggregate run metrics from the per-control-step records."""
    if not records:
        raise ValueError("cannot compute metrics for an empty log")
    pts = np.array([[r.x, r.y] for r in records])
    traj_len = float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()) if len(pts) > 1 else 0.0
    clearances = np.array([r.d_robot_obs for r in records])
    h_values = [r.h_star for r in records if math.isfinite(r.h_star)]
    fallback = sum(1 for r in records if r.status == FALLBACK)
    return Metrics(
        plan_path_length=plan_length,
        robot_traj_length=traj_len,
        finish_time=records[-1].t,
        avg_clearance=float(clearances.mean()),
        min_clearance=float(clearances.min()),
        min_h_star=min(h_values) if h_values else None,
        fallback_count=fallback,
        status=status,
        goals_reached=goals_reached,
    )


def write_log_csv(path, records):
    """Write per-control-step records with floats at 9 significant digits."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(LOG_COLUMNS)
        for r in records:
            writer.writerow([
                _fmt(r.t), _fmt(r.x), _fmt(r.y), _fmt(r.theta), _fmt(r.v),
                _fmt(r.omega), _fmt(r.g_x), _fmt(r.g_y), _fmt(r.ug_x),
                _fmt(r.ug_y), _fmt(r.ubar_x), _fmt(r.ubar_y), _fmt(r.sigma),
                _fmt(r.zone_radius), _fmt(r.d_cone_obs), _fmt(r.d_robot_obs),
                _fmt(r.k_v), _fmt(r.h_star), r.status, r.replanned,
            ])


def _fmt(x):
    return f"{x:.9g}"


def write_metrics_json(path, metrics):
    with open(path, "w") as f:
        json.dump(metrics.to_dict(), f, indent=2)
        f.write("\n")


def read_log_csv(path):
    """Load a log CSV back into LogRecord objects (used by tests and tools)."""
    records = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != LOG_COLUMNS:
            raise ValueError(f"unexpected log columns: {header}")
        for row in reader:
            vals = [float(v) for v in row[:18]]
            records.append(LogRecord(*vals, row[18], int(row[19])))
    return records
