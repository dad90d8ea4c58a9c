"""Acceptance suite: one test per release criterion, each printing a
[PASS]/[FAIL] line with its measured quantity. Scenario runs are shared
through module fixtures so the suite stays fast."""

import json
import math
import sys
import time

import numpy as np
import pytest

from east.cli import random_projection_instance
from east.geometry import cone_from_state, cone_to_obstacles_distance, \
    directional_cone_distance, point_to_cone_distance, DirectionalMetric, ConeSet
from east.gridmap import CLEARANCE_DESIGNS, FREE, OCCUPIED, ClearanceField, \
    OccupancyGrid, distance_transform
from east.governor import LocalSafeZone, governor_step, nominal_input
from east.planner import NoPath, PiecewisePath, PlanQuery, plan
from east.safe_input import (
    FALLBACK,
    MovingObstacle,
    brute_force_oracle,
    cbf_constraint,
    cbf_value,
    solve_safe_input,
)
from east.scenario import load_scenario, set_override
from east.simulator import GOAL_REACHED, run_scenario, write_log_csv, write_metrics_json
from east.unicycle import ControlInput, RobotState, adaptive_gain, control_law, integrate

import conftest
from conftest import load_scenario_doc
from oracles import brute_force_distance_squares, dijkstra_cost, sampled_cone_distance


def verdict(label, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] {label}"
    if detail:
        line += f" ({detail})"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line, file=sys.__stderr__)
    assert ok, line


def run_with(doc_name, **param_overrides):
    doc = load_scenario_doc(doc_name)
    for key, value in param_overrides.items():
        set_override(doc, f"params.{key}", value)
    suffix = "_".join(str(v) for v in param_overrides.values())
    name = doc_name + ("_" + suffix if suffix else "")
    scenario = load_scenario(doc, name=name)
    t0 = time.perf_counter()
    records, metrics = run_scenario(scenario)
    return records, metrics, time.perf_counter() - t0


@pytest.fixture(scope="module")
def sweep_runs():
    return {design: run_with("clearance_sweep", clearance={"design": design})
            for design in ("minimum", "medium", "maximum")}


@pytest.fixture(scope="module")
def c_shape_runs():
    return {mode: run_with("c_shape", k_v_mode=mode, k_v=1.0)
            for mode in ("adaptive", "fixed")}


@pytest.fixture(scope="module")
def maze_run():
    return run_with("maze")


@pytest.fixture(scope="module")
def six_movers_run():
    return run_with("six_movers")


def test_solver_oracle_equivalence():
    rng = np.random.default_rng(42)
    t0 = time.perf_counter()
    worst = 0.0
    feasible = 0
    for _ in range(1000):
        u_g, zone, cons = random_projection_instance(rng)
        result = solve_safe_input(u_g, zone, cons)
        if result.status == FALLBACK:
            continue
        feasible += 1
        reference = brute_force_oracle(u_g, zone, cons, 1e-3)
        assert reference is not None
        worst = max(worst, abs(float(np.linalg.norm(result.u - u_g))
                               - float(np.linalg.norm(reference - u_g))))
    elapsed = time.perf_counter() - t0
    verdict(
        "solver-oracle equivalence: 1000 random instances within 2e-3 in <10 s",
        feasible == 1000 and worst <= 2e-3 and elapsed < 10.0,
        f"max deviation {worst:.2e}, {elapsed:.1f} s",
    )


def test_planner_optimality_vs_dijkstra():
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    checked = 0
    exact = True
    while checked < 200:
        cells = np.where(rng.random((32, 32)) < 0.18, OCCUPIED, FREE).astype(np.int8)
        grid = OccupancyGrid(32, 32, 0.1, cells=cells)
        clearance = ClearanceField(grid, CLEARANCE_DESIGNS["medium"], 0.0)
        free = np.argwhere(clearance.traversable)
        if len(free) < 2:
            continue
        s = free[rng.integers(len(free))]
        g = free[rng.integers(len(free))]
        want = dijkstra_cost(clearance, (s[1], s[0]), (g[1], g[0]))
        try:
            got = plan(PlanQuery(grid.cell_center(s[1], s[0]),
                                 grid.cell_center(g[1], g[0]), clearance)).cost
        except NoPath:
            got = None
        exact = exact and (got == want)
        checked += 1
    elapsed = time.perf_counter() - t0
    verdict(
        "planner optimality: A* equals Dijkstra exactly on 200 random 32x32 grids in <30 s",
        exact and elapsed < 30.0,
        f"{elapsed:.1f} s",
    )


def test_distance_oracles():
    rng = np.random.default_rng(77)
    edt_exact = True
    for _ in range(50):
        cells = np.where(rng.random((64, 64)) < 0.06, OCCUPIED, FREE).astype(np.int8)
        if not (cells == OCCUPIED).any():
            cells[7, 9] = OCCUPIED
        grid = OccupancyGrid(64, 64, 0.1, cells=cells)
        field = distance_transform(grid)
        edt_exact = edt_exact and bool(
            (field.sq_cells == brute_force_distance_squares(grid)).all()
        )
    worst_cone = 0.0
    for _ in range(500):
        cone = ConeSet(rng.uniform(-5, 5, 2), rng.uniform(-5, 5, 2), rng.uniform(0, 3))
        z = rng.uniform(-8, 8, 2)
        worst_cone = max(worst_cone, abs(point_to_cone_distance(z, cone)
                                         - sampled_cone_distance(z, cone)))
    verdict(
        "distance oracles: exact EDT on 50 grids; cone distance within 1e-3 on 500 instances",
        edt_exact and worst_cone <= 1e-3,
        f"cone deviation {worst_cone:.2e}",
    )


def test_reachable_cone_invariance_and_convergence():
    rng = np.random.default_rng(404)
    worst_violation = 0.0
    all_converged = True
    for _ in range(100):
        p = rng.uniform(-5, 5, 2)
        offset = rng.uniform(-5, 5, 2)
        norm = float(np.linalg.norm(offset))
        if norm > 5:
            offset *= 5 / norm
        g = p + offset
        state = RobotState(p[0], p[1], rng.uniform(-math.pi, math.pi))
        cone = cone_from_state(state, g)
        u = control_law(state, g, 1.0, 1.5)
        converged = False
        for n in range(3000):  # 30 s sim time at dt = 0.01
            if n % 2 == 0:
                u = control_law(state, g, 1.0, 1.5)
            state = integrate(state, u, 0.01)
            worst_violation = max(worst_violation,
                                  point_to_cone_distance(state.position, cone))
            if float(np.linalg.norm(g - state.position)) < 1e-2:
                converged = True
                break
        all_converged = all_converged and converged
    verdict(
        "reachable-set invariance: 100 rollouts within cone to 1e-3 and converge in 30 s",
        worst_violation <= 1e-3 and all_converged,
        f"max excursion {worst_violation:.2e}",
    )


def test_static_scenarios_safe_end_to_end(sweep_runs, c_shape_runs, maze_run):
    runs = {
        "c_shape": c_shape_runs["adaptive"],
        "maze": maze_run,
        "clearance_sweep": sweep_runs["medium"],
    }
    ok = True
    details = []
    for name, (records, metrics, _) in runs.items():
        min_clear = min(r.d_robot_obs for r in records)
        clean = (metrics.status == GOAL_REACHED and min_clear > 0.0
                 and metrics.fallback_count == 0)
        ok = ok and clean
        details.append(f"{name}: {metrics.status}, min d(p)={min_clear:.3f}")
    verdict(
        "static safety end-to-end: c_shape, maze, clearance_sweep reach goals clear of obstacles",
        ok, "; ".join(details),
    )


def test_clearance_design_orderings(sweep_runs):
    m = sweep_runs["minimum"][1]
    d = sweep_runs["medium"][1]
    x = sweep_runs["maximum"][1]
    walls = [sweep_runs[k][2] for k in ("minimum", "medium", "maximum")]
    ok = (
        m.plan_path_length < d.plan_path_length < x.plan_path_length
        and m.finish_time > d.finish_time
        and m.min_clearance < d.min_clearance
        and all(w < 60.0 for w in walls)
    )
    verdict(
        "cost-design orderings: plan length min<med<max, finish min>med, min clearance min<med",
        ok,
        f"plan ({m.plan_path_length:.2f}, {d.plan_path_length:.2f}, {x.plan_path_length:.2f}) m, "
        f"finish ({m.finish_time:.2f} > {d.finish_time:.2f}) s, "
        f"min clearance ({m.min_clearance:.2f} < {d.min_clearance:.2f}) m",
    )


def test_adaptive_gain_band_and_speedup(c_shape_runs):
    adaptive_records, adaptive_metrics, _ = c_shape_runs["adaptive"]
    _, fixed_metrics, _ = c_shape_runs["fixed"]
    gains = np.array([r.k_v for r in adaptive_records])
    in_band = bool((gains >= 1.0 - 1e-12).all() and (gains <= 3.0 + 1e-12).all())
    faster = adaptive_metrics.finish_time < fixed_metrics.finish_time
    verdict(
        "adaptive gain: k_v in [1, 3] throughout and beats the fixed-gain run",
        in_band and faster,
        f"k_v in [{gains.min():.2f}, {gains.max():.2f}], "
        f"{adaptive_metrics.finish_time:.2f} s vs {fixed_metrics.finish_time:.2f} s",
    )


def test_dynamic_safety_and_cbf_consistency(six_movers_run):
    records, metrics, _ = six_movers_run
    run_ok = (metrics.status == GOAL_REACHED
              and metrics.min_h_star is not None
              and metrics.min_h_star >= -1e-3)

    # Finite-difference consistency of the constraint linearization along
    # the closed-loop flow, on 10^4 random configurations.
    rng = np.random.default_rng(61)
    delta = 1e-6
    k_g, gamma, r = 2.0, 0.15, 0.3
    worst = 0.0
    for _ in range(10_000):
        state = RobotState(*rng.uniform(-3, 3, 2), rng.uniform(-math.pi, math.pi))
        direction = rng.normal(size=2)
        direction /= np.linalg.norm(direction)
        g = state.position + rng.uniform(0.1, 2.0) * direction
        obs = MovingObstacle(rng.uniform(-4, 4, 2), rng.normal(size=2), 0.4)
        u_bar = rng.uniform(-2, 2, 2)
        u_rob = ControlInput(float(rng.uniform(-2, 2)), float(rng.uniform(-3, 3)))
        c = cbf_constraint(state, g, obs, r, k_g, gamma, u_rob)
        h0 = cbf_value(state, g, obs, r)
        h1 = cbf_value(
            integrate(state, u_rob, delta),
            governor_step(g, u_bar, k_g, delta),
            MovingObstacle(obs.position + delta * obs.velocity, obs.velocity, obs.radius),
            r,
        )
        hdot_numeric = (h1 - h0) / delta
        hdot_symbolic = c.value(u_bar) - math.copysign(gamma * h0 * h0, h0)
        worst = max(worst, abs(hdot_numeric - hdot_symbolic))
    verdict(
        "dynamic safety: six_movers reaches goal with min h* >= -1e-3; "
        "constraint derivative matches finite differences at 1e4 samples",
        run_ok and worst <= 1e-3,
        f"min h* {metrics.min_h_star:.3f}, fd deviation {worst:.2e}",
    )


def test_control_step_compute_budget():
    rng = np.random.default_rng(5)
    cells = np.where(rng.random((128, 128)) < 0.04, OCCUPIED, FREE).astype(np.int8)
    grid = OccupancyGrid(128, 128, 0.1, cells=cells)
    grid.distance_field()  # build once, as the mapping tick would
    clearance = ClearanceField(grid, CLEARANCE_DESIGNS["medium"], 0.3)
    free = np.argwhere(clearance.traversable)
    path = PiecewisePath(np.array([[1.0, 1.0], [11.0, 11.0]]), np.array([0.0, 1.0]))
    movers = [MovingObstacle(rng.uniform(0, 12.8, 2), rng.normal(size=2), 0.4)
              for _ in range(10)]
    times = []
    for _ in range(200):
        iy, ix = free[rng.integers(len(free))]
        p = grid.cell_center(ix, iy)
        state = RobotState(p[0], p[1], rng.uniform(-math.pi, math.pi))
        g = p + rng.uniform(-0.5, 0.5, 2)
        t0 = time.perf_counter()
        cone = cone_from_state(state, g)
        d = cone_to_obstacles_distance(cone, grid, 0.3)
        metric = DirectionalMetric.from_heading_angle(state.theta, 1.0, 9.0)
        d_q = directional_cone_distance(cone, grid, metric, 0.3)
        k_v = adaptive_gain(d_q, d, 1.0, 9.0)
        control_law(state, g, k_v, 1.5)
        zone = LocalSafeZone(g, d)
        u_g, _ = nominal_input(path, zone)
        cons = [cbf_constraint(state, g, obs, 0.3, 2.0, 0.15, ControlInput(1.0, 0.0),
                               obstacle_id=i)
                for i, obs in enumerate(movers)]
        solve_safe_input(u_g, zone, cons)
        times.append(time.perf_counter() - t0)
    median_ms = 1e3 * float(np.median(times))
    verdict(
        "per-control-step compute: cone distances + gain + projection under 5 ms median",
        median_ms < 5.0,
        f"median {median_ms:.2f} ms on a 128x128 grid with 10 movers",
    )


def test_determinism_byte_identical(tmp_path):
    blobs = []
    for i in range(2):
        records, metrics, _ = run_with("six_movers")
        log = tmp_path / f"r{i}.csv"
        met = tmp_path / f"r{i}.json"
        write_log_csv(log, records)
        write_metrics_json(met, metrics)
        blobs.append(log.read_bytes() + met.read_bytes())
    verdict("determinism: repeated six_movers runs byte-identical",
            blobs[0] == blobs[1])
