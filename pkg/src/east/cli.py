"""Command line entry point: run scenarios, batch sweeps, one-shot plans,
and the solver-vs-oracle self check."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from .governor import LocalSafeZone
from .gridmap import CLEARANCE_DESIGNS, ClearanceField
from .planner import NoPath, PlanError, PlanQuery, plan
from .safe_input import CbfConstraint, brute_force_oracle, solve_safe_input
from .scenario import InvalidScenario, load_scenario, rasterize_world, set_override
from .simulator import GOAL_REACHED, COLLISION, run_scenario, write_log_csv, write_metrics_json

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_COLLISION = 2
EXIT_DNF = 3
EXIT_NOPATH = 4

METRIC_FIELDS = [
    "name", "status", "plan_path_length", "robot_traj_length", "finish_time",
    "avg_clearance", "min_clearance", "min_h_star", "fallback_count", "goals_reached",
]


def _error(code, text):
    print(f"ERROR {code}: {text}", file=sys.stderr)
    return code


def _parse_set(values):
    overrides = []
    for item in values or []:
        if "=" not in item:
            raise InvalidScenario(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        overrides.append((key, value))
    return overrides


def _load_with_overrides(path, overrides, seed=None):
    try:
        with open(path) as f:
            data = json.load(f)
    except FileNotFoundError:
        raise InvalidScenario(f"scenario file not found: {path}")
    except json.JSONDecodeError as e:
        raise InvalidScenario(f"scenario file {path} is not valid JSON: {e}")
    for key, value in overrides:
        set_override(data, key, value)
    if seed is not None:
        set_override(data, "params.seed", seed)
    name = Path(path).stem
    return load_scenario(data, name=name)


def _run_one(path, overrides, seed, out_dir):
    scenario = _load_with_overrides(path, overrides, seed)
    records, metrics = run_scenario(scenario)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_log_csv(out / f"{scenario.name}.log.csv", records)
    write_metrics_json(out / f"{scenario.name}.metrics.json", metrics)
    return scenario.name, metrics


def cmd_run(args):
    try:
        overrides = _parse_set(args.set)
        name, metrics = _run_one(args.scenario, overrides, args.seed, args.out)
    except InvalidScenario as e:
        return _error(EXIT_USAGE, str(e))
    print(f"{name}: {metrics.status} in {metrics.finish_time:.2f} s sim time")
    if metrics.status == GOAL_REACHED:
        return EXIT_OK
    return EXIT_COLLISION if metrics.status == COLLISION else EXIT_DNF


def _batch_worker(job):
    path, overrides, seed, out_dir = job
    try:
        name, metrics = _run_one(path, overrides, seed, out_dir)
        return name, metrics.to_dict(), None
    except InvalidScenario as e:
        return Path(path).stem, None, str(e)


def cmd_batch(args):
    try:
        overrides = _parse_set(args.set)
    except InvalidScenario as e:
        return _error(EXIT_USAGE, str(e))
    jobs = [(path, overrides, args.seed, args.out) for path in args.scenarios]
    if args.parallel > 1 and len(jobs) > 1:
        with Pool(args.parallel) as pool:
            results = pool.map(_batch_worker, jobs)
    else:
        results = [_batch_worker(job) for job in jobs]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = out / "summary.csv"
    ok = True
    with open(summary, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(METRIC_FIELDS)
        for name, metrics, err in results:
            if metrics is None:
                ok = False
                _error(EXIT_USAGE, f"{name}: {err}")
                continue
            if metrics["status"] != GOAL_REACHED:
                ok = False
            writer.writerow([name] + [metrics[k] for k in METRIC_FIELDS[1:]])
    succeeded = sum(1 for _, m, _ in results if m and m["status"] == GOAL_REACHED)
    print(f"{succeeded}/{len(results)} runs reached their goals; summary in {summary}")
    return EXIT_OK if ok else EXIT_USAGE


def cmd_plan(args):
    try:
        overrides = _parse_set(args.set)
        scenario = _load_with_overrides(args.world, overrides, None)
    except InvalidScenario as e:
        return _error(EXIT_USAGE, str(e))
    params = scenario.clearance_params
    if args.design:
        params = CLEARANCE_DESIGNS[args.design]
    grid = rasterize_world(scenario.world)
    clearance = ClearanceField(grid, params, scenario.robot_radius)
    start = np.array(args.start if args.start else scenario.start[:2])
    goal = np.array(args.goal if args.goal else scenario.goals[0])
    try:
        result = plan(PlanQuery(start, goal, clearance))
    except NoPath as e:
        return _error(EXIT_NOPATH, str(e))
    except PlanError as e:
        return _error(EXIT_USAGE, str(e))
    doc = {
        "sigmas": [float(s) for s in result.path.sigmas],
        "vertices": [[float(x), float(y)] for x, y in result.path.vertices],
        "cost": result.cost,
    }
    print(json.dumps(doc))
    return EXIT_OK


def cmd_oracle(args):
    rng = np.random.default_rng(args.seed)
    if args.instances:
        with open(args.instances) as f:
            raw = json.load(f)
        instances = [
            (
                np.array(item["u_g"], dtype=float),
                LocalSafeZone(np.array(item["center"], dtype=float), float(item["radius"])),
                [CbfConstraint(np.array(c["a"], dtype=float), float(c["b"]), i)
                 for i, c in enumerate(item["constraints"])],
            )
            for item in raw
        ]
    else:
        instances = [random_projection_instance(rng) for _ in range(args.n)]
    worst = 0.0
    checked = 0
    for u_g, zone, cons in instances:
        result = solve_safe_input(u_g, zone, cons)
        if result.status == "fallback":
            continue
        reference = brute_force_oracle(u_g, zone, cons, args.step)
        if reference is None:
            return _error(EXIT_USAGE, "oracle found solver-feasible instance infeasible")
        deviation = abs(
            float(np.linalg.norm(result.u - u_g)) - float(np.linalg.norm(reference - u_g))
        )
        worst = max(worst, deviation)
        checked += 1
    print(f"checked {checked} feasible instances, max deviation {worst:.3e}")
    return EXIT_OK if worst <= 2.0 * args.step else EXIT_USAGE


def random_projection_instance(rng, max_radius=5.0, max_constraints=6):
    """Random projection instance with a guaranteed feasible anchor point."""
    radius = rng.uniform(0.3, max_radius)
    center = rng.uniform(-2.0, 2.0, 2)
    anchor = center + rng.uniform(0.0, 0.8 * radius) * _unit(rng)
    constraints = []
    for i in range(int(rng.integers(0, max_constraints + 1))):
        a = _unit(rng)
        margin = rng.uniform(0.05, 1.5)
        constraints.append(CbfConstraint(a, float(margin - a @ anchor), i))
    u_g = anchor + rng.uniform(0.0, 0.3) * _unit(rng)
    return u_g, LocalSafeZone(center, radius), constraints


def _unit(rng):
    v = rng.normal(size=2)
    return v / np.linalg.norm(v)


def _xy(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected x,y")
    return [float(parts[0]), float(parts[1])]


def build_parser():
    parser = argparse.ArgumentParser(prog="east", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one scenario")
    p_run.add_argument("scenario")
    p_run.add_argument("-o", "--out", default="out")
    p_run.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_run.add_argument("--seed", type=int)
    p_run.set_defaults(func=cmd_run)

    p_batch = sub.add_parser("batch", help="simulate many scenarios, emit a summary table")
    p_batch.add_argument("scenarios", nargs="*")
    p_batch.add_argument("-o", "--out", default="out")
    p_batch.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_batch.add_argument("--seed", type=int)
    p_batch.add_argument("--parallel", type=int, default=1)
    p_batch.set_defaults(func=cmd_batch)

    p_plan = sub.add_parser("plan", help="plan once on a world and print the path JSON")
    p_plan.add_argument("world", help="scenario file providing the world block")
    p_plan.add_argument("--start", type=_xy)
    p_plan.add_argument("--goal", type=_xy)
    p_plan.add_argument("--design", choices=sorted(CLEARANCE_DESIGNS))
    p_plan.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_plan.set_defaults(func=cmd_plan)

    p_oracle = sub.add_parser("oracle", help="compare the projection solver with brute force")
    p_oracle.add_argument("-n", type=int, default=1000)
    p_oracle.add_argument("--seed", type=int, default=42)
    p_oracle.add_argument("--step", type=float, default=1e-3)
    p_oracle.add_argument("--instances", help="JSON file of curated instances")
    p_oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
