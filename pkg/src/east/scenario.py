"""Scenario files: world geometry, robot setup, movers, and parameter block."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .gridmap import CLEARANCE_DESIGNS, FREE, OCCUPIED, UNKNOWN, ClearanceParams, OccupancyGrid


class InvalidScenario(ValueError):
    pass


DEFAULT_PARAMS = {
    "k_g": 2.0,
    "k_v": 1.0,
    "k_v_mode": "adaptive",
    "k_omega": 1.5,
    "gamma": 0.2,
    "q1": 1.0,
    "q2": 9.0,
    "v_max": 2.0,
    "omega_max": 4.0,
    "clearance": {"design": "medium", "c_unknown": 3.0},
    "rates": {"physics_hz": 100, "control_hz": 50, "mapping_hz": 20, "replan_hz": 10},
    "sensing_radius": 8.0,
    "lidar": {"beams": 360, "max_range": 10.0},
    "lsz_semantics": "radius",
    "horizon": 300.0,
    "goal_tolerance": 0.2,
    "seed": 0,
}


@dataclass
class MoverSpec:
    waypoints: np.ndarray
    speed: float
    radius: float
    mode: str = "loop"


@dataclass
class Scenario:
    name: str
    world: dict
    start: np.ndarray
    goals: list
    robot_radius: float
    movers: list
    params: dict

    @property
    def clearance_params(self):
        spec = self.params["clearance"]
        design = spec.get("design")
        if design is not None:
            base = CLEARANCE_DESIGNS[design]
            return ClearanceParams(
                c_u=spec.get("c_u", base.c_u),
                kappa=spec.get("kappa", base.kappa),
                c_f=spec.get("c_f", base.c_f),
                c_unknown=spec.get("c_unknown", 3.0),
            )
        return ClearanceParams(
            c_u=spec["c_u"], kappa=spec["kappa"], c_f=spec["c_f"],
            c_unknown=spec.get("c_unknown", 3.0),
        )


def _merged(defaults, override):
    out = dict(defaults)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merged(out[key], value)
        else:
            out[key] = value
    return out


def load_scenario(data, name="scenario"):
    """Build a Scenario from a parsed JSON document, validating the schema."""
    if not isinstance(data, dict):
        raise InvalidScenario("scenario document must be a JSON object")
    for block in ("world", "robot", "goals"):
        if block not in data:
            raise InvalidScenario(f"scenario is missing the {block!r} block")
    world = data["world"]
    for key in ("size", "resolution"):
        if key not in world:
            raise InvalidScenario(f"world block is missing {key!r}")
    robot = data["robot"]
    if "start" not in robot or len(robot["start"]) != 3:
        raise InvalidScenario("robot.start must be [x, y, theta]")
    goals = [np.asarray(g, dtype=float) for g in data["goals"]]
    if not goals:
        raise InvalidScenario("at least one goal is required")

    params = _merged(DEFAULT_PARAMS, data.get("params", {}))
    _check_params(params, name)

    movers = []
    for m in data.get("movers", []):
        wps = np.asarray(m["waypoints"], dtype=float)
        if wps.ndim != 2 or wps.shape[0] < 1 or wps.shape[1] != 2:
            raise InvalidScenario("mover waypoints must be a list of [x, y]")
        if m["speed"] < 0 or m["radius"] <= 0:
            raise InvalidScenario("mover speed must be >= 0 and radius > 0")
        movers.append(MoverSpec(wps, float(m["speed"]), float(m["radius"]),
                                m.get("mode", "loop")))

    scenario = Scenario(
        name=data.get("name", name),
        world=world,
        start=np.asarray(robot["start"], dtype=float),
        goals=goals,
        robot_radius=float(robot.get("radius", 0.3)),
        movers=movers,
        params=params,
    )
    scenario.clearance_params  # validates the design block
    return scenario


def load_scenario_file(path):
    try:
        with open(path) as f:
            data = json.load(f)
    except FileNotFoundError:
        raise InvalidScenario(f"scenario file not found: {path}")
    except json.JSONDecodeError as e:
        raise InvalidScenario(f"scenario file {path} is not valid JSON: {e}")
    name = str(path).rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return load_scenario(data, name=name)


def _check_params(params, name):
    rates = params["rates"]
    hz = [rates["replan_hz"], rates["mapping_hz"], rates["control_hz"], rates["physics_hz"]]
    if not all(h > 0 for h in hz):
        raise InvalidScenario("all rates must be positive")
    if not (hz[0] <= hz[1] <= hz[2] <= hz[3]):
        raise InvalidScenario("rates must satisfy replan <= mapping <= control <= physics")
    for low, high in ((0, 3), (1, 3), (2, 3)):
        if hz[high] % hz[low] != 0:
            raise InvalidScenario("physics rate must be a multiple of every other rate")
    dt_control = 1.0 / rates["control_hz"]
    if params["k_g"] * dt_control >= 1.0:
        raise InvalidScenario(
            f"{name}: k_g * control period = {params['k_g'] * dt_control} must be < 1"
        )
    if params["k_v_mode"] not in ("adaptive", "fixed"):
        raise InvalidScenario("k_v_mode must be 'adaptive' or 'fixed'")
    if not (params["q2"] >= params["q1"] > 0):
        raise InvalidScenario("directional weights need q2 >= q1 > 0")
    if params["lsz_semantics"] not in ("radius", "paper-literal"):
        raise InvalidScenario("lsz_semantics must be 'radius' or 'paper-literal'")


_TOP_LEVEL_KEYS = {"name", "world", "robot", "goals", "movers", "params"}


def set_override(data, dotted_key, value):
    """Apply a --set style override (dotted path) onto a raw scenario dict."""
    keys = dotted_key.split(".")
    if keys[0] not in _TOP_LEVEL_KEYS:
        raise InvalidScenario(f"override path {dotted_key!r} not in scenario schema")
    if keys[0] == "params" and len(keys) > 1 and keys[1] not in DEFAULT_PARAMS:
        raise InvalidScenario(f"override path {dotted_key!r} not in scenario schema")
    node = data
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            node[k] = {}
        node = node[k]
    node[keys[-1]] = value
    return data


def rasterize_world(world):
    """Build the ground-truth occupancy grid from a world description.

    A cell is occupied when its center falls inside any shape. Supported
    shapes: rect {"min": [x, y], "size": [w, h]}, circle {"center",
    "radius"}, and border {"thickness"} for the outer wall ring.
    """
    size = world["size"]
    res = float(world["resolution"])
    origin = np.asarray(world.get("origin", (0.0, 0.0)), dtype=float)
    width = int(round(size[0] / res))
    height = int(round(size[1] / res))
    if width < 1 or height < 1:
        raise InvalidScenario("world size must cover at least one cell")
    xs = origin[0] + (np.arange(width) + 0.5) * res
    ys = origin[1] + (np.arange(height) + 0.5) * res
    cx, cy = np.meshgrid(xs, ys)
    occ = np.zeros((height, width), dtype=bool)
    for shape in world.get("shapes", []):
        kind = shape.get("type")
        if kind == "rect":
            x0, y0 = shape["min"]
            w, h = shape["size"]
            occ |= (cx >= x0) & (cx <= x0 + w) & (cy >= y0) & (cy <= y0 + h)
        elif kind == "circle":
            px, py = shape["center"]
            occ |= (cx - px) ** 2 + (cy - py) ** 2 <= shape["radius"] ** 2
        elif kind == "border":
            t = shape.get("thickness", res)
            occ |= (cx - origin[0] <= t) | (cy - origin[1] <= t)
            occ |= (origin[0] + size[0] - cx <= t) | (origin[1] + size[1] - cy <= t)
        else:
            raise InvalidScenario(f"unknown shape type: {kind!r}")
    cells = np.where(occ, OCCUPIED, FREE).astype(np.int8)
    return OccupancyGrid(width, height, res, origin, cells)


def initial_map(world, true_grid):
    """Robot's starting map: the true grid when known, otherwise all unknown."""
    if world.get("known", False):
        return true_grid.with_cells(true_grid.cells)
    blank = np.full_like(true_grid.cells, UNKNOWN)
    return true_grid.with_cells(blank)
