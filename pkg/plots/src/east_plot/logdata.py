"""Readers for the simulator's CSV log and scenario JSON interfaces.

This package deliberately never imports the navigation library; it speaks
only the documented file formats.
"""

from __future__ import annotations

import csv
import json
import math

import numpy as np

LOG_COLUMNS = [
    "t", "x", "y", "theta", "v", "omega", "g_x", "g_y", "ug_x", "ug_y",
    "ubar_x", "ubar_y", "sigma", "zone_radius", "d_cone_obs", "d_robot_obs",
    "k_v", "h_star", "status", "replanned",
]

_FLOAT_COLUMNS = LOG_COLUMNS[:18]


class LogFormatError(ValueError):
    pass


class RunLog:
    """Column-oriented view of one run log."""

    def __init__(self, columns, statuses):
        self.columns = columns
        self.statuses = statuses

    def __getattr__(self, name):
        try:
            return self.columns[name]
        except KeyError:
            raise AttributeError(name)

    def __len__(self):
        return len(self.columns["t"])

    @property
    def has_movers(self):
        h = self.columns["h_star"]
        return bool(np.isfinite(h).any())


def read_log(path):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise LogFormatError(f"{path}: empty file")
        if header != LOG_COLUMNS:
            raise LogFormatError(f"{path}: unexpected columns {header[:4]}...")
        rows = list(reader)
    if not rows:
        raise LogFormatError(f"{path}: no records")
    data = {name: np.empty(len(rows)) for name in _FLOAT_COLUMNS}
    statuses = []
    for i, row in enumerate(rows):
        if len(row) != len(LOG_COLUMNS):
            raise LogFormatError(f"{path}: row {i + 2} has {len(row)} fields")
        try:
            for j, name in enumerate(_FLOAT_COLUMNS):
                data[name][i] = float(row[j])
        except ValueError as e:
            raise LogFormatError(f"{path}: row {i + 2}: {e}")
        statuses.append(row[18])
    return RunLog(data, statuses)


def read_world(path):
    """Scenario JSON: world geometry plus start/goal markers."""
    with open(path) as f:
        doc = json.load(f)
    world = doc.get("world")
    if world is None or "size" not in world:
        raise LogFormatError(f"{path}: not a scenario file (no world block)")
    start = doc.get("robot", {}).get("start")
    goals = doc.get("goals", [])
    movers = doc.get("movers", [])
    return {
        "size": world["size"],
        "origin": world.get("origin", [0.0, 0.0]),
        "shapes": world.get("shapes", []),
        "start": start,
        "goals": goals,
        "movers": movers,
    }


def read_path(path):
    """Path JSON as emitted by the planner CLI."""
    with open(path) as f:
        doc = json.load(f)
    if "vertices" not in doc:
        raise LogFormatError(f"{path}: not a path file (no vertices)")
    return np.asarray(doc["vertices"], dtype=float)
