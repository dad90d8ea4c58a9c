"""Figure builders for trajectory and metric plots from run logs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.collections import LineCollection
from matplotlib.patches import Circle, Rectangle

plt.rcParams.update({
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 9,
})


def _draw_world(ax, world):
    ox, oy = world["origin"]
    w, h = world["size"]
    ax.add_patch(Rectangle((ox, oy), w, h, fill=False, edgecolor="0.3", lw=1.0))
    for shape in world["shapes"]:
        kind = shape.get("type")
        if kind == "rect":
            ax.add_patch(Rectangle(shape["min"], *shape["size"], color="0.45"))
        elif kind == "circle":
            ax.add_patch(Circle(shape["center"], shape["radius"], color="0.45"))
        elif kind == "border":
            t = shape.get("thickness", 0.1)
            ax.add_patch(Rectangle((ox, oy), w, t, color="0.45"))
            ax.add_patch(Rectangle((ox, oy + h - t), w, t, color="0.45"))
            ax.add_patch(Rectangle((ox, oy), t, h, color="0.45"))
            ax.add_patch(Rectangle((ox + w - t, oy), t, h, color="0.45"))
    for m in world.get("movers", []):
        wps = np.asarray(m["waypoints"], dtype=float)
        ax.plot(wps[:, 0], wps[:, 1], ls="--", color="0.7", lw=0.8)
        ax.add_patch(Circle(wps[0], m["radius"], fill=False, edgecolor="0.6", ls=":"))
    if world.get("start") is not None:
        ax.plot(world["start"][0], world["start"][1], "r*", ms=11, zorder=5)
    for goal in world.get("goals", []):
        ax.plot(goal[0], goal[1], "g*", ms=11, zorder=5)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")


def _colored_trajectory(ax, log, fig, label="d(p) [m]"):
    pts = np.stack([log.x, log.y], axis=1)
    segs = np.stack([pts[:-1], pts[1:]], axis=1)
    colors = np.asarray(log.d_robot_obs)[1:]
    lc = LineCollection(segs, cmap="viridis", array=colors, lw=2.0)
    ax.add_collection(lc)
    fig.colorbar(lc, ax=ax, shrink=0.8, label=label)


def trajectory_figure(log, world=None, planned=None):
    """World, reference path, clearance-colored trajectory, governor trail."""
    fig, ax = plt.subplots(figsize=(7, 5.5))
    if world is not None:
        _draw_world(ax, world)
    if planned is not None:
        ax.plot(planned[:, 0], planned[:, 1], "k--", lw=1.2, label="planned path")
    else:
        # The nominal governor input traces the reference path actually used.
        ax.plot(log.ug_x, log.ug_y, "k--", lw=1.2, label="reference (governor input)")
    _colored_trajectory(ax, log, fig)
    step = max(1, len(log) // 60)
    ax.plot(log.g_x[::step], log.g_y[::step], ".", color="tab:blue", ms=3,
            label="governor")
    ax.legend(loc="best", fontsize=8)
    ax.autoscale_view()
    return fig


def metrics_figure(log):
    """Time-series panels; the barrier panel appears only when movers exist."""
    panels = [
        ("d_cone_obs", "d(M) [m]"),
        ("d_robot_obs", "d(p) [m]"),
        ("v", "v [m/s]"),
        ("k_v", "k_v"),
    ]
    if log.has_movers:
        panels.append(("h_star", "min h"))
    fig, axes = plt.subplots(len(panels), 1, sharex=True,
                             figsize=(7, 1.7 * len(panels)))
    for ax, (name, label) in zip(np.atleast_1d(axes), panels):
        values = np.asarray(log.columns[name])
        shown = np.where(np.isfinite(values), values, np.nan)
        ax.plot(log.t, shown, lw=1.0)
        ax.set_ylabel(label)
        if name == "h_star":
            ax.axhline(0.0, color="r", lw=0.8, ls=":")
    np.atleast_1d(axes)[-1].set_xlabel("t [s]")
    fig.align_ylabels()
    return fig


def comparison_figure(logs, labels, world=None):
    """Two or more runs overlaid, one color per run."""
    fig, ax = plt.subplots(figsize=(7, 5.5))
    if world is not None:
        _draw_world(ax, world)
    for log, label in zip(logs, labels):
        ax.plot(log.x, log.y, lw=1.8, label=f"{label} ({log.t[-1]:.2f} s)")
    ax.legend(loc="best", fontsize=8)
    ax.set_aspect("equal")
    ax.autoscale_view()
    return fig


def save(fig, out_path):
    fig.savefig(out_path, metadata={"Software": None})
    plt.close(fig)
