"""Offline rendering of trajectory and metric figures from run logs."""

from .logdata import LogFormatError, read_log, read_path, read_world
from .render import comparison_figure, metrics_figure, trajectory_figure

__version__ = "0.1.0"
