"""peakon_figures: batch rendering of peakonlab run outputs.

Consumes only the files a run directory publishes (``trajectory.csv``,
``events.json``) and turns them into deterministic image files. Rendering is
strictly read-only: arrays are plotted exactly as parsed.
"""

from peakon_figures.io import MalformedInputError, TrajectoryTable, load_events, load_trajectory
from peakon_figures.render import FigureSpec, RenderResult, render

__all__ = [
    "FigureSpec",
    "MalformedInputError",
    "RenderResult",
    "TrajectoryTable",
    "load_events",
    "load_trajectory",
    "render",
]
__version__ = "0.1.0"
