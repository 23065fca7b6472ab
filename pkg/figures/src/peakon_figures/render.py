"""Deterministic trajectory plots: solid primary curves, dashed overlay,
event markers.

The renderer never touches the numbers: the arrays handed to the plotting
backend are exactly the parsed ones, and the result object exposes them so
callers can verify round-trip equality against an independent parse.
"""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from peakon_figures.io import TrajectoryTable, load_events, load_trajectory

__all__ = ["FigureSpec", "RenderResult", "render"]

FORMATS = ("png", "svg")
TIME_AXES = ("vertical", "horizontal")

# Fixed palette so output bytes do not depend on backend defaults.
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


@dataclass
class FigureSpec:
    """Everything one figure needs; validated before any file is written."""

    traj_path: str
    out_path: str
    overlay_path: str | None = None
    events_path: str | None = None
    time_axis: str = "vertical"
    x_range: tuple | None = None
    t_range: tuple | None = None
    title: str | None = None
    label: str = "smoothed run"
    overlay_label: str = "reference"

    def image_format(self) -> str:
        suffix = self.out_path.rsplit(".", 1)
        return suffix[1].lower() if len(suffix) == 2 else ""

    def validate(self):
        if self.image_format() not in FORMATS:
            raise ValueError(
                f"output format must be one of {FORMATS}, got {self.out_path!r}")
        if self.time_axis not in TIME_AXES:
            raise ValueError(
                f"time_axis must be one of {TIME_AXES}, got {self.time_axis!r}")
        for name, rng in (("x_range", self.x_range), ("t_range", self.t_range)):
            if rng is not None:
                lo, hi = rng
                if not (float(lo) < float(hi)):
                    raise ValueError(f"{name} must be (lo, hi) with lo < hi")


@dataclass(frozen=True)
class RenderResult:
    """What was drawn: parsed inputs plus the written path and marker count."""

    out_path: str
    primary: TrajectoryTable
    overlay: TrajectoryTable | None
    events: list
    marker_count: int


def _event_markers(table: TrajectoryTable, events: list):
    """(position, time) of each event: involved curves meet at the event."""
    coords = []
    for entry in events:
        t = float(entry["time"])
        if not (table.times[0] <= t <= table.times[-1]):
            continue
        cols = [i - 1 for i in entry["indices"] if 1 <= i <= table.n_curves]
        if not cols:
            continue
        spots = [np.interp(t, table.times, table.values[:, j]) for j in cols]
        coords.append((float(np.mean(spots)), t))
    return coords


def _plot_table(ax, table, vertical, linestyle, alpha, label):
    for j in range(table.n_curves):
        series_label = label if j == 0 else None
        xy = ((table.values[:, j], table.times) if vertical
              else (table.times, table.values[:, j]))
        ax.plot(*xy, linestyle=linestyle, color=PALETTE[j % len(PALETTE)],
                linewidth=1.6, alpha=alpha, label=series_label)


def render(spec: FigureSpec) -> RenderResult:
    """Draw one figure from run-directory files and write it to disk."""
    spec.validate()
    primary = load_trajectory(spec.traj_path)
    overlay = load_trajectory(spec.overlay_path) if spec.overlay_path else None
    events = load_events(spec.events_path) if spec.events_path else []
    if overlay is not None and overlay.n_curves != primary.n_curves:
        raise ValueError(
            f"column count mismatch: {spec.traj_path!r} has "
            f"{primary.n_curves} curves, {spec.overlay_path!r} has "
            f"{overlay.n_curves}")

    vertical = spec.time_axis == "vertical"
    markers = _event_markers(primary, events)

    with plt.rc_context({"svg.hashsalt": "peakon-figures"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.8), dpi=150)
        try:
            _plot_table(ax, primary, vertical, "-", 1.0, spec.label)
            if overlay is not None:
                _plot_table(ax, overlay, vertical, "--", 0.9,
                            spec.overlay_label)
            if markers:
                xs = [m[0] for m in markers]
                ts = [m[1] for m in markers]
                pts = (xs, ts) if vertical else (ts, xs)
                ax.scatter(*pts, marker="o", s=36, facecolor="black",
                           edgecolor="white", linewidths=0.8, zorder=5,
                           label="events")

            space_lab, time_lab = "x", "t"
            if vertical:
                ax.set_xlabel(space_lab)
                ax.set_ylabel(time_lab)
                if spec.x_range:
                    ax.set_xlim(*map(float, spec.x_range))
                if spec.t_range:
                    ax.set_ylim(*map(float, spec.t_range))
            else:
                ax.set_xlabel(time_lab)
                ax.set_ylabel(space_lab)
                if spec.t_range:
                    ax.set_xlim(*map(float, spec.t_range))
                if spec.x_range:
                    ax.set_ylim(*map(float, spec.x_range))
            if spec.title:
                ax.set_title(spec.title)
            ax.grid(True, linewidth=0.4, alpha=0.4)
            if overlay is not None or markers:
                ax.legend(loc="best", framealpha=0.9)
            fig.tight_layout()

            if spec.image_format() == "svg":
                # Drop the creation date so identical inputs give identical bytes.
                fig.savefig(spec.out_path, metadata={"Date": None})
            else:
                fig.savefig(spec.out_path)
        finally:
            plt.close(fig)

    return RenderResult(
        out_path=spec.out_path,
        primary=primary,
        overlay=overlay,
        events=events,
        marker_count=len(markers),
    )
