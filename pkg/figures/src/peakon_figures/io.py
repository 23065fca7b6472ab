"""Strict parsers for run-directory files, with line-numbered diagnostics.

A trajectory CSV has a header ``t,<name>,<name>,...`` followed by rows of
shortest round-trip decimals; the time column must increase strictly. An
event log is a JSON list of ``{"kind": str, "indices": [int, ...],
"time": float}`` objects (extra keys are allowed and preserved).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = ["MalformedInputError", "TrajectoryTable", "load_events", "load_trajectory"]


class MalformedInputError(ValueError):
    """Raised when an input file does not parse; message carries path:line."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = int(line)
        super().__init__(f"{self.path}:{self.line}: {message}")


@dataclass(frozen=True)
class TrajectoryTable:
    """One parsed trajectory CSV: times, one column of values per curve."""

    path: str
    columns: tuple  # non-time column names, in file order
    times: np.ndarray  # shape (n_rows,)
    values: np.ndarray  # shape (n_rows, n_columns)

    def __post_init__(self):
        self.times.setflags(write=False)
        self.values.setflags(write=False)

    @property
    def n_curves(self) -> int:
        return len(self.columns)

    def interp(self, t: float) -> np.ndarray:
        """Values of every curve at time ``t`` by linear interpolation."""
        return np.array([
            np.interp(t, self.times, self.values[:, j])
            for j in range(self.values.shape[1])
        ])


def load_trajectory(path) -> TrajectoryTable:
    """Parse a trajectory CSV, failing loudly with the offending line number."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise MalformedInputError(path, 0, f"cannot read file: {exc}") from exc

    if not lines or not lines[0].strip():
        raise MalformedInputError(path, 1, "missing header row")
    header = [c.strip() for c in lines[0].split(",")]
    if header[0] != "t" or len(header) < 2:
        raise MalformedInputError(
            path, 1, f"header must be 't,<name>,...', got {lines[0]!r}")
    if any(not name for name in header):
        raise MalformedInputError(path, 1, "header has an empty column name")

    n_cols = len(header)
    times = []
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            raise MalformedInputError(path, lineno, "blank row inside data")
        cells = line.split(",")
        if len(cells) != n_cols:
            raise MalformedInputError(
                path, lineno,
                f"expected {n_cols} columns, found {len(cells)}")
        parsed = []
        for name, cell in zip(header, cells):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise MalformedInputError(
                    path, lineno,
                    f"column {name!r}: {cell!r} is not a number") from None
        if not all(np.isfinite(parsed)):
            raise MalformedInputError(path, lineno, "non-finite value in row")
        if times and parsed[0] <= times[-1]:
            raise MalformedInputError(
                path, lineno,
                f"time column not strictly increasing "
                f"({parsed[0]!r} after {times[-1]!r})")
        times.append(parsed[0])
        rows.append(parsed[1:])

    if not rows:
        raise MalformedInputError(path, 2, "no data rows")
    return TrajectoryTable(
        path=str(path),
        columns=tuple(header[1:]),
        times=np.asarray(times, dtype=float),
        values=np.asarray(rows, dtype=float),
    )


def load_events(path) -> list:
    """Parse an event log; returns a list of dicts (possibly empty)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise MalformedInputError(path, 0, f"cannot read file: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInputError(path, exc.lineno, f"invalid JSON: {exc.msg}") from exc

    if not isinstance(data, list):
        raise MalformedInputError(path, 1, "event log must be a JSON list")
    for k, entry in enumerate(data):
        if not isinstance(entry, dict):
            raise MalformedInputError(path, 1, f"event #{k} is not an object")
        missing = {"kind", "indices", "time"} - set(entry)
        if missing:
            raise MalformedInputError(
                path, 1, f"event #{k} missing keys {sorted(missing)}")
        if (not isinstance(entry["indices"], list)
                or not entry["indices"]
                or not all(isinstance(i, int) and i >= 1
                           for i in entry["indices"])):
            raise MalformedInputError(
                path, 1, f"event #{k}: indices must be 1-based integers")
        if not isinstance(entry["time"], (int, float)):
            raise MalformedInputError(path, 1, f"event #{k}: time must be a number")
    return data
