"""Shared fixtures: real run directories produced by the peakonlab CLI.

The figures package consumes only published files, so fixtures are generated
by invoking the producer as a subprocess and reading its output directory.
"""

import subprocess
import sys

import pytest


def _produce(scenario: str, out_dir) -> None:
    proc = subprocess.run(
        [sys.executable, "-m", "peakonlab.cli",
         "--scenario", scenario, "--out", str(out_dir)],
        capture_output=True, text=True)
    assert proc.returncode == 0, f"{scenario} failed: {proc.stderr}"


@pytest.fixture(scope="session")
def runs(tmp_path_factory):
    """Dict of scenario name -> run directory with real CLI outputs."""
    root = tmp_path_factory.mktemp("runs")
    dirs = {}
    for scenario in ("fig1", "fig2", "fig3a"):
        out = root / scenario
        _produce(scenario, out)
        dirs[scenario] = out
    return dirs
