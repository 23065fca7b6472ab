"""Scenario-driven command line front end.

Built-in scenarios bind the named experiments to their standard initial
data; every run materializes its full effective configuration into
report.json so outputs are self-describing, and all integrators are
fixed-step and seed-free, so re-running a scenario reproduces its CSV files
byte for byte.

Outputs per run directory:
    trajectory.csv     primary trajectory (t,x1..xN rows)
    events.json        merge/split log of the primary trajectory
    diagnostics.json   exact field statistics and bound checks
    report.json        effective config + file inventory + runtimes
plus `<mode>_trajectory.csv` / `<mode>_events.json` for each overlay run.

Exit codes: 0 success, 2 configuration error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from peakonlab import __version__
from peakonlab.ch_reference import CHState, integrate_ch
from peakonlab.ensemble import PeakonEnsemble, Trajectory
from peakonlab.integrators import NumericalAbort
from peakonlab.kernels import Mollifier
from peakonlab.limit_dynamics import dispersive_integrate, sticky_integrate
from peakonlab.reg_dynamics import RegularizedConfig, integrate_regularized

__all__ = ["ScenarioConfig", "SCENARIOS", "run_scenario", "run_limit_suite", "main"]

MODES = ("regularized", "sticky", "dispersive_limit", "ch")


@dataclass
class ScenarioConfig:
    """Fully resolved run description; every field is explicit."""

    name: str
    amplitudes: tuple
    positions: tuple
    mode: str = "regularized"
    epsilon: float | None = None
    t_end: float = 2.5
    dt: float | None = None
    store_every: int = 1
    overlays: tuple = ()
    out_dir: str = "."
    jobs: int = 1

    def validate(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        for ov in self.overlays:
            if ov not in MODES:
                raise ValueError(f"overlay mode {ov!r} unknown")
        if len(self.amplitudes) != len(self.positions) or not self.amplitudes:
            raise ValueError("amplitudes and positions must be equal-length, nonempty")
        if self.mode == "regularized" and self.epsilon is None:
            raise ValueError("regularized mode requires epsilon")
        if self.epsilon is not None and self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.t_end <= 0.0:
            raise ValueError("t_end must be positive")
        if self.dt is not None and self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.store_every < 1:
            raise ValueError("store_every must be >= 1")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


SCENARIOS = {
    "fig1": dict(
        amplitudes=(4.0, 2.0, 1.0), positions=(-7.0, -5.0, -3.0),
        mode="regularized", epsilon=0.02, t_end=2.5, overlays=("sticky",),
    ),
    "fig2": dict(
        amplitudes=(4.0, 2.0, 3.0), positions=(-7.0, -6.0, -2.0),
        mode="regularized", epsilon=0.02, t_end=3.0,
        overlays=("dispersive_limit", "sticky"),
    ),
    "fig3a": dict(
        amplitudes=(4.0, 3.0, 2.0), positions=(-4.0, -3.0, 4.0),
        mode="sticky", t_end=2.5,
    ),
    "fig3b": dict(
        amplitudes=(4.0, 3.0, 2.0), positions=(-4.0, -2.0, 4.0),
        mode="sticky", t_end=2.5,
    ),
}


def _integrate(cfg: ScenarioConfig, mode: str):
    p = np.asarray(cfg.amplitudes, dtype=float)
    x = np.asarray(cfg.positions, dtype=float)
    if mode == "ch":
        dt = cfg.dt if cfg.dt is not None else 1e-3
        return integrate_ch(CHState(x, p), dt=dt, t_end=cfg.t_end,
                            store_every=cfg.store_every)
    ens = PeakonEnsemble(p, x)
    if mode == "regularized":
        run_cfg = RegularizedConfig(t_end=cfg.t_end, dt=cfg.dt,
                                    store_every=cfg.store_every)
        return integrate_regularized(ens, Mollifier(cfg.epsilon), run_cfg)
    if mode == "sticky":
        return sticky_integrate(ens, t_end=cfg.t_end, dt=cfg.dt,
                                store_every=cfg.store_every)
    if mode == "dispersive_limit":
        return dispersive_integrate(ens, t_end=cfg.t_end, dt=cfg.dt,
                                    store_every=cfg.store_every)
    raise ValueError(f"unknown mode {mode!r}")


def _write_run(traj, out_dir, prefix=""):
    traj_path = os.path.join(out_dir, f"{prefix}trajectory.csv")
    events_path = os.path.join(out_dir, f"{prefix}events.json")
    if isinstance(traj, Trajectory):
        traj.to_csv(traj_path)
        traj.events_to_json(events_path)
    else:  # comparison-model trajectory: positions and amplitudes both stored
        traj.to_csv(traj_path)
        with open(events_path, "w") as fh:
            fh.write("[]\n")
    return [traj_path, events_path]


def _diagnostics_payload(cfg: ScenarioConfig, traj) -> dict:
    if not isinstance(traj, Trajectory):  # comparison model: conservation
        payload = traj.conservation_report()
        payload["kind"] = "conservation"
        return payload
    p = np.asarray(cfg.amplitudes, dtype=float)
    m0 = float(np.sum(np.abs(p)))
    checks = []
    ok = True
    for t in (traj.times[0], traj.times[traj.times.size // 2], traj.times[-1]):
        ens = PeakonEnsemble(p, traj.position_at(t))
        row = {
            "t": float(t),
            "tv_u": ens.total_variation_u(),
            "tv_ux": ens.total_variation_ux(),
            "sup_u": ens.sup_u(),
            "sup_ux": ens.sup_ux(),
        }
        row["bounds_hold"] = bool(
            row["tv_u"] <= m0 + 1e-9
            and row["tv_ux"] <= 2 * m0 + 1e-9
            and row["sup_u"] <= 0.5 * m0 + 1e-9
            and row["sup_ux"] <= 0.5 * m0 + 1e-9
        )
        ok = ok and row["bounds_hold"]
        checks.append(row)
    return {
        "kind": "field_statistics",
        "signed_mass": float(np.sum(p)),
        "absolute_mass": m0,
        "checkpoints": checks,
        "all_bounds_hold": ok,
        "n_events": len(traj.events),
        "final_blocks": traj.meta.get("final_blocks"),
    }


def run_scenario(cfg: ScenarioConfig) -> dict:
    """Execute a scenario (primary + overlays), write files, return report."""
    cfg.validate()
    os.makedirs(cfg.out_dir, exist_ok=True)
    t_start = time.perf_counter()
    runs = [("", cfg.mode)] + [(f"{ov}_", ov) for ov in cfg.overlays]

    results = {}
    if cfg.jobs > 1 and len(runs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = {
                pool.submit(_integrate, cfg, mode): (prefix, mode)
                for prefix, mode in runs
            }
            for fut, (prefix, mode) in futures.items():
                results[prefix] = (mode, fut.result())
    else:
        for prefix, mode in runs:
            results[prefix] = (mode, _integrate(cfg, mode))

    files = []
    for prefix, mode in runs:
        files += _write_run(results[prefix][1], cfg.out_dir, prefix)

    diag = _diagnostics_payload(cfg, results[""][1])
    diag_path = os.path.join(cfg.out_dir, "diagnostics.json")
    with open(diag_path, "w") as fh:
        json.dump(diag, fh, indent=2, sort_keys=True)
        fh.write("\n")
    files.append(diag_path)

    primary = results[""][1]
    effective_dt = primary.meta.get("dt")
    report = {
        "version": __version__,
        "scenario": cfg.name,
        "config": {
            "amplitudes": list(cfg.amplitudes),
            "positions": list(cfg.positions),
            "mode": cfg.mode,
            "epsilon": cfg.epsilon,
            "t_end": cfg.t_end,
            "dt": effective_dt,
            "store_every": cfg.store_every,
            "overlays": list(cfg.overlays),
            "jobs": cfg.jobs,
        },
        "events": [
            ev.to_dict() for ev in getattr(results[""][1], "events", [])
        ],
        "files": sorted([os.path.basename(f) for f in files] + ["report.json"]),
        "runtime_seconds": time.perf_counter() - t_start,
    }
    report_path = os.path.join(cfg.out_dir, "report.json")
    with open(report_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def run_limit_suite(out_dir=".", epsilons=(0.2, 0.1, 0.05, 0.02),
                    families=("gaussian", "bump")) -> dict:
    """Small-width sweep: self-interaction and pair-speed integrals.

    Reports the raw values per width, Richardson extrapolations against the
    limits 1/12 and 1/6, and the spread of the pair-speed integral over
    offsets s in {0.5, 1, 2} with the corresponding tail bound.
    """
    from peakonlab.kernels import richardson_extrapolate

    os.makedirs(out_dir, exist_ok=True)
    t_start = time.perf_counter()
    suite = {}
    for family in families:
        rows = []
        for eps in epsilons:
            moll = Mollifier(eps, family=family)
            self_term = moll.gx_square_at_zero()
            speeds = {s: moll.pair_speed_integral(s) for s in (0.5, 1.0, 2.0)}
            tails = {s: moll.pair_speed_tail_bound(s) for s in (0.5, 1.0, 2.0)}
            spread = max(speeds.values()) - min(speeds.values())
            rows.append({
                "epsilon": eps,
                "self_interaction": self_term,
                "self_interaction_error": abs(self_term - 1.0 / 12.0),
                "pair_speed": {str(s): v for s, v in speeds.items()},
                "pair_speed_error_s1": abs(speeds[1.0] - 1.0 / 6.0),
                "s_spread": spread,
                "s_tail_bound": max(tails.values()),
            })
        eps_pair = (rows[-2]["epsilon"], rows[-1]["epsilon"])
        self_pair = (rows[-2]["self_interaction"], rows[-1]["self_interaction"])
        speed_pair = (rows[-2]["pair_speed"]["1.0"], rows[-1]["pair_speed"]["1.0"])
        suite[family] = {
            "rows": rows,
            "self_interaction_extrapolated": richardson_extrapolate(
                eps_pair, self_pair
            ),
            "pair_speed_extrapolated": richardson_extrapolate(
                eps_pair, speed_pair
            ),
        }
    report = {
        "version": __version__,
        "scenario": "limit_suite",
        "limits": {"self_interaction": 1.0 / 12.0, "pair_speed": 1.0 / 6.0},
        "families": suite,
        "runtime_seconds": time.perf_counter() - t_start,
    }
    path = os.path.join(out_dir, "report.json")
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def _config_from_args(args) -> ScenarioConfig:
    if args.config:
        with open(args.config) as fh:
            payload = json.load(fh)
        base = {}
        name = payload.get("scenario", "custom")
        if name in SCENARIOS:
            base.update(SCENARIOS[name])
        base.update({k: v for k, v in payload.items() if k != "scenario"})
        if "amplitudes" not in base or "positions" not in base:
            raise ValueError("config file needs amplitudes and positions")
        cfg = ScenarioConfig(
            name=name,
            amplitudes=tuple(base["amplitudes"]),
            positions=tuple(base["positions"]),
            mode=base.get("mode", "regularized"),
            epsilon=base.get("epsilon"),
            t_end=base.get("t_end", 2.5),
            dt=base.get("dt"),
            store_every=base.get("store_every", 1),
            overlays=tuple(base.get("overlays", ())),
        )
    else:
        if args.scenario not in SCENARIOS:
            known = ", ".join(sorted(SCENARIOS) + ["limit_suite"])
            raise ValueError(f"unknown scenario {args.scenario!r}; known: {known}")
        base = dict(SCENARIOS[args.scenario])
        cfg = ScenarioConfig(
            name=args.scenario,
            amplitudes=tuple(base["amplitudes"]),
            positions=tuple(base["positions"]),
            mode=base.get("mode", "regularized"),
            epsilon=base.get("epsilon"),
            t_end=base.get("t_end", 2.5),
            dt=base.get("dt"),
            store_every=base.get("store_every", 1),
            overlays=tuple(base.get("overlays", ())),
        )
    # command-line overrides
    if args.mode:
        cfg.mode = args.mode
    if args.epsilon is not None:
        cfg.epsilon = args.epsilon
    if args.t_end is not None:
        cfg.t_end = args.t_end
    if args.dt is not None:
        cfg.dt = args.dt
    if args.store_every is not None:
        cfg.store_every = args.store_every
    cfg.out_dir = args.out
    cfg.jobs = args.jobs
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="peakonlab",
        description="Peaked-wave particle dynamics: scenarios and sweeps.",
    )
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--scenario", help="built-in scenario name "
                       "(fig1, fig2, fig3a, fig3b, limit_suite)")
    group.add_argument("--config", help="JSON config file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--epsilon", type=float, default=None,
                        help="mollifier width (regularized mode)")
    parser.add_argument("--t-end", dest="t_end", type=float, default=None)
    parser.add_argument("--dt", type=float, default=None)
    parser.add_argument("--mode", choices=MODES, default=None)
    parser.add_argument("--store-every", dest="store_every", type=int,
                        default=None)
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker threads for overlay runs")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.scenario == "limit_suite":
            report = run_limit_suite(out_dir=args.out)
            print(f"limit_suite: report written to {args.out}/report.json")
            for family, data in report["families"].items():
                print(
                    f"  {family}: self-interaction -> "
                    f"{data['self_interaction_extrapolated']:.6f}, "
                    f"pair speed -> {data['pair_speed_extrapolated']:.6f}"
                )
            return 0
        cfg = _config_from_args(args)
        report = run_scenario(cfg)
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3
    n_ev = len(report["events"])
    print(
        f"{report['scenario']}: mode={report['config']['mode']} "
        f"t_end={report['config']['t_end']} events={n_ev} -> {cfg.out_dir}"
    )
    for ev in report["events"]:
        print(f"  t={ev['time']:.6f} {ev['kind']} {tuple(ev['indices'])}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
