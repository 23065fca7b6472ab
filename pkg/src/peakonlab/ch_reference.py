"""Classical shallow-water N-peakon system used as the integrator's canary.

Unlike the constant-amplitude dynamics in the rest of the package, this
comparison model evolves both positions and amplitudes:

    dx_i/dt = sum_j p_j exp(-|x_i - x_j|),
    dp_i/dt = sum_j p_i p_j sgn(x_i - x_j) exp(-|x_i - x_j|),   sgn(0) = 0,

and conserves the quadratic form H0 = (1/2) sum_{ij} p_i p_j e^{-|x_i-x_j|}
exactly, along with total momentum sum_i p_i. That makes it the one place in
the package where conservation CAN be asserted tightly, so it validates the
shared RK4 core: H0 drift beyond 1e-6 relative or an ordering collision
aborts the run as an integrator misconfiguration.

For all-positive amplitudes the particles never collide; an overtaking pair
exchanges asymptotic speeds instead of crossing, and the limiting amplitudes
follow from the invariants alone (sum and sum of squares are both known at
infinite separation).

Mixed-sign configurations can genuinely collide in finite time with
amplitude blow-up; those runs abort rather than pretend.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from peakonlab.integrators import NumericalAbort, rk4_step

__all__ = ["CHState", "CHTrajectory", "ch_rhs", "ch_hamiltonian", "integrate_ch"]

_DRIFT_ABORT = 1e-6


@dataclass(frozen=True)
class CHState:
    """Positions and (time-dependent) amplitudes of the comparison model."""

    positions: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.positions, dtype=float))
        p = np.atleast_1d(np.asarray(self.amplitudes, dtype=float))
        if x.ndim != 1 or x.shape != p.shape or x.size == 0:
            raise ValueError("positions and amplitudes must be equal-length 1-d")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
            raise ValueError("state entries must be finite")
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "amplitudes", p)

    @property
    def n(self) -> int:
        return self.positions.size


def _pair_tables(x):
    diff = x[:, None] - x[None, :]
    return np.sign(diff), np.exp(-np.abs(diff))


def ch_rhs(state: CHState):
    """Velocity and amplitude-rate vectors (dx, dp); sgn(0)=0 drops self-terms."""
    x, p = state.positions, state.amplitudes
    sgn, decay = _pair_tables(x)
    dx = decay @ p
    dp = p * ((sgn * decay) @ p)
    return dx, dp


def ch_hamiltonian(state: CHState) -> float:
    """Conserved quadratic form (1/2) sum_ij p_i p_j e^{-|x_i-x_j|}."""
    x, p = state.positions, state.amplitudes
    _, decay = _pair_tables(x)
    return 0.5 * float(p @ decay @ p)


@dataclass
class CHTrajectory:
    """Stored comparison-model run: rows of positions and amplitudes."""

    times: np.ndarray
    positions: np.ndarray
    amplitudes: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_particles(self) -> int:
        return self.positions.shape[1]

    def final_state(self) -> CHState:
        return CHState(self.positions[-1], self.amplitudes[-1])

    def conservation_report(self) -> dict:
        """Max relative H0 drift and max absolute momentum drift over the rows."""
        h = np.array([
            ch_hamiltonian(CHState(x, p))
            for x, p in zip(self.positions, self.amplitudes)
        ])
        mom = self.amplitudes.sum(axis=1)
        scale = abs(h[0]) if h[0] != 0.0 else 1.0
        return {
            "H0_drift": float(np.max(np.abs(h - h[0])) / scale),
            "momentum_drift": float(np.max(np.abs(mom - mom[0]))),
        }

    def to_csv(self, path):
        n = self.n_particles
        cols = [f"x{j}" for j in range(1, n + 1)] + [f"p{j}" for j in range(1, n + 1)]
        with open(path, "w") as fh:
            fh.write("t," + ",".join(cols) + "\n")
            for t, x, p in zip(self.times, self.positions, self.amplitudes):
                row = [repr(float(t))]
                row += [repr(float(v)) for v in x]
                row += [repr(float(v)) for v in p]
                fh.write(",".join(row) + "\n")

    def report_to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.conservation_report(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def integrate_ch(state0: CHState, dt=1e-3, t_end=10.0, store_every=1) -> CHTrajectory:
    """RK4 run with conservation and collision watchdogs.

    Aborts when relative H0 drift exceeds 1e-6 (integrator misconfigured,
    e.g. dt too large), or when an initially ordered positive-amplitude
    configuration loses its ordering (which the exact flow forbids).
    """
    if dt <= 0.0 or t_end <= 0.0:
        raise ValueError("dt and t_end must be positive")
    if store_every < 1:
        raise ValueError("store_every must be >= 1")
    x0, p0 = state0.positions, state0.amplitudes
    n = state0.n
    watch_order = bool(np.all(p0 > 0.0)) and n > 1 and bool(
        np.all(np.diff(x0) > 0.0)
    )
    h_ref = ch_hamiltonian(state0)
    h_scale = abs(h_ref) if h_ref != 0.0 else 1.0

    def rhs(_t, y):
        st = CHState(y[:n], y[n:])
        dx, dp = ch_rhs(st)
        return np.concatenate((dx, dp))

    y = np.concatenate((x0, p0))
    n_steps = int(np.ceil(t_end / dt - 1e-12))
    times = [0.0]
    rows_x = [x0.copy()]
    rows_p = [p0.copy()]
    t = 0.0
    for k in range(n_steps):
        t_next = min((k + 1) * dt, t_end)
        y = rk4_step(rhs, t, y, t_next - t)
        t = t_next
        if not np.all(np.isfinite(y)):
            raise NumericalAbort("non-finite state", t)
        drift = abs(ch_hamiltonian(CHState(y[:n], y[n:])) - h_ref) / h_scale
        if drift > _DRIFT_ABORT:
            raise NumericalAbort(
                "conserved quantity drifting", t, {"relative_drift": drift}
            )
        if watch_order and np.any(np.diff(y[:n]) <= 0.0):
            raise NumericalAbort("ordering lost (collision)", t)
        if (k + 1) % store_every == 0 or (k + 1) == n_steps:
            times.append(t)
            rows_x.append(y[:n].copy())
            rows_p.append(y[n:].copy())
    return CHTrajectory(
        times=np.asarray(times),
        positions=np.asarray(rows_x),
        amplitudes=np.asarray(rows_p),
        meta={"dt": dt, "t_end": t_end, "store_every": store_every},
    )
