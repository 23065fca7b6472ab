"""Zero-width particle dynamics with sticky and dispersive contact rules.

When the smoothing width is sent to zero, a family of peak-shaped particles
with fixed amplitudes p_i and ordered positions x_1 <= ... <= x_N moves by

    dx_i/dt = u(x_i)^2 - u_x(x_i)^2 - (1/12) * (sum of amplitudes at x_i)^2,

where u is the superposed field, u_x omits the coincident particles, and the
last term is the self-interaction constant each coincident cluster carries
(the zero-width limit of the smoothed squared-slope at the vertex). For a
strictly ordered configuration this reduces to the quadratic form

    dx_i/dt = p_i^2/6 + (1/2) sum_{j != i} p_i p_j e^{-|x_i-x_j|}
              + sum_{m < i < n} p_m p_n e^{x_m - x_n},

evaluated here in O(N) per particle via prefix/suffix sums.

Collisions happen in finite time whenever a faster particle trails a slower
one. Two continuation rules are implemented:

* sticky — touching particles amalgamate into a cluster that carries the
  summed amplitude and moves as a single particle (momentum balances exactly
  at contact: the cluster speed is the amplitude-weighted mean of the
  incoming speeds).
* dispersive_limit — clusters additionally break apart as soon as some
  leading sub-block would outrun the trailing one: every contiguous
  partition of a cluster is probed with a virtual separation, and the first
  partition whose speed difference turns positive is released. This is the
  continuation selected by vanishing smoothing width.

Both integrators run classical RK4 on the deterministic grid t_k = k*dt and
localize contact/release times by bisection inside the offending step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from peakonlab.ensemble import PeakonEnsemble, Trajectory, TrajectoryEvent, field_slope, field_value
from peakonlab.integrators import NumericalAbort, integrate_fixed_grid, rk4_step

__all__ = [
    "ordered_rhs",
    "limiting_rhs",
    "two_peakon_collision_time",
    "three_peakon_split_gap",
    "three_peakon_split_time",
    "sticky_integrate",
    "dispersive_integrate",
    "two_peakon_crossing_trajectory",
    "two_peakon_unreordered_trajectory",
]

DEFAULT_DT = 1e-3


def ordered_rhs(positions, amplitudes, validate=True):
    """Velocities of an ordered configuration, O(N) via prefix/suffix sums.

    positions must be nondecreasing. Exact ties are evaluated as zero
    separation, which is only meaningful for probing (sub-block velocities of
    a touching group); cluster self-terms are the business of
    ``limiting_rhs``. validate=False skips the ordering check and evaluates
    the same index-ordered expression — the continuous frozen-order extension
    that trial integration steps may touch transiently while an event
    bisection narrows down the contact time.
    """
    x = np.asarray(positions, dtype=float)
    p = np.asarray(amplitudes, dtype=float)
    if validate and np.any(np.diff(x) < 0.0):
        raise ValueError("ordered_rhs needs nondecreasing positions")
    xi = x - x.mean()
    e_plus = p * np.exp(xi)
    e_minus = p * np.exp(-xi)
    # prefix sum over m < i and suffix sum over n > i
    left = np.concatenate(([0.0], np.cumsum(e_plus)[:-1]))
    suffix = np.cumsum(e_minus[::-1])[::-1]
    right = np.concatenate((suffix[1:], [0.0]))
    return (
        p * p / 6.0
        + 0.5 * p * np.exp(-xi) * left
        + 0.5 * p * np.exp(xi) * right
        + left * right
    )


def limiting_rhs(positions, amplitudes):
    """Velocities for arbitrary (possibly coincident) configurations.

    v_i = u(x_i)^2 - u_x(x_i)^2 - (1/12) P_i^2 with P_i the summed amplitude
    of the particles sharing x_i and u_x excluding those particles. Agrees
    with ``ordered_rhs`` on strictly separated configurations and gives each
    coincident cluster the common speed P^2/6 plus its external interactions.
    """
    x = np.asarray(positions, dtype=float)
    p = np.asarray(amplitudes, dtype=float)
    u = field_value(x, p, x)
    slope = field_slope(x, p, x)
    coincident = x[:, None] == x[None, :]
    cluster_mass = coincident @ p
    return u * u - slope * slope - cluster_mass * cluster_mass / 12.0


def two_peakon_collision_time(x1, x2, p1, p2) -> float:
    """Exact contact time of two particles started at x1 <= x2.

    The relative speed of an ordered pair is (p1^2 - p2^2)/6 independent of
    the gap (the direct exponential interactions cancel), so contact happens
    at 6*(x2-x1)/(p1^2-p2^2) — or never, when the trailing particle is not
    faster.
    """
    if x2 < x1:
        raise ValueError("need x1 <= x2")
    drive = p1 * p1 - p2 * p2
    if drive <= 0.0:
        return math.inf
    return 6.0 * (x2 - x1) / drive


def three_peakon_split_gap(p1, p2, p3):
    """Release threshold for a touching pair (p1,p2) with p3 ahead.

    With the pair amalgamated and a third particle ahead at gap S, the
    virtual sub-block speed difference is
    (p1+p2) * [ (p2-p1)/6 + (p3/2) e^{-S} ], which turns positive when
    S < ln(3*p3/(p1-p2)). Returns that threshold, or None when no positive
    gap satisfies it (e.g. p1 <= p2, or the third amplitude so small that
    (p1-p2) >= 3*p3 — then the pair never releases).
    """
    if p1 <= p2:
        return None  # leading sub-block already wants to leave at any gap
    if p3 <= 0.0:
        return None
    ratio = 3.0 * p3 / (p1 - p2)
    if ratio <= 1.0:
        return None  # threshold would sit at a nonpositive gap: no release
    return math.log(ratio)


def three_peakon_split_time(t_merge, gap_at_merge, p1, p2, p3):
    """Predicted release time after the (p1,p2) contact, gap to p3 given.

    The amalgamated pair approaches the third particle at the exact relative
    speed ((p1+p2)^2 - p3^2)/6, so the threshold gap from
    ``three_peakon_split_gap`` is reached after a linear transit. Returns
    None when there is no admissible threshold or no approach.
    """
    s_star = three_peakon_split_gap(p1, p2, p3)
    if s_star is None:
        return None
    approach = ((p1 + p2) ** 2 - p3 * p3) / 6.0
    if approach <= 0.0:
        return None
    if gap_at_merge <= s_star:
        return t_merge
    return t_merge + (gap_at_merge - s_star) / approach


# --------------------------------------------------------------------------
# event-driven cluster integration
# --------------------------------------------------------------------------


@dataclass
class _ClusterState:
    blocks: list  # list[list[int]] original 0-based indices, contiguous
    y: np.ndarray  # cluster positions, strictly increasing
    mass: np.ndarray  # summed amplitudes per cluster

    def expand(self, n: int) -> np.ndarray:
        row = np.empty(n)
        for b, pos in zip(self.blocks, self.y):
            row[b] = pos
        return row


def _initial_clusters(positions, amplitudes):
    blocks, y, mass = [], [], []
    i = 0
    n = positions.size
    while i < n:
        j = i
        while j + 1 < n and positions[j + 1] == positions[i]:
            j += 1
        blocks.append(list(range(i, j + 1)))
        y.append(positions[i])
        mass.append(float(np.sum(amplitudes[i : j + 1])))
        i = j + 1
    return _ClusterState(blocks=blocks, y=np.asarray(y), mass=np.asarray(mass))


def _virtual_gap(state: _ClusterState, b_idx, delta, floor):
    """Separation used when pulling block b_idx apart, clamped so neighbors
    keep their ordering; returns 0.0 when no safe positive gap exists."""
    d = delta
    if b_idx > 0:
        d = min(d, 0.25 * (state.y[b_idx] - state.y[b_idx - 1]))
    if b_idx + 1 < len(state.blocks):
        d = min(d, 0.25 * (state.y[b_idx + 1] - state.y[b_idx]))
    # never open a gap the contact detector would immediately re-close
    return d if d > floor else 0.0


def _best_split(state: _ClusterState, amplitudes, delta, floor):
    """Most eager contiguous break-up over all clusters: (gain, block, cut).

    gain is the virtual speed difference v(right part) - v(left part) when
    the block is pulled apart by delta; positive gain means the parts
    separate. Ties keep the leftmost candidate.
    """
    best_gain, best_where = 0.0, None
    for b_idx, block in enumerate(state.blocks):
        if len(block) < 2:
            continue
        d = _virtual_gap(state, b_idx, delta, floor)
        if d <= 0.0:
            continue
        for cut in range(1, len(block)):
            vy = np.concatenate(
                (
                    state.y[:b_idx],
                    [state.y[b_idx] - 0.5 * d, state.y[b_idx] + 0.5 * d],
                    state.y[b_idx + 1 :],
                )
            )
            vp = np.concatenate(
                (
                    state.mass[:b_idx],
                    [
                        float(np.sum(amplitudes[block[:cut]])),
                        float(np.sum(amplitudes[block[cut:]])),
                    ],
                    state.mass[b_idx + 1 :],
                )
            )
            v = ordered_rhs(vy, vp)
            gain = v[b_idx + 1] - v[b_idx]
            if gain > best_gain:
                best_gain, best_where = gain, (b_idx, cut)
    return best_gain, best_where


def _apply_split(state: _ClusterState, amplitudes, b_idx, cut, delta, floor):
    block = state.blocks[b_idx]
    d = _virtual_gap(state, b_idx, delta, floor)
    left_block, right_block = block[:cut], block[cut:]
    y0 = state.y[b_idx]
    state.blocks[b_idx : b_idx + 1] = [left_block, right_block]
    state.y = np.concatenate(
        (state.y[:b_idx], [y0 - 0.5 * d, y0 + 0.5 * d], state.y[b_idx + 1 :])
    )
    state.mass = np.concatenate(
        (
            state.mass[:b_idx],
            [float(np.sum(amplitudes[left_block])), float(np.sum(amplitudes[right_block]))],
            state.mass[b_idx + 1 :],
        )
    )


def _apply_merges(state: _ClusterState, collide_tol):
    """Amalgamate every adjacent cluster pair with gap <= collide_tol.

    Returns the list of merged blocks (members of each new cluster)."""
    merged_blocks = []
    while True:
        gaps = np.diff(state.y)
        hits = np.where(gaps <= collide_tol)[0]
        if hits.size == 0:
            return merged_blocks
        i = int(hits[0])
        ma, mb = state.mass[i], state.mass[i + 1]
        if ma + mb != 0.0:
            y_new = (ma * state.y[i] + mb * state.y[i + 1]) / (ma + mb)
        else:
            y_new = 0.5 * (state.y[i] + state.y[i + 1])
        new_block = state.blocks[i] + state.blocks[i + 1]
        state.blocks[i : i + 2] = [new_block]
        state.y = np.concatenate((state.y[:i], [y_new], state.y[i + 2 :]))
        state.mass = np.concatenate((state.mass[:i], [ma + mb], state.mass[i + 2 :]))
        merged_blocks.append(new_block)


def _integrate_limit(ensemble: PeakonEnsemble, mode, t_end, dt, store_every,
                     collide_tol, split_probe_gap):
    if mode not in ("sticky", "dispersive_limit"):
        raise ValueError(f"unknown mode {mode!r}")
    if dt is None:
        dt = DEFAULT_DT
    if dt <= 0.0 or t_end < 0.0:
        raise ValueError("need dt > 0 and t_end >= 0")
    p_full = ensemble.amplitudes
    n = ensemble.n
    speed_cap = 0.5 * ensemble.total_abs_mass**2 + 1e-9
    probe_floor = 4.0 * collide_tol

    state = _initial_clusters(ensemble.positions, p_full)
    events: list[TrajectoryEvent] = []
    times = [0.0]
    rows = [state.expand(n)]

    def rhs(_t, y):
        return ordered_rhs(y, state.mass, validate=False)

    def record(t, force=False):
        row = state.expand(n)
        if times and times[-1] == t and np.array_equal(rows[-1], row) and not force:
            return
        times.append(t)
        rows.append(row)

    def check_speeds(t, y):
        v = ordered_rhs(y, state.mass)
        if not np.all(np.isfinite(v)) or np.max(np.abs(v)) > speed_cap:
            raise NumericalAbort("speed bound exceeded", t,
                                 {"max_speed": float(np.max(np.abs(v)))})

    def release_loop(t):
        """Fire every immediately-available break-up (dispersive mode)."""
        while True:
            gain, where = _best_split(state, p_full, split_probe_gap, probe_floor)
            if where is None or gain <= 0.0:
                return
            b_idx, cut = where
            members = tuple(sorted(i + 1 for i in state.blocks[b_idx]))
            _apply_split(state, p_full, b_idx, cut, split_probe_gap, probe_floor)
            events.append(TrajectoryEvent(time=t, kind="split", indices=members))
            record(t, force=True)

    if mode == "dispersive_limit":
        release_loop(0.0)

    t = 0.0
    k = 0
    n_steps = int(np.ceil(t_end / dt - 1e-12))
    while k < n_steps:
        t_next = min((k + 1) * dt, t_end)
        h = t_next - t
        if h <= 0.0:
            k += 1
            continue
        y0 = state.y.copy()
        y1 = rk4_step(rhs, t, y0, h)

        def min_gap(y):
            return np.min(np.diff(y)) if y.size > 1 else math.inf

        hit_merge = state.y.size > 1 and min_gap(y1) <= collide_tol

        hit_split = False
        if mode == "dispersive_limit":
            saved = state.y
            state.y = y1
            gain, _ = _best_split(state, p_full, split_probe_gap, probe_floor)
            state.y = saved
            hit_split = gain > 0.0

        if not hit_merge and not hit_split:
            state.y = y1
            t = t_next
            k += 1
            check_speeds(t, state.y)
            if k % store_every == 0 or k == n_steps:
                record(t)
            continue

        # localize the earlier of the two crossings by bisection over the step
        def state_at(theta):
            if theta <= 0.0:
                return y0.copy()
            return rk4_step(rhs, t, y0, theta * h)

        def theta_for(predicate):
            lo, hi = 0.0, 1.0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if predicate(state_at(mid)):
                    hi = mid
                else:
                    lo = mid
                if hi - lo <= 1e-14:
                    break
            return hi

        theta_merge = math.inf
        if hit_merge:
            theta_merge = theta_for(lambda y: min_gap(y) <= collide_tol)
        theta_split = math.inf
        if hit_split:
            def split_pred(y):
                saved = state.y
                state.y = y
                gain, _ = _best_split(state, p_full, split_probe_gap, probe_floor)
                state.y = saved
                return gain > 0.0

            theta_split = theta_for(split_pred)

        theta = min(theta_merge, theta_split)
        t_event = t + theta * h
        state.y = state_at(theta)
        t = t_event
        if theta_merge <= theta_split:
            for new_block in _apply_merges(state, collide_tol):
                events.append(
                    TrajectoryEvent(
                        time=t_event,
                        kind="merge",
                        indices=tuple(sorted(i + 1 for i in new_block)),
                    )
                )
            record(t_event, force=True)
            if mode == "dispersive_limit":
                release_loop(t_event)
        else:
            release_loop(t_event)
        # k unchanged: the remainder of the grid step runs next iteration

    meta = {
        "mode": mode,
        "dt": dt,
        "t_end": t_end,
        "store_every": store_every,
        "collide_tol": collide_tol,
        "amplitudes": [float(v) for v in p_full],
        "final_blocks": [sorted(i + 1 for i in b) for b in state.blocks],
    }
    if mode == "dispersive_limit":
        meta["split_probe_gap"] = split_probe_gap
    return Trajectory(
        times=np.asarray(times), positions=np.asarray(rows), events=events, meta=meta
    )


def sticky_integrate(ensemble: PeakonEnsemble, t_end, dt=None, store_every=1,
                     collide_tol=1e-10) -> Trajectory:
    """Zero-width dynamics where touching particles amalgamate for good."""
    return _integrate_limit(ensemble, "sticky", t_end, dt, store_every,
                            collide_tol, split_probe_gap=1e-8)


def dispersive_integrate(ensemble: PeakonEnsemble, t_end, dt=None, store_every=1,
                         collide_tol=1e-10, split_probe_gap=1e-8) -> Trajectory:
    """Zero-width dynamics with cluster release, the vanishing-width limit."""
    return _integrate_limit(ensemble, "dispersive_limit", t_end, dt, store_every,
                            collide_tol, split_probe_gap)


# --------------------------------------------------------------------------
# explicit two-particle continuations (for residual experiments)
# --------------------------------------------------------------------------


def two_peakon_crossing_trajectory(amplitudes, positions, t_end, dt=DEFAULT_DT,
                                   store_every=1) -> Trajectory:
    """Two labeled particles that pass through each other at contact.

    Each particle's speed depends on the unsigned separation only,
    v_i = p_i^2/6 + (1/2) p_1 p_2 e^{-|x_1-x_2|}, which is the ordered law
    before contact and its relabeled continuation after — the order swap and
    the label swap cancel.
    """
    p = np.asarray(amplitudes, dtype=float)
    if p.size != 2:
        raise ValueError("exactly two particles")

    def rhs(_t, x):
        cross = 0.5 * p[0] * p[1] * np.exp(-abs(x[0] - x[1]))
        return np.array([p[0] ** 2 / 6.0 + cross, p[1] ** 2 / 6.0 + cross])

    times, states = integrate_fixed_grid(rhs, np.asarray(positions, dtype=float),
                                         t_end, dt, store_every)
    return Trajectory(times=times, positions=states,
                      meta={"mode": "crossing", "dt": dt,
                            "amplitudes": [float(v) for v in p]})


def two_peakon_unreordered_trajectory(amplitudes, positions, t_end, dt=DEFAULT_DT,
                                      store_every=1) -> Trajectory:
    """Two labeled particles continued with the frozen-order formula.

    The speed law keeps the exponent e^{x_1-x_2} of the initial ordering even
    after the particles cross, so past contact it is NOT a solution of the
    underlying conservation law; residual tests use it as the negative
    control.
    """
    p = np.asarray(amplitudes, dtype=float)
    if p.size != 2:
        raise ValueError("exactly two particles")

    def rhs(_t, x):
        cross = 0.5 * p[0] * p[1] * np.exp(x[0] - x[1])
        return np.array([p[0] ** 2 / 6.0 + cross, p[1] ** 2 / 6.0 + cross])

    times, states = integrate_fixed_grid(rhs, np.asarray(positions, dtype=float),
                                         t_end, dt, store_every)
    return Trajectory(times=times, positions=states,
                      meta={"mode": "unreordered", "dt": dt,
                            "amplitudes": [float(v) for v in p]})
