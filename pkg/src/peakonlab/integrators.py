"""Fixed-grid fourth-order Runge-Kutta driver shared by the dynamics modules.

All integrations in this package run on the deterministic uniform grid
t_k = k*dt (with one shorter final step when t_end is not a multiple), so
repeated runs store bit-identical states. Event-driven dynamics reuse
``rk4_step`` directly inside their own loop.
"""

from __future__ import annotations

import numpy as np

__all__ = ["NumericalAbort", "rk4_step", "cash_karp_step", "integrate_fixed_grid"]


class NumericalAbort(RuntimeError):
    """Raised when a per-step health check fails (blow-up, ordering loss, ...)."""

    def __init__(self, reason: str, time: float, details: dict | None = None):
        super().__init__(f"{reason} at t={time:.6g}")
        self.reason = reason
        self.time = time
        self.details = details or {}


def rk4_step(rhs, t, y, h):
    """One classical Runge-Kutta step of size h for y' = rhs(t, y)."""
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + (0.5 * h) * k1)
    k3 = rhs(t + 0.5 * h, y + (0.5 * h) * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def cash_karp_step(rhs, t, y, h):
    """One embedded Cash-Karp step: returns (5th-order y, error estimate).

    The error estimate is the componentwise difference between the embedded
    5th- and 4th-order solutions, for use by an adaptive step controller.
    """
    k1 = rhs(t, y)
    k2 = rhs(t + h / 5.0, y + h * (k1 / 5.0))
    k3 = rhs(t + 0.3 * h, y + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2))
    k4 = rhs(t + 0.6 * h, y + h * (0.3 * k1 - 0.9 * k2 + 1.2 * k3))
    k5 = rhs(t + h, y + h * (-11.0 / 54.0 * k1 + 2.5 * k2
                             - 70.0 / 27.0 * k3 + 35.0 / 27.0 * k4))
    k6 = rhs(t + 0.875 * h, y + h * (1631.0 / 55296.0 * k1 + 175.0 / 512.0 * k2
                                     + 575.0 / 13824.0 * k3
                                     + 44275.0 / 110592.0 * k4
                                     + 253.0 / 4096.0 * k5))
    y5 = y + h * (37.0 / 378.0 * k1 + 250.0 / 621.0 * k3
                  + 125.0 / 594.0 * k4 + 512.0 / 1771.0 * k6)
    y4 = y + h * (2825.0 / 27648.0 * k1 + 18575.0 / 48384.0 * k3
                  + 13525.0 / 55296.0 * k4 + 277.0 / 14336.0 * k5 + k6 / 4.0)
    return y5, y5 - y4


def integrate_fixed_grid(rhs, y0, t_end, dt, store_every=1, check=None):
    """Integrate to t_end on the uniform grid, storing every k-th state.

    check(t, y), when given, runs after every accepted step and may raise
    NumericalAbort. Returns (times, states) with the initial and final rows
    always included.
    """
    if dt <= 0.0 or t_end < 0.0:
        raise ValueError("need dt > 0 and t_end >= 0")
    y = np.asarray(y0, dtype=float).copy()
    times = [0.0]
    states = [y.copy()]
    n_steps = int(np.ceil(t_end / dt - 1e-12))
    t = 0.0
    for k in range(n_steps):
        t_next = min((k + 1) * dt, t_end)
        y = rk4_step(rhs, t, y, t_next - t)
        t = t_next
        if check is not None:
            check(t, y)
        if (k + 1) % store_every == 0 or (k + 1) == n_steps:
            times.append(t)
            states.append(y.copy())
    return np.asarray(times), np.asarray(states)
