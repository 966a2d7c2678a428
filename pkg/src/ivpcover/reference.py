"""Non-validated high-accuracy reference trajectories (scipy DOP853).

Used as an independent oracle: a reference endpoint should land inside any
claimed rigorous enclosure.  Nothing here carries guarantees; tolerances are
set tight enough (1e-12) that the reference error is negligible against the
box widths being checked.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .expr import OdeSystem


def reference_endpoint(
    system: OdeSystem,
    x0: Sequence[float],
    t_end: float,
    rtol: float = 1e-12,
    atol: float = 1e-12,
) -> tuple[float, ...]:
    """Solution of x' = f(x) from x0 at time t_end, non-validated."""
    if t_end == 0.0:
        return tuple(float(v) for v in x0)

    def rhs(_t: float, x: np.ndarray):
        return system.f_point(x)

    sol = solve_ivp(
        rhs,
        (0.0, t_end),
        np.asarray(x0, dtype=float),
        method="DOP853",
        rtol=rtol,
        atol=atol,
        dense_output=False,
    )
    if not sol.success:
        raise RuntimeError(f"reference integration failed: {sol.message}")
    return tuple(float(v) for v in sol.y[:, -1])


def reference_trajectory(
    system: OdeSystem,
    x0: Sequence[float],
    times: Sequence[float],
    rtol: float = 1e-12,
    atol: float = 1e-12,
) -> np.ndarray:
    """Solution sampled at the given times; shape (len(times), dim)."""
    times = np.asarray(times, dtype=float)

    def rhs(_t: float, x: np.ndarray):
        return system.f_point(x)

    sol = solve_ivp(
        rhs,
        (float(times[0]), float(times[-1])),
        np.asarray(x0, dtype=float),
        method="DOP853",
        rtol=rtol,
        atol=atol,
        t_eval=times,
    )
    if not sol.success:
        raise RuntimeError(f"reference integration failed: {sol.message}")
    return sol.y.T
