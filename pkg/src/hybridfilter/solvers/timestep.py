"""Third-order SSP Runge-Kutta stepping with a post-stage limiter hook."""
from __future__ import annotations

from typing import Callable

import numpy as np


class SolverError(RuntimeError):
    """Raised when a run cannot continue (NaN, positivity loss, bad time step)."""


def ssp_rk3_step(u: np.ndarray, rhs: Callable[[np.ndarray], np.ndarray], dt: float,
                 limiter: Callable[[np.ndarray], np.ndarray] | None = None) -> np.ndarray:
    """One Shu-Osher SSP-RK3 step; ``limiter`` runs after every stage."""
    lim = limiter or (lambda v: v)
    u1 = lim(u + dt * rhs(u))
    u2 = lim(0.75 * u + 0.25 * (u1 + dt * rhs(u1)))
    return lim(u / 3.0 + (2.0 / 3.0) * (u2 + dt * rhs(u2)))


def cfl_number(p: int) -> float:
    return 0.1 / (2 * p + 1)


def time_grid(t_final: float, dt_max: float) -> tuple[int, float]:
    """Number of equal steps (and their size) reaching ``t_final`` with steps <= ``dt_max``."""
    if t_final < 0:
        raise SolverError(f"final time must be non-negative, got {t_final}")
    if not dt_max > 0 or not np.isfinite(dt_max):
        raise SolverError(f"invalid time step bound {dt_max}")
    if t_final == 0:
        return 0, 0.0
    n = int(np.ceil(t_final / dt_max - 1e-12))
    return n, t_final / n
