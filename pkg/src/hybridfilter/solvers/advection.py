"""Periodic RKDG solver for linear advection ``u_t + a u_x = 0`` with top-hat data."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..dg import DGField, Mesh, basis_deriv_table, basis_table, build_mesh, gauss_legendre, project
from .limiter import moment_limit_coeffs, tvb_flags
from .timestep import SolverError, cfl_number, ssp_rk3_step, time_grid

TOPHAT_HALF_WIDTH = 2.5


@dataclass(frozen=True)
class AdvectionProblem:
    wave_speed: float
    bias: float
    jump: float
    t_final: float
    domain: tuple[float, float] = (-5.0, 5.0)

    def __post_init__(self):
        if not self.wave_speed > 0:
            raise ValueError("wave speed must be positive")
        if self.t_final < 0:
            raise ValueError("final time must be non-negative")

    @property
    def length(self) -> float:
        return self.domain[1] - self.domain[0]

    def initial(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= TOPHAT_HALF_WIDTH, self.bias + self.jump, self.bias)

    def wrap(self, x) -> np.ndarray:
        lo = self.domain[0]
        return lo + np.mod(np.asarray(x, dtype=float) - lo, self.length)

    def exact(self, x, t: float | None = None) -> np.ndarray:
        t = self.t_final if t is None else t
        return self.initial(self.wrap(np.asarray(x, dtype=float) - self.wave_speed * t))

    def jump_locations(self, t: float | None = None) -> np.ndarray:
        """Positions of the two top-hat edges at time ``t``, wrapped into the domain."""
        t = self.t_final if t is None else t
        return self.wrap(np.array([-TOPHAT_HALF_WIDTH, TOPHAT_HALF_WIDTH]) + self.wave_speed * t)


class AdvectionOperator:
    """Semi-discrete DG residual for constant-speed advection on a periodic mesh."""

    def __init__(self, mesh: Mesh, p: int, speed: float):
        self.mesh, self.p, self.speed = mesh, p, speed
        quad = gauss_legendre(p + 1)
        phi = basis_table(p, quad.nodes)
        dphi = basis_deriv_table(p, quad.nodes)
        # volume[i, k] = int phi_i' phi_k
        self.volume = (dphi * quad.weights) @ phi.T
        self.phi_r = basis_table(p, 1.0)
        self.phi_l = basis_table(p, -1.0)

    def __call__(self, c: np.ndarray) -> np.ndarray:
        a = self.speed
        ur = c @ self.phi_r
        ul = c @ self.phi_l
        # upwind (= local Lax-Friedrichs for linear flux); flux[j] at face j+1/2
        left_state, right_state = ur, np.roll(ul, -1)
        flux = 0.5 * a * (left_state + right_state) - 0.5 * abs(a) * (right_state - left_state)
        flux_in = np.roll(flux, 1)
        vol = a * c @ self.volume.T
        return (vol - np.outer(flux, self.phi_r) + np.outer(flux_in, self.phi_l)) / self.mesh.h


def advect_run(u0: Callable, speed: float, mesh: Mesh, p: int, t_final: float,
               tvb_M: float | None = None, cfl: float | None = None) -> DGField:
    """Evolve the projection of ``u0`` to ``t_final``; limiting only when ``tvb_M`` is given."""
    if p < 0:
        raise ValueError("degree must be non-negative")
    field = project(u0, mesh, p, gauss_legendre(max(p + 2, 6)))
    op = AdvectionOperator(mesh, p, speed)
    cfl = cfl_number(p) if cfl is None else cfl
    if cfl > 1.0 / (2 * p + 1):
        raise SolverError(f"CFL number {cfl} exceeds the RKDG bound 1/(2p+1)")
    n_steps, dt = time_grid(t_final, cfl * mesh.h / abs(speed))
    limiter = None
    if tvb_M is not None:
        def limiter(c):
            return moment_limit_coeffs(c, np.flatnonzero(tvb_flags(c, tvb_M, mesh.h)))
    c = field.coeffs.copy()
    for step in range(n_steps):
        c = ssp_rk3_step(c, op, dt, limiter)
        if step % 200 == 0 and not np.all(np.isfinite(c)):
            raise SolverError(f"non-finite coefficients at step {step}")
    if not np.all(np.isfinite(c)):
        raise SolverError("non-finite coefficients at final time")
    return field.with_coeffs(c)


def advect_solve(problem: AdvectionProblem, p: int, n_elements: int,
                 tvb_M: float | None = None, cfl: float | None = None):
    """DG solution of a top-hat advection problem and the exact solution at ``t_final``."""
    mesh = build_mesh(problem.domain[0], problem.domain[1], n_elements)
    uh = advect_run(problem.initial, problem.wave_speed, mesh, p, problem.t_final, tvb_M, cfl)
    return uh, problem.exact
