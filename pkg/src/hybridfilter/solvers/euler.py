"""Modal RKDG solver for the 1D Euler equations with TVB detection and moment limiting."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..dg import (DGField, GridData, Mesh, basis_deriv_table, basis_table, build_mesh,
                  gauss_legendre, mode_scale, project)
from .limiter import limit_triples, moment_limit_coeffs, tvb_flags, with_ghosts
from .riemann import GAMMA, RiemannState
from .timestep import SolverError, cfl_number, ssp_rk3_step

DOMAIN = (-5.0, 5.0)

# (rho, u, p) left and right of the initial jump
SOD = (RiemannState(1.0, 0.0, 1.0), RiemannState(0.125, 0.0, 0.1))
LAX = (RiemannState(0.445, 0.698, 3.528), RiemannState(0.5, 0.0, 0.571))
SHU_OSHER_LEFT = RiemannState(3.857143, 2.629369, 10.33333)
SHU_OSHER_JUMP = -4.0

BENCHMARK_TIMES = {"sod": 2.0, "lax": 1.3, "shu_osher": 1.8}
DEFAULT_TVB_M = {"sod": 50.0, "lax": 50.0, "shu_osher": 300.0}


def initial_primitive(ic_id: str, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    if ic_id in ("sod", "lax"):
        left, right = SOD if ic_id == "sod" else LAX
        lhs = x < 0.0
        return (np.where(lhs, left.rho, right.rho), np.where(lhs, left.u, right.u),
                np.where(lhs, left.p, right.p))
    if ic_id == "shu_osher":
        lhs = x < SHU_OSHER_JUMP
        s = SHU_OSHER_LEFT
        return (np.where(lhs, s.rho, 1.0 + 0.2 * np.sin(5.0 * x)), np.where(lhs, s.u, 0.0),
                np.where(lhs, s.p, 1.0))
    raise ValueError(f"unknown initial condition {ic_id!r}")


def to_conservative(rho, u, p, gamma=GAMMA):
    return rho, rho * u, p / (gamma - 1.0) + 0.5 * rho * u * u


def to_primitive(rho, mom, energy, gamma=GAMMA):
    u = mom / rho
    return rho, u, (gamma - 1.0) * (energy - 0.5 * mom * u)


def euler_flux(U: np.ndarray, gamma=GAMMA) -> np.ndarray:
    rho, mom, E = U
    u = mom / rho
    p = (gamma - 1.0) * (E - 0.5 * mom * u)
    return np.stack([mom, mom * u + p, (E + p) * u])


def max_wave_speed(U: np.ndarray, gamma=GAMMA) -> np.ndarray:
    rho, mom, E = U
    u = mom / rho
    p = (gamma - 1.0) * (E - 0.5 * mom * u)
    return np.abs(u) + np.sqrt(np.maximum(gamma * p / rho, 0.0))


@dataclass(frozen=True)
class EulerFields:
    rho: DGField
    mom: DGField
    energy: DGField
    gamma: float = GAMMA
    # conservative ghost states (left, right) used as Dirichlet data
    ghosts: tuple = field(default=None, compare=False)

    @property
    def mesh(self) -> Mesh:
        return self.rho.mesh

    @property
    def degree(self) -> int:
        return self.rho.degree

    def as_list(self) -> list[DGField]:
        return [self.rho, self.mom, self.energy]

    def stacked(self) -> np.ndarray:
        return np.stack([self.rho.coeffs, self.mom.coeffs, self.energy.coeffs])

    def with_stacked(self, U: np.ndarray) -> "EulerFields":
        m = self.mesh
        return EulerFields(DGField(m, U[0]), DGField(m, U[1]), DGField(m, U[2]),
                           self.gamma, self.ghosts)

    def primitive_at(self, x):
        vals = [f.evaluate(x) for f in self.as_list()]
        return to_primitive(*vals, self.gamma)


def project_initial(ic_id: str, mesh: Mesh, p: int, gamma=GAMMA) -> EulerFields:
    quad = gauss_legendre(16)
    cons = [project(lambda x, k=k: to_conservative(*initial_primitive(ic_id, x), gamma)[k],
                    mesh, p, quad) for k in range(3)]
    lo = np.array(to_conservative(*initial_primitive(ic_id, mesh.domain_lo), gamma), dtype=float)
    hi = np.array(to_conservative(*initial_primitive(ic_id, mesh.domain_hi), gamma), dtype=float)
    return EulerFields(*cons, gamma=gamma, ghosts=(lo, hi))


class EulerOperator:
    """DG residual with local Lax-Friedrichs fluxes and constant Dirichlet ghost states."""

    def __init__(self, mesh: Mesh, p: int, ghosts, gamma=GAMMA):
        self.mesh, self.p, self.gamma = mesh, p, gamma
        self.quad = gauss_legendre(p + 2)
        self.phi = basis_table(p, self.quad.nodes)
        self.dphi_w = basis_deriv_table(p, self.quad.nodes) * self.quad.weights
        self.phi_r = basis_table(p, 1.0)
        self.phi_l = basis_table(p, -1.0)
        self.ghost_l = np.asarray(ghosts[0], dtype=float)
        self.ghost_r = np.asarray(ghosts[1], dtype=float)

    def traces(self, U):
        return U @ self.phi_l, U @ self.phi_r  # each (3, N)

    def __call__(self, U: np.ndarray) -> np.ndarray:
        g = self.gamma
        Uq = U @ self.phi  # (3, N, nq)
        vol = euler_flux(Uq, g) @ self.dphi_w.T  # (3, N, p+1)
        ul, ur = self.traces(U)
        # face k sits between element k-1 and k, k = 0..N
        left = np.concatenate([self.ghost_l[:, None], ur], axis=1)
        right = np.concatenate([ul, self.ghost_r[:, None]], axis=1)
        alpha = np.maximum(max_wave_speed(left, g), max_wave_speed(right, g))
        flux = 0.5 * (euler_flux(left, g) + euler_flux(right, g)) - 0.5 * alpha * (right - left)
        rhs = vol - flux[:, 1:, None] * self.phi_r + flux[:, :-1, None] * self.phi_l
        return rhs / self.mesh.h

    def check_points(self, U: np.ndarray) -> np.ndarray:
        """Conservative states at quadrature nodes and both faces, ``(3, N, nq + 2)``."""
        return np.concatenate([U @ self.phi, U @ self.phi_l[:, None], U @ self.phi_r[:, None]],
                              axis=2)

    def positivity_violation(self, U: np.ndarray) -> int | None:
        """Index of the first element with non-positive density or pressure, if any."""
        rho, _, p = to_primitive(*self.check_points(U), self.gamma)
        bad = ~((rho > 0) & (p > 0) & np.isfinite(p))
        if bad.any():
            return int(np.flatnonzero(bad.any(axis=1))[0])
        return None


def eigenvectors(U: np.ndarray, gamma=GAMMA) -> tuple[np.ndarray, np.ndarray]:
    """Right eigenvectors of the flux Jacobian at conservative states ``U`` (3, K) and
    their inverses, both shaped ``(K, 3, 3)``."""
    rho, u, p = to_primitive(*U, gamma)
    c = np.sqrt(gamma * p / rho)
    H = (U[2] + p) / rho
    one = np.ones_like(u)
    R = np.stack([np.stack([one, one, one], -1),
                  np.stack([u - c, u, u + c], -1),
                  np.stack([H - u * c, 0.5 * u * u, H + u * c], -1)], axis=1)
    return R, np.linalg.inv(R)


def characteristic_limit(U: np.ndarray, flagged, boundary, gamma=GAMMA) -> np.ndarray:
    """Moment limiting of the flagged elements in the characteristic fields of each
    element's mean state; neighbours are projected with the same eigenvectors."""
    flagged = np.asarray(flagged, dtype=int).reshape(-1)
    p = U.shape[-1] - 1
    out = U.copy()
    if p == 0 or flagged.size == 0:
        return out
    s = mode_scale(p)
    plain = with_ghosts(U, boundary) / s  # (3, N+2, p+1)
    rows = flagged + 1
    R, L = eigenvectors(plain[:, rows, 0], gamma)
    tri = [np.einsum("kab,bkm->akm", L, plain[:, r, :]) for r in (rows - 1, rows, rows + 1)]
    W = limit_triples(*tri)
    out[:, flagged, :] = np.einsum("kab,bkm->akm", R, W) * s
    return out


def positivity_scale(op: EulerOperator, U: np.ndarray, eps: float = 1e-10) -> np.ndarray:
    """Shrink the high modes of elements with non-positive point density or pressure
    towards the element mean (means are untouched).  Elements whose mean itself is
    inadmissible are left alone for the positivity check to report."""
    g = op.gamma
    pts = op.check_points(U)
    rho, _, p = to_primitive(*pts, g)
    bad = np.flatnonzero(~((rho > eps) & (p > eps)).all(axis=1))
    if bad.size == 0:
        return U
    mean = U[:, bad, :1]
    rbar, _, pbar = to_primitive(*mean[..., 0], g)
    ok = (rbar > 2 * eps) & (pbar > 2 * eps)
    bad, mean, rbar = bad[ok], mean[:, ok], rbar[ok]
    if bad.size == 0:
        return U
    U = U.copy()
    # density first: linear in theta
    rmin = rho[bad].min(axis=1)
    th = np.where(rmin < eps, (rbar - eps) / (rbar - rmin), 1.0)
    U[0, bad, 1:] *= th[:, None]
    # then pressure, by bisection on the largest admissible fraction per element
    dev = op.check_points(U)[:, bad] - mean
    lo, hi = np.zeros(bad.size), np.ones(bad.size)
    _, _, ph = to_primitive(*(mean + dev), g)
    done = (ph > eps).all(axis=1)
    lo[done] = 1.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        _, _, pm = to_primitive(*(mean + mid[:, None] * dev), g)
        good = (pm > eps).all(axis=1)
        lo = np.where(good | done, np.where(done, 1.0, mid), lo)
        hi = np.where(good | done, hi, mid)
    U[:, bad, 1:] *= lo[None, :, None]
    return U


def _limiter(op: EulerOperator, M: float | None, variables: str = "characteristic",
             positivity: bool = True):
    bounds = (op.ghost_l, op.ghost_r)
    h = op.mesh.h
    if variables not in ("characteristic", "conservative"):
        raise ValueError(f"unknown limiting variables {variables!r}")

    def limit(U):
        if M is not None:
            idx = np.flatnonzero(tvb_flags(U, M, h, bounds))
            if idx.size:
                if variables == "characteristic":
                    U = characteristic_limit(U, idx, bounds, op.gamma)
                else:
                    U = moment_limit_coeffs(U, idx, bounds)
        if positivity:
            U = positivity_scale(op, U)
        bad = op.positivity_violation(U)
        if bad is not None:
            raise SolverError(f"positivity lost in element {bad}")
        return U

    return limit


def evolve(fields: EulerFields, t_final: float, tvb_M: float | None = 50.0,
           cfl: float | None = None, callback: Callable | None = None,
           limit_variables: str = "characteristic") -> EulerFields:
    """Advance ``fields`` by ``t_final`` with adaptive SSP-RK3 steps."""
    p = fields.degree
    op = EulerOperator(fields.mesh, p, fields.ghosts, fields.gamma)
    cfl = cfl_number(p) if cfl is None else cfl
    if cfl > 1.0 / (2 * p + 1):
        raise SolverError(f"CFL number {cfl} exceeds the RKDG bound 1/(2p+1)")
    limit = _limiter(op, tvb_M, limit_variables)
    U = fields.stacked()
    t = 0.0
    while t < t_final * (1 - 1e-14):
        lam = float(np.max(max_wave_speed(U @ op.phi, fields.gamma)))
        if not np.isfinite(lam):
            raise SolverError(f"non-finite state at t={t}")
        dt = min(cfl * fields.mesh.h / lam, t_final - t)
        U = ssp_rk3_step(U, op, dt, limit)
        t += dt
        if callback is not None:
            callback(t, U)
    return fields.with_stacked(U)


def euler_solve(ic_id: str, p: int, n_elements: int, t_final: float | None = None,
                tvb_M: float | None = None, cfl: float | None = None,
                domain=DOMAIN, limit_variables: str = "characteristic") -> EulerFields:
    """Conservative DG fields at ``t_final`` for the ``sod``, ``lax`` or ``shu_osher`` tube."""
    if ic_id not in BENCHMARK_TIMES:
        raise ValueError(f"unknown initial condition {ic_id!r}")
    t_final = BENCHMARK_TIMES[ic_id] if t_final is None else t_final
    tvb_M = DEFAULT_TVB_M[ic_id] if tvb_M is None else tvb_M
    mesh = build_mesh(domain[0], domain[1], n_elements)
    fields = project_initial(ic_id, mesh, p)
    return evolve(fields, t_final, tvb_M, cfl, limit_variables=limit_variables)


def riemann_states(ic_id: str) -> tuple[RiemannState, RiemannState]:
    if ic_id == "sod":
        return SOD
    if ic_id == "lax":
        return LAX
    raise ValueError(f"{ic_id!r} is not a Riemann problem")


def reference_shu_osher(n_ref: int = 8000, p_ref: int = 0, t_final: float = 1.8,
                        cfl: float | None = None) -> dict[str, GridData]:
    """Fine-grid reference run; primitive cell values on a one-point (midpoint) grid."""
    return reference_shu_osher_series([t_final], n_ref, p_ref, cfl)[t_final]


def reference_shu_osher_series(times, n_ref: int = 8000, p_ref: int = 0,
                               cfl: float | None = None) -> dict[float, dict[str, GridData]]:
    """One fine run stopped at each requested time (any order, duplicates allowed)."""
    mesh = build_mesh(DOMAIN[0], DOMAIN[1], n_ref)
    fields = project_initial("shu_osher", mesh, p_ref)
    quad = gauss_legendre(1)
    out, t = {}, 0.0
    for target in sorted(set(float(x) for x in times)):
        if target < 0:
            raise ValueError("reference times must be non-negative")
        if target > t:
            fields = evolve(fields, target - t, DEFAULT_TVB_M["shu_osher"], cfl)
            t = target
        cons = [f.at_reference(quad.nodes)[:, 0] for f in fields.as_list()]
        rho, u, pr = to_primitive(*cons, fields.gamma)
        out[target] = {name: GridData(mesh, quad, v) for name, v in
                       (("rho", rho), ("u", u), ("p", pr))}
    return out


def sample_cellwise(ref: GridData, x) -> np.ndarray:
    """Piecewise-constant lookup of a one-point reference grid at ``x``."""
    return ref.values[ref.mesh.element_of(x)]

