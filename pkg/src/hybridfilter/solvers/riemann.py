"""Exact Riemann solver for the 1D Euler equations of an ideal gas (Toro, ch. 4)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GAMMA = 1.4


class VacuumError(ValueError):
    pass


@dataclass(frozen=True)
class RiemannState:
    rho: float
    u: float
    p: float

    def __post_init__(self):
        if not (self.rho > 0 and self.p > 0):
            raise ValueError(f"inadmissible state {self}")

    def sound_speed(self, gamma: float = GAMMA) -> float:
        return float(np.sqrt(gamma * self.p / self.rho))

    def conservative(self, gamma: float = GAMMA) -> np.ndarray:
        return np.array([self.rho, self.rho * self.u,
                         self.p / (gamma - 1.0) + 0.5 * self.rho * self.u ** 2])


def pressure_function(p, state: RiemannState, gamma: float = GAMMA):
    """Velocity change across the wave linking ``state`` to pressure ``p`` and its derivative."""
    p = np.asarray(p, dtype=float)
    rho, pk = state.rho, state.p
    a = state.sound_speed(gamma)
    A = 2.0 / ((gamma + 1.0) * rho)
    B = (gamma - 1.0) / (gamma + 1.0) * pk
    shock = p > pk
    ps = np.where(shock, p, pk)  # guard the sqrt branch
    pr = np.where(shock, pk, np.maximum(p, 1e-300))
    f_shock = (ps - pk) * np.sqrt(A / (ps + B))
    df_shock = np.sqrt(A / (ps + B)) * (1.0 - 0.5 * (ps - pk) / (ps + B))
    expo = (gamma - 1.0) / (2.0 * gamma)
    f_rare = 2.0 * a / (gamma - 1.0) * ((pr / pk) ** expo - 1.0)
    df_rare = 1.0 / (rho * a) * (pr / pk) ** (-(gamma + 1.0) / (2.0 * gamma))
    return np.where(shock, f_shock, f_rare), np.where(shock, df_shock, df_rare)


def star_state(left: RiemannState, right: RiemannState, gamma: float = GAMMA,
               tol: float = 1e-12, max_iter: int = 100) -> tuple[float, float]:
    """Star-region pressure and velocity by Newton iteration on the pressure function."""
    aL, aR = left.sound_speed(gamma), right.sound_speed(gamma)
    if 2.0 * (aL + aR) / (gamma - 1.0) <= right.u - left.u:
        raise VacuumError("initial data generates a vacuum")
    du = right.u - left.u
    # two-rarefaction guess, floored to keep the iterate positive
    expo = (gamma - 1.0) / (2.0 * gamma)
    p = ((aL + aR - 0.5 * (gamma - 1.0) * du)
         / (aL / left.p ** expo + aR / right.p ** expo)) ** (1.0 / expo)
    p = max(p, 1e-8)
    for _ in range(max_iter):
        fL, dfL = pressure_function(p, left, gamma)
        fR, dfR = pressure_function(p, right, gamma)
        g = float(fL + fR + du)
        p_new = p - g / float(dfL + dfR)
        if p_new <= 0:
            p_new = 0.5 * p
        if abs(p_new - p) <= tol * 0.5 * (p_new + p):
            p = p_new
            break
        p = p_new
    fL, _ = pressure_function(p, left, gamma)
    fR, _ = pressure_function(p, right, gamma)
    u = 0.5 * (left.u + right.u) + 0.5 * float(fR - fL)
    return p, u


def _sample(left, right, p_star, u_star, xi, gamma):
    g = gamma
    gm, gp = g - 1.0, g + 1.0
    xi = np.asarray(xi, dtype=float)
    rho = np.empty_like(xi)
    u = np.empty_like(xi)
    p = np.empty_like(xi)

    for side, sign in ((left, -1.0), (right, 1.0)):
        on_side = (xi < u_star) if sign < 0 else (xi >= u_star)
        if not on_side.any():
            continue
        xs = xi[on_side]
        a = side.sound_speed(g)
        r_, u_, p_ = np.empty_like(xs), np.empty_like(xs), np.empty_like(xs)
        ratio = p_star / side.p
        if p_star > side.p:
            rho_star = side.rho * (ratio + gm / gp) / (gm / gp * ratio + 1.0)
            shock_speed = side.u + sign * a * np.sqrt(gp / (2 * g) * ratio + gm / (2 * g))
            outside = (xs < shock_speed) if sign < 0 else (xs > shock_speed)
            r_[:], u_[:], p_[:] = rho_star, u_star, p_star
            r_[outside], u_[outside], p_[outside] = side.rho, side.u, side.p
        else:
            rho_star = side.rho * ratio ** (1.0 / g)
            a_star = a * ratio ** (gm / (2 * g))
            head = side.u + sign * a
            tail = u_star + sign * a_star
            if sign < 0:
                outside, inside_fan = xs <= head, (xs > head) & (xs < tail)
            else:
                outside, inside_fan = xs >= head, (xs < head) & (xs > tail)
            r_[:], u_[:], p_[:] = rho_star, u_star, p_star
            r_[outside], u_[outside], p_[outside] = side.rho, side.u, side.p
            xf = xs[inside_fan]
            c = 2.0 / gp - sign * gm / (gp * a) * (side.u - xf)
            r_[inside_fan] = side.rho * c ** (2.0 / gm)
            u_[inside_fan] = 2.0 / gp * (-sign * a + 0.5 * gm * side.u + xf)
            p_[inside_fan] = side.p * c ** (2.0 * g / gm)
        rho[on_side], u[on_side], p[on_side] = r_, u_, p_
    return rho, u, p


def exact_riemann(left: RiemannState, right: RiemannState, x_over_t, gamma: float = GAMMA):
    """Primitive similarity solution sampled at ``x/t``.

    A scalar ``x_over_t`` returns a :class:`RiemannState`; an array returns
    ``(rho, u, p)`` arrays.
    """
    p_star, u_star = star_state(left, right, gamma)
    xi = np.asarray(x_over_t, dtype=float)
    rho, u, p = _sample(left, right, p_star, u_star, np.atleast_1d(xi), gamma)
    if xi.ndim == 0:
        return RiemannState(float(rho[0]), float(u[0]), float(p[0]))
    return rho.reshape(xi.shape), u.reshape(xi.shape), p.reshape(xi.shape)


def wave_speeds(left: RiemannState, right: RiemannState, gamma: float = GAMMA) -> dict:
    """Speeds of the left wave (head/tail), the contact and the right wave."""
    p_star, u_star = star_state(left, right, gamma)
    out = {"contact": u_star, "p_star": p_star}
    for name, side, sign in (("left", left, -1.0), ("right", right, 1.0)):
        a = side.sound_speed(gamma)
        ratio = p_star / side.p
        if p_star > side.p:
            s = side.u + sign * a * np.sqrt((gamma + 1) / (2 * gamma) * ratio
                                            + (gamma - 1) / (2 * gamma))
            out[name] = ("shock", s, s)
        else:
            a_star = a * ratio ** ((gamma - 1) / (2 * gamma))
            out[name] = ("rarefaction", side.u + sign * a, u_star + sign * a_star)
    return out
