"""SIAC kernels built from central B-splines and their exact convolution with DG fields.

The kernel with ``r + 1`` B-splines of order ``k + 1`` is

    K(x) = sum_g c_g B_{k+1}(x - x_g),    x_g = -r/2 + g,

with coefficients chosen so that ``K * y^m = x^m`` for ``m = 0..r``.  ``r = k = 0`` is the
consistency-only moving average used near discontinuities.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .dg import DGField, GridData, QuadratureRule, basis_table, gauss_legendre, grid_points

MAX_CONDITION = 1e12


def bspline(order: int, x):
    """Central B-spline of the given order (degree ``order - 1``) by Cox-de Boor recursion.

    Knots are ``-order/2, ..., order/2``; intervals are half-open on the right.
    """
    if order < 1:
        raise ValueError("B-spline order must be at least 1")
    x = np.asarray(x, dtype=float)
    knots = -0.5 * order + np.arange(order + 1)
    xs = x[..., None]
    b = ((xs >= knots[:-1]) & (xs < knots[1:])).astype(float)  # order-1 pieces
    for d in range(2, order + 1):
        t_lo = knots[: order + 1 - d]
        left = (xs - t_lo) / (d - 1) * b[..., :-1]
        right = (t_lo + d - xs) / (d - 1) * b[..., 1:]
        b = left + right
    out = b[..., 0]
    return out if out.ndim else float(out)


def bspline_moments(order: int, max_power: int) -> np.ndarray:
    """``int B(x) x^l dx`` for ``l = 0..max_power``, exact by piecewise Gauss quadrature."""
    quad = gauss_legendre(min(16, (order + max_power) // 2 + 1))
    lo = -0.5 * order + np.arange(order)
    x = (lo[:, None] + 0.5 + 0.5 * quad.nodes[None, :]).ravel()
    w = np.tile(0.5 * quad.weights, order)
    vals = bspline(order, x) * w
    return np.array([np.sum(vals * x ** l) for l in range(max_power + 1)])


@dataclass(frozen=True)
class SIACKernel:
    r: int
    k: int
    coeffs: np.ndarray

    @property
    def order(self) -> int:
        return self.k + 1

    @property
    def nodes(self) -> np.ndarray:
        return -0.5 * self.r + np.arange(self.r + 1)

    @property
    def support_radius(self) -> float:
        return 0.5 * (self.r + self.k + 1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c, xg in zip(self.coeffs, self.nodes):
            out = out + c * bspline(self.order, x - xg)
        return out

    def breakpoints(self) -> np.ndarray:
        rad = self.support_radius
        return -rad + np.arange(int(round(2 * rad)) + 1)

    def to_json(self, H: float | None = None) -> str:
        return json.dumps({"r": self.r, "k": self.k, "H": H,
                           "coeffs": [float(c) for c in self.coeffs]})

    @classmethod
    def from_json(cls, text: str) -> tuple["SIACKernel", float | None]:
        d = json.loads(text)
        return cls(int(d["r"]), int(d["k"]), np.asarray(d["coeffs"], dtype=float)), d.get("H")


def solve_coefficients(r: int, k: int) -> SIACKernel:
    """Symmetric kernel reproducing polynomials up to degree ``r``."""
    if r < 0 or k < 0:
        raise ValueError("r and k must be non-negative")
    order = k + 1
    mom = bspline_moments(order, r)
    nodes = -0.5 * r + np.arange(r + 1)
    A = np.empty((r + 1, r + 1))
    for m in range(r + 1):
        for g, xg in enumerate(nodes):
            A[m, g] = sum(math.comb(m, l) * xg ** (m - l) * mom[l] for l in range(m + 1))
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise np.linalg.LinAlgError(f"moment system for r={r}, k={k} is ill-conditioned "
                                    f"(cond={cond:.3e})")
    rhs = np.zeros(r + 1)
    rhs[0] = 1.0
    coeffs = np.linalg.solve(A, rhs)
    coeffs.setflags(write=False)
    return SIACKernel(r, k, coeffs)


def global_kernel(p: int) -> SIACKernel:
    """Default smooth-region kernel: ``2p+1`` B-splines of order ``p+1``."""
    return solve_coefficients(2 * p, p)


def moving_average_kernel() -> SIACKernel:
    return solve_coefficients(0, 0)


def support_mask(field: DGField, kernel: SIACKernel, x, H: float | None = None) -> np.ndarray:
    """True where the scaled kernel support around ``x`` stays inside the domain."""
    mesh = field.mesh
    H = mesh.h if H is None else H
    rad = kernel.support_radius * H
    x = np.asarray(x, dtype=float)
    eps = 1e-12 * mesh.length
    return (x - rad >= mesh.domain_lo - eps) & (x + rad <= mesh.domain_hi + eps)


def siac_values(field: DGField, kernel: SIACKernel, x, H: float | None = None,
                periodic: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Filtered values ``(K_H * u_h)(x)`` and the mask of points actually filtered.

    The convolution is split at every kernel knot and element face so each piece is a
    polynomial product integrated exactly by Gauss quadrature.  Without ``periodic``,
    points whose support leaves the domain keep the unfiltered value.
    """
    mesh = field.mesh
    H = mesh.h if H is None else float(H)
    if H <= 0:
        raise ValueError("kernel scaling must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    rad = kernel.support_radius * H
    valid = np.ones(x.shape, dtype=bool) if periodic else support_mask(field, kernel, x, H)

    knots = x[:, None] - H * kernel.breakpoints()[None, ::-1]
    n_faces = int(np.ceil(2 * rad / mesh.h)) + 2
    first = np.floor((x - rad - mesh.domain_lo) / mesh.h)
    faces = mesh.domain_lo + mesh.h * (first[:, None] + np.arange(n_faces)[None, :])
    faces = np.clip(faces, (x - rad)[:, None], (x + rad)[:, None])
    breaks = np.sort(np.concatenate([knots, faces], axis=1), axis=1)

    quad = gauss_legendre(min(16, (kernel.k + field.degree) // 2 + 2))
    a, b = breaks[:, :-1], breaks[:, 1:]
    half = 0.5 * (b - a)
    xi = 0.5 * (a + b)[..., None] + half[..., None] * quad.nodes
    w = half[..., None] * quad.weights
    kern = kernel((x[:, None, None] - xi) / H)

    y = xi
    if periodic:
        y = mesh.domain_lo + np.mod(xi - mesh.domain_lo, mesh.length)
    elem = np.floor((y - mesh.domain_lo) / mesh.h).astype(int)
    inside = (elem >= 0) & (elem < mesh.n_elements)
    elem = np.clip(elem, 0, mesh.n_elements - 1)
    ref = np.clip(2.0 * (y - mesh.domain_lo - elem * mesh.h) / mesh.h - 1.0, -1.0, 1.0)
    phi = basis_table(field.degree, ref)
    uh = np.einsum("i...,...i->...", phi, field.coeffs[elem])
    uh = np.where(inside, uh, 0.0)

    filtered = np.sum(kern * uh * w, axis=(1, 2)) / H
    out = np.where(valid, filtered, field.evaluate(np.clip(x, mesh.domain_lo, mesh.domain_hi)))
    return out, valid


def siac_filter(field: DGField, kernel: SIACKernel, H: float | None = None,
                quad: QuadratureRule | None = None, periodic: bool = False) -> GridData:
    """Filter onto the per-element quadrature grid (4 Gauss nodes by default)."""
    quad = quad or gauss_legendre(4)
    vals, _ = siac_values(field, kernel, grid_points(field.mesh, quad), H, periodic)
    return GridData(field.mesh, quad, vals)


def moving_average_filter(field: DGField, H: float | None = None,
                          quad: QuadratureRule | None = None, periodic: bool = False) -> GridData:
    return siac_filter(field, moving_average_kernel(), H, quad, periodic)
