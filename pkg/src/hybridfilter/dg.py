"""Uniform 1D meshes, modal Legendre basis, Gauss-Legendre quadrature and DG fields.

Coefficients are stored against the scaled modes ``phi_i = sqrt(2i+1) P_i`` which are
orthonormal for the element mean ``1/2 int_{-1}^{1}``.  With this scaling mode 0 is the
cell average and the sum of squared coefficients is the mean square of the element
polynomial.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

FIELD_MAGIC = b"DGFD"
FIELD_VERSION = 1
_FIELD_HEADER = struct.Struct("<4sHHIIdd")

MAX_QUAD_NODES = 16
DEFAULT_GRID_NODES = 4


@dataclass(frozen=True)
class Mesh:
    domain_lo: float
    domain_hi: float
    n_elements: int

    @property
    def h(self) -> float:
        return (self.domain_hi - self.domain_lo) / self.n_elements

    @property
    def length(self) -> float:
        return self.domain_hi - self.domain_lo

    @property
    def faces(self) -> np.ndarray:
        return self.domain_lo + self.h * np.arange(self.n_elements + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.domain_lo + self.h * (np.arange(self.n_elements) + 0.5)

    def element_of(self, x) -> np.ndarray:
        """Index of the element containing ``x`` (right faces belong to the right element)."""
        idx = np.floor((np.asarray(x, dtype=float) - self.domain_lo) / self.h).astype(int)
        return np.clip(idx, 0, self.n_elements - 1)

    def to_reference(self, x, element) -> np.ndarray:
        left = self.domain_lo + self.h * np.asarray(element)
        return 2.0 * (np.asarray(x, dtype=float) - left) / self.h - 1.0


def build_mesh(lo: float, hi: float, n: int) -> Mesh:
    if int(n) != n or n < 1:
        raise ValueError(f"number of elements must be a positive integer, got {n!r}")
    if not hi > lo:
        raise ValueError(f"domain must satisfy hi > lo, got [{lo}, {hi}]")
    return Mesh(float(lo), float(hi), int(n))


def legendre_eval(p: int, xi):
    """Legendre polynomial ``P_p`` by the three-term recurrence."""
    if p < 0:
        raise ValueError("degree must be non-negative")
    xi = np.asarray(xi, dtype=float)
    p0 = np.ones_like(xi)
    if p == 0:
        return p0 if p0.ndim else float(p0)
    p1 = xi.copy()
    for n in range(1, p):
        p0, p1 = p1, ((2 * n + 1) * xi * p1 - n * p0) / (n + 1)
    return p1 if p1.ndim else float(p1)


def legendre_table(p: int, xi) -> np.ndarray:
    """``P_0..P_p`` at ``xi``, shape ``(p+1, *xi.shape)``."""
    xi = np.asarray(xi, dtype=float)
    out = np.empty((p + 1,) + xi.shape)
    out[0] = 1.0
    if p >= 1:
        out[1] = xi
    for n in range(1, p):
        out[n + 1] = ((2 * n + 1) * xi * out[n] - n * out[n - 1]) / (n + 1)
    return out


def legendre_deriv_table(p: int, xi) -> np.ndarray:
    """Derivatives ``P_0'..P_p'`` at ``xi`` via ``P_{n+1}' = P_{n-1}' + (2n+1) P_n``."""
    vals = legendre_table(p, xi)
    out = np.zeros_like(vals)
    if p >= 1:
        out[1] = 1.0
    for n in range(1, p):
        out[n + 1] = out[n - 1] + (2 * n + 1) * vals[n]
    return out


def mode_scale(p: int) -> np.ndarray:
    return np.sqrt(2.0 * np.arange(p + 1) + 1.0)


def basis_table(p: int, xi) -> np.ndarray:
    """Scaled modes ``phi_i(xi)``, shape ``(p+1, *xi.shape)``."""
    xi = np.asarray(xi, dtype=float)
    return legendre_table(p, xi) * mode_scale(p).reshape((-1,) + (1,) * xi.ndim)


def basis_deriv_table(p: int, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    return legendre_deriv_table(p, xi) * mode_scale(p).reshape((-1,) + (1,) * xi.ndim)


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)


def _gauss_legendre_newton(n: int) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(100):
        pn = legendre_eval(n, x)
        dpn = n * (x * pn - legendre_eval(n - 1, x)) / (x * x - 1.0)
        dx = pn / dpn
        x = x - dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    pn1 = legendre_eval(n - 1, x)
    dpn = n * (x * legendre_eval(n, x) - pn1) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dpn * dpn)
    order = np.argsort(x)
    return x[order], w[order]


_QUAD_CACHE: dict[int, QuadratureRule] = {}


def gauss_legendre(n: int) -> QuadratureRule:
    """Gauss-Legendre rule with ``n`` nodes on [-1, 1] (Newton iteration on roots of P_n)."""
    if int(n) != n or not 1 <= n <= MAX_QUAD_NODES:
        raise ValueError(f"supported node counts are 1..{MAX_QUAD_NODES}, got {n!r}")
    n = int(n)
    rule = _QUAD_CACHE.get(n)
    if rule is None:
        if n == 1:
            nodes, weights = np.array([0.0]), np.array([2.0])
        else:
            nodes, weights = _gauss_legendre_newton(n)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        rule = _QUAD_CACHE[n] = QuadratureRule(nodes, weights)
    return rule


@dataclass(frozen=True)
class DGField:
    mesh: Mesh
    coeffs: np.ndarray  # (n_elements, p + 1)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] != self.mesh.n_elements:
            raise ValueError(
                f"coeffs must have shape ({self.mesh.n_elements}, p+1), got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def means(self) -> np.ndarray:
        return self.coeffs[:, 0]

    def with_coeffs(self, coeffs) -> "DGField":
        return DGField(self.mesh, coeffs)

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        elem = self.mesh.element_of(x)
        xi = self.mesh.to_reference(x, elem)
        phi = basis_table(self.degree, xi)
        return np.einsum("i...,...i->...", phi, self.coeffs[elem])

    def at_reference(self, xi) -> np.ndarray:
        """Values at reference points ``xi`` in every element, shape ``(N, len(xi))``."""
        return self.coeffs @ basis_table(self.degree, np.asarray(xi, dtype=float))

    def face_values(self) -> tuple[np.ndarray, np.ndarray]:
        """Traces ``(u(x_{j-1/2}^+), u(x_{j+1/2}^-))`` per element."""
        s = mode_scale(self.degree)
        signs = (-1.0) ** np.arange(self.degree + 1)
        return self.coeffs @ (s * signs), self.coeffs @ s


def project(f: Callable, mesh: Mesh, p: int, quad: QuadratureRule | None = None) -> DGField:
    """Element-wise L2 projection of ``f`` onto degree-``p`` polynomials."""
    if quad is None:
        quad = gauss_legendre(min(MAX_QUAD_NODES, p + 2))
    x = mesh.centers[:, None] + 0.5 * mesh.h * quad.nodes[None, :]
    vals = np.asarray(f(x), dtype=float) * np.ones_like(x)
    phi = basis_table(p, quad.nodes)
    coeffs = 0.5 * (vals * quad.weights) @ phi.T
    return DGField(mesh, coeffs)


def project_nodal(values: np.ndarray, mesh: Mesh, p: int, quad: QuadratureRule) -> DGField:
    """Project per-element samples at ``quad`` nodes (shape ``(N, n_nodes)``) to degree ``p``."""
    values = np.asarray(values, dtype=float).reshape(mesh.n_elements, quad.n_nodes)
    phi = basis_table(p, quad.nodes)
    return DGField(mesh, 0.5 * (values * quad.weights) @ phi.T)


@dataclass(frozen=True)
class GridData:
    """Point values on the per-element quadrature grid, element-ordered."""

    mesh: Mesh
    quad: QuadratureRule
    values: np.ndarray  # (N * n_nodes,)
    x: np.ndarray = field(init=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != self.mesh.n_elements * self.quad.n_nodes:
            raise ValueError("grid values do not match mesh and quadrature")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        x = grid_points(self.mesh, self.quad)
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def n_nodes(self) -> int:
        return self.quad.n_nodes

    def by_element(self) -> np.ndarray:
        return self.values.reshape(self.mesh.n_elements, self.n_nodes)

    def with_values(self, values) -> "GridData":
        return GridData(self.mesh, self.quad, values)

    def element_slice(self, lo: int, hi: int) -> slice:
        """Point slice covering elements ``lo..hi`` inclusive."""
        return slice(lo * self.n_nodes, (hi + 1) * self.n_nodes)

    def to_csv(self, path, labels=None) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            if labels is None:
                writer.writerow(["x", "value"])
                for xv, v in zip(self.x, self.values):
                    writer.writerow([repr(float(xv)), repr(float(v))])
            else:
                writer.writerow(["x", "value", "label"])
                for xv, v, lab in zip(self.x, self.values, labels):
                    writer.writerow([repr(float(xv)), repr(float(v)), lab])


def grid_points(mesh: Mesh, quad: QuadratureRule) -> np.ndarray:
    return (mesh.centers[:, None] + 0.5 * mesh.h * quad.nodes[None, :]).reshape(-1)


def eval_grid(fld: DGField, quad: QuadratureRule | None = None) -> GridData:
    quad = quad or gauss_legendre(DEFAULT_GRID_NODES)
    return GridData(fld.mesh, quad, fld.at_reference(quad.nodes).reshape(-1))


def grid_from_function(f: Callable, mesh: Mesh, quad: QuadratureRule | None = None) -> GridData:
    quad = quad or gauss_legendre(DEFAULT_GRID_NODES)
    return GridData(mesh, quad, np.asarray(f(grid_points(mesh, quad)), dtype=float))


def write_fields(path, fields: list[DGField] | DGField) -> None:
    """Binary dump: little-endian header then row-major float64 coefficients per field."""
    if isinstance(fields, DGField):
        fields = [fields]
    mesh, p = fields[0].mesh, fields[0].degree
    for f in fields:
        if f.mesh != mesh or f.degree != p:
            raise ValueError("all fields in one dump must share mesh and degree")
    with open(path, "wb") as fh:
        fh.write(_FIELD_HEADER.pack(FIELD_MAGIC, FIELD_VERSION, len(fields), mesh.n_elements,
                                    p, mesh.domain_lo, mesh.domain_hi))
        for f in fields:
            fh.write(np.ascontiguousarray(f.coeffs, dtype="<f8").tobytes())


def read_fields(path) -> list[DGField]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _FIELD_HEADER.size:
        raise ValueError(f"{path}: truncated field dump")
    magic, version, nvar, n, p, lo, hi = _FIELD_HEADER.unpack_from(raw)
    if magic != FIELD_MAGIC or version != FIELD_VERSION:
        raise ValueError(f"{path}: not a field dump (magic={magic!r}, version={version})")
    count = nvar * n * (p + 1)
    body = raw[_FIELD_HEADER.size:]
    if len(body) != 8 * count:
        raise ValueError(f"{path}: expected {count} coefficients, found {len(body) // 8}")
    data = np.frombuffer(body, dtype="<f8").astype(float).reshape(nvar, n, p + 1)
    mesh = build_mesh(lo, hi, n)
    return [DGField(mesh, data[i]) for i in range(nvar)]
