"""Troubled-cell indication, discontinuity windows and location of the discontinuity cell."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from functools import lru_cache

import numpy as np

from .dg import DGField, GridData, basis_table, gauss_legendre

DEFAULT_THRESHOLD = 0.4


@lru_cache(maxsize=None)
def two_scale_matrices(p: int) -> tuple[np.ndarray, np.ndarray]:
    """``T[m, i] = 1/2 int phi_i(xi) phi_m((xi -+ 1)/2) dxi`` for the left/right child."""
    quad = gauss_legendre(p + 1)
    fine = basis_table(p, quad.nodes) * quad.weights
    left = 0.5 * basis_table(p, 0.5 * (quad.nodes - 1.0)) @ fine.T
    right = 0.5 * basis_table(p, 0.5 * (quad.nodes + 1.0)) @ fine.T
    return left, right


def pair_details(coeffs: np.ndarray, norm: str = "mode0") -> np.ndarray:
    """Detail magnitude of each adjacent element pair against its merged coarse projection.

    ``coeffs`` holds the left and right children stacked as ``(n_pairs, 2, p+1)``.
    ``norm="mode0"`` measures the child-mean detail; ``"l2"`` the full detail norm.
    """
    p = coeffs.shape[-1] - 1
    tl, tr = two_scale_matrices(p)
    aL, aR = coeffs[:, 0], coeffs[:, 1]
    coarse = 0.5 * (aL @ tl.T + aR @ tr.T)
    dL = aL - coarse @ tl
    dR = aR - coarse @ tr
    if norm == "mode0":
        return np.abs(dL[:, 0])
    if norm == "l2":
        return np.sqrt(np.sum(dL ** 2 + dR ** 2, axis=1))
    raise ValueError(f"unknown detail norm {norm!r}")


def element_details(field: DGField, periodic: bool = False, norm: str = "mode0") -> np.ndarray:
    """Per-element detail: the largest detail among the pairs the element belongs to."""
    c = field.coeffs
    if periodic:
        pairs = np.stack([c, np.roll(c, -1, axis=0)], axis=1)
    else:
        pairs = np.stack([c[:-1], c[1:]], axis=1)
    d = pair_details(pairs, norm)
    out = np.zeros(len(c))
    if periodic:
        out = np.maximum(d, np.roll(d, 1))
    else:
        out[:-1] = d
        out[1:] = np.maximum(out[1:], d)
    return out


def multiwavelet_detect(field: DGField, C: float = DEFAULT_THRESHOLD, periodic: bool = False,
                        norm: str = "mode0") -> np.ndarray:
    """Elements whose detail exceeds ``C`` times the largest detail."""
    if not 0 < C <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    if field.mesh.n_elements < 2:
        return np.zeros(0, dtype=int)
    d = element_details(field, periodic, norm)
    dmax = d.max()
    scale = np.abs(field.coeffs).max()
    if dmax <= 1e-12 * scale or dmax == 0.0:
        return np.zeros(0, dtype=int)
    return np.flatnonzero(d > C * dmax)


@dataclass(frozen=True)
class DiscontinuityWindow:
    """Troubled-cell group ``[s_lo, s_hi]`` padded by ``pad`` elements.

    ``lo``/``hi`` are the padded bounds; on periodic meshes they may leave ``[0, N-1]``
    and are read modulo ``N``.
    """

    s_lo: int
    s_hi: int
    pad: int
    lo: int
    hi: int
    j_dagger: int | None = None

    def elements(self, n_elements: int) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1) % n_elements

    def to_dict(self) -> dict:
        return asdict(self)


def windows_to_json(windows) -> str:
    return json.dumps([w.to_dict() for w in windows])


def windows_from_json(text: str) -> list[DiscontinuityWindow]:
    return [DiscontinuityWindow(**d) for d in json.loads(text)]


def group_windows(troubled, n: int, d: int, N: int,
                  periodic: bool = False) -> list[DiscontinuityWindow]:
    """Group troubled cells at most ``n`` apart and pad each group by ``d`` elements."""
    if n < 1 or d < 0:
        raise ValueError("need n >= 1 and d >= 0")
    cells = np.unique(np.asarray(list(troubled), dtype=int))
    if cells.size == 0:
        return []
    groups = [[int(cells[0]), int(cells[0])]]
    for c in cells[1:]:
        if c - groups[-1][1] <= n:
            groups[-1][1] = int(c)
        else:
            groups.append([int(c), int(c)])
    if periodic and len(groups) > 1 and groups[0][0] + N - groups[-1][1] <= n:
        last = groups.pop()
        groups[0] = [last[0] - N, groups[0][1]]
    if periodic and len(groups) == 1 and groups[0][1] - groups[0][0] + 1 + 2 * d > N:
        raise ValueError("a single window would cover the whole periodic domain")
    out = []
    for lo, hi in groups:
        if periodic:
            wlo, whi = lo - d, hi + d
        else:
            wlo, whi = max(lo - d, 0), min(hi + d, N - 1)
        out.append(DiscontinuityWindow(lo, hi, d, wlo, whi))
    return sorted(out, key=lambda w: w.s_lo)


def locate_discontinuity_cell(values: np.ndarray, first_element: int, n_nodes: int) -> int:
    """Element owning the left end of the largest forward difference (leftmost on ties)."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise ValueError("need at least two grid points")
    jumps = np.abs(np.diff(values))
    i = int(np.argmax(jumps))
    return first_element + i // n_nodes


def locate_in_window(grid: GridData, window: DiscontinuityWindow) -> DiscontinuityWindow:
    """Return ``window`` with ``j_dagger`` located on ``grid`` (element index modulo N)."""
    vals = grid.by_element()[window.elements(grid.mesh.n_elements)].ravel()
    j = locate_discontinuity_cell(vals, window.lo, grid.n_nodes)
    return replace(window, j_dagger=int(j % grid.mesh.n_elements))


def grid_to_field(grid: GridData, p: int | None = None) -> DGField:
    """Element-wise projection of grid samples (exact for degree < number of nodes)."""
    from .dg import project_nodal
    p = grid.n_nodes - 1 if p is None else p
    return project_nodal(grid.by_element(), grid.mesh, p, grid.quad)


def detect_windows(grid: GridData, n: int = 4, d: int = 4, C: float = DEFAULT_THRESHOLD,
                   periodic: bool = False) -> list[DiscontinuityWindow]:
    """Multiwavelet detection on filtered grid data, grouping, and location of j-dagger."""
    troubled = multiwavelet_detect(grid_to_field(grid), C, periodic)
    windows = group_windows(troubled, n, d, grid.mesh.n_elements, periodic)
    return [locate_in_window(grid, w) for w in windows]
