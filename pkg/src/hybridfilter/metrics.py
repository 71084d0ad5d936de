"""Grid error norms over discontinuity windows and quartile summaries."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dg import GridData


def window_indices(grid: GridData, window) -> np.ndarray:
    """Flat grid indices of a window's elements (``window`` has ``elements(N)`` or is
    an ``(lo, hi)`` pair); ``None`` selects the whole grid."""
    N, nq = grid.mesh.n_elements, grid.n_nodes
    if window is None:
        return np.arange(grid.values.size)
    if hasattr(window, "elements"):
        elems = window.elements(N)
    else:
        elems = np.arange(window[0], window[1] + 1) % N
    return (elems[:, None] * nq + np.arange(nq)).ravel()


def grid_errors(approx: GridData, reference: GridData, window=None) -> tuple[float, float]:
    """Root-mean-square and maximum pointwise error over the window's grid points."""
    if approx.values.shape != reference.values.shape or not np.allclose(approx.x, reference.x,
                                                                        rtol=0, atol=1e-12):
        raise ValueError("grids do not match")
    idx = window_indices(approx, window)
    e = np.abs(approx.values[idx] - reference.values[idx])
    return float(np.sqrt(np.mean(e * e))), float(np.max(e))


def quartiles(values) -> tuple[float, float, float]:
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("quartiles of an empty list")
    q = np.percentile(v, [25, 50, 75])
    return float(q[0]), float(q[1]), float(q[2])


@dataclass
class ErrorReport:
    variable: str
    errors: dict[str, tuple[float, float]]  # method -> (l2, linf)
    provenance: dict = field(default_factory=dict)

    def rows(self):
        for method, (l2, linf) in self.errors.items():
            yield {**self.provenance, "variable": self.variable, "method": method,
                   "l2": l2, "linf": linf}
