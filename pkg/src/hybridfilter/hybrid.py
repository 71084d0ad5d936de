"""Hybrid filtering: global SIAC, moving average inside discontinuity windows, the learned
filter on the discontinuity cell and Hermite point interpolation on its two neighbours."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .datagen import HALF_WIDTH, normalize_window
from .detect import DEFAULT_THRESHOLD, DiscontinuityWindow, detect_windows
from .dg import DGField, GridData, QuadratureRule, gauss_legendre, grid_points
from .nn_filter import ConvFilterParams, forward
from .siac import SIACKernel, global_kernel, moving_average_kernel, siac_values

log = logging.getLogger(__name__)

LABELS = ("unfiltered", "siac_global", "siac_ma", "nn", "hermite")
UNFILTERED, SIAC_GLOBAL, SIAC_MA, NN, HERMITE = range(5)


@dataclass
class HybridConfig:
    p: int
    kernel: SIACKernel | None = None
    n: int = 4
    d: int = 4
    C: float = DEFAULT_THRESHOLD
    model: ConvFilterParams | None = None
    hermite_degree: int | None = None
    periodic: bool = False
    quad: QuadratureRule = field(default_factory=lambda: gauss_legendre(4))

    def __post_init__(self):
        if self.n < 1 or self.d < 0:
            raise ValueError("need n >= 1 and d >= 0")
        if self.kernel is None:
            self.kernel = global_kernel(self.p)
        if self.hermite_degree is None:
            self.hermite_degree = min(2, self.p)


@dataclass
class FilteredSolution:
    grid: GridData
    labels: np.ndarray  # indices into LABELS, one per grid point
    windows: list[DiscontinuityWindow]

    @property
    def label_names(self) -> list[str]:
        return [LABELS[i] for i in self.labels]

    def to_csv(self, path) -> None:
        self.grid.to_csv(path, labels=self.label_names)


def hermite_patch(values: np.ndarray, anchors: np.ndarray, x: np.ndarray, j_dagger: int,
                  p_h: int, n_nodes: int, N: int) -> dict[int, np.ndarray]:
    """Interpolated values on elements ``j_dagger -+ 1``.

    Each side fits the degree-``p_h`` polynomial through the node of ``j_dagger`` nearest the
    shared face (taken from ``values``) and the ``p_h`` nodes of ``j_dagger -+ 2`` nearest
    their shared face (taken from ``anchors``).  ``x(e)`` returns the node coordinates of
    the unwrapped element index ``e``.  Returns ``{element: (flat indices, values)}``.
    """
    if p_h < 1:
        raise ValueError("Hermite degree must be at least 1")
    if p_h > n_nodes:
        raise ValueError("not enough nodes for the requested Hermite degree")
    out = {}
    for side in (-1, 1):
        centre = np.arange(n_nodes) + (j_dagger % N) * n_nodes
        far = np.arange(n_nodes) + ((j_dagger + 2 * side) % N) * n_nodes
        near = np.arange(n_nodes) + ((j_dagger + side) % N) * n_nodes
        xc, xf, xn = x(j_dagger), x(j_dagger + 2 * side), x(j_dagger + side)
        if side < 0:
            px, py = [xc[0]], [values[centre[0]]]
            px += list(xf[n_nodes - p_h:]); py += list(anchors[far[n_nodes - p_h:]])
        else:
            px, py = [xc[-1]], [values[centre[-1]]]
            px += list(xf[:p_h]); py += list(anchors[far[:p_h]])
        out[j_dagger + side] = (near, lagrange_eval(np.array(px), np.array(py), xn))
    return out


def lagrange_eval(px: np.ndarray, py: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Interpolating polynomial through ``(px, py)`` evaluated at ``x``."""
    if len(np.unique(px)) != len(px):
        raise ValueError("degenerate interpolation abscissae")
    out = np.zeros_like(x, dtype=float)
    for i in range(len(px)):
        others = np.delete(px, i)
        out += py[i] * np.prod((x[:, None] - others) / (px[i] - others), axis=1)
    return out


def _element_x(mesh, quad):
    def x(e):
        return mesh.domain_lo + mesh.h * (e + 0.5 * (quad.nodes + 1.0))
    return x


def _nn_window(model: ConvFilterParams, ma: np.ndarray, j: int, nq: int, N: int) -> np.ndarray:
    elems = np.arange(j - HALF_WIDTH, j + HALF_WIDTH + 1) % N
    inp = ma[(elems[:, None] * nq + np.arange(nq)).ravel()]
    x, _, tr = normalize_window(inp, inp)
    y = tr.invert(forward(model, x))
    return y[HALF_WIDTH * nq:(HALF_WIDTH + 1) * nq]


def _fits(window: DiscontinuityWindow, N: int, reach: int, periodic: bool) -> bool:
    j = window.j_dagger
    return periodic or (j - reach >= 0 and j + reach <= N - 1)


def hybrid_filter_field(field: DGField, config: HybridConfig,
                        windows: list[DiscontinuityWindow] | None = None) -> FilteredSolution:
    """Hybrid filtered values on the per-element node grid of ``config.quad``.

    Without ``windows`` they are detected on the moving-average filtered field itself.
    """
    mesh, quad = field.mesh, config.quad
    N, nq = mesh.n_elements, quad.n_nodes
    x = grid_points(mesh, quad)
    raw = field.evaluate(x)
    g, g_ok = siac_values(field, config.kernel, x, periodic=config.periodic)
    ma, ma_ok = siac_values(field, moving_average_kernel(), x, periodic=config.periodic)
    ma = np.where(ma_ok, ma, raw)
    values = np.where(g_ok, g, raw)
    labels = np.where(g_ok, SIAC_GLOBAL, UNFILTERED)
    if windows is None:
        windows = detect_windows(GridData(mesh, quad, ma), config.n, config.d, config.C,
                                 config.periodic)
    windows = sorted(windows, key=lambda w: w.lo)

    for w in windows:
        idx = (w.elements(N)[:, None] * nq + np.arange(nq)).ravel()
        values[idx] = ma[idx]
        labels[idx] = np.where(ma_ok[idx], SIAC_MA, UNFILTERED)

    xe = _element_x(mesh, quad)
    for w in windows:
        if w.j_dagger is None:
            continue
        j = w.j_dagger
        if config.model is not None:
            if _fits(w, N, HALF_WIDTH, config.periodic):
                cell = np.arange(nq) + j * nq
                values[cell] = _nn_window(config.model, ma, j, nq, N)
                labels[cell] = NN
            else:
                log.warning("discontinuity cell %d too close to the boundary; learned filter "
                            "skipped", j)
        if _fits(w, N, 2, config.periodic):
            for _, (near, vals) in hermite_patch(values, ma, xe, j, config.hermite_degree, nq,
                                                 N).items():
                values[near] = vals
                labels[near] = HERMITE
        else:
            log.warning("discontinuity cell %d too close to the boundary; Hermite patch "
                        "skipped", j)
    return FilteredSolution(GridData(mesh, quad, values), labels, windows)


def hybrid_filter_euler(fields, config: HybridConfig,
                        windows: list[DiscontinuityWindow] | None = None) -> dict:
    """Filter the conservative variables with windows shared from the density, then form
    velocity, pressure and entropy ``p / rho^gamma`` pointwise."""
    quad = config.quad
    if windows is None:
        ma_rho, ok = siac_values(fields.rho, moving_average_kernel(),
                                 grid_points(fields.mesh, quad), periodic=config.periodic)
        ma_rho = np.where(ok, ma_rho, fields.rho.evaluate(grid_points(fields.mesh, quad)))
        windows = detect_windows(GridData(fields.mesh, quad, ma_rho), config.n, config.d,
                                 config.C, config.periodic)
    cons = {name: hybrid_filter_field(f, config, windows)
            for name, f in (("rho", fields.rho), ("mom", fields.mom), ("energy", fields.energy))}
    rho = cons["rho"].grid.values
    bad = np.flatnonzero(~(rho > 0))
    if bad.size:
        x = cons["rho"].grid.x[bad[0]]
        raise ValueError(f"filtered density is non-positive at x={x:.6g} (point {bad[0]})")
    mom, energy = cons["mom"].grid.values, cons["energy"].grid.values
    u = mom / rho
    p = (fields.gamma - 1.0) * (energy - 0.5 * mom * u)
    s = p / rho ** fields.gamma
    labels = cons["rho"].labels
    out = dict(cons)
    for name, v in (("u", u), ("p", p), ("S", s)):
        out[name] = FilteredSolution(cons["rho"].grid.with_values(v), labels.copy(), windows)
    return out


def unfiltered_grid(field: DGField, quad: QuadratureRule | None = None) -> GridData:
    quad = quad or gauss_legendre(4)
    return GridData(field.mesh, quad, field.evaluate(grid_points(field.mesh, quad)))
