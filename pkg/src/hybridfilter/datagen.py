"""Training and validation windows for the data-driven filter.

Training data comes from periodic top-hat advection runs; validation data from Euler
density at times before the benchmark final times.  Every window is the moving-average
filtered solution at the 4 Gauss nodes of 9 elements centred on a troubled cell, paired
with the exact solution at the same nodes and normalised by the input's min/max.
"""
from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .detect import (DEFAULT_THRESHOLD, grid_to_field, group_windows,
                     locate_discontinuity_cell, multiwavelet_detect)
from .dg import GridData, gauss_legendre
from .siac import moving_average_filter
from .solvers import (AdvectionProblem, advect_solve, euler_solve, exact_riemann,
                      riemann_states, wave_speeds)

log = logging.getLogger(__name__)

WAVE_SPEEDS = tuple(np.arange(1.0, 5.01, 0.5))
HALF_WIDTH = 4
JUMP_HALF_WIDTH = 2
N_TRAIN_ELEMENTS = 128
N_NODES = 4
CORPUS_MAGIC = b"HFWC"
CORPUS_VERSION = 1
VALIDATION_TIMES = {"lax": (0.7, 1.0), "sod": (1.0, 1.5)}


@dataclass(frozen=True)
class SampleParams:
    a: float
    alpha: float
    delta: float
    p: int
    t_final: float
    seed: int
    index: int = 0

    def problem(self) -> AdvectionProblem:
        return AdvectionProblem(self.a, self.alpha, self.delta, self.t_final)


@dataclass(frozen=True)
class Transform:
    shift: float
    scale: float

    def apply(self, y):
        return (np.asarray(y, dtype=float) - self.shift) / self.scale

    def invert(self, y):
        return np.asarray(y, dtype=float) * self.scale + self.shift


@dataclass
class WindowSample:
    input: np.ndarray
    target: np.ndarray
    transform: Transform
    provenance: dict = field(default_factory=dict)


def draw_params(count: int, wave_speeds=WAVE_SPEEDS, seed: int = 0) -> list[SampleParams]:
    """Uniform draws stratified over ``wave_speeds`` (sample ``i`` uses speed ``i mod n``)."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(seed)
    speeds = np.asarray(wave_speeds, dtype=float)
    out = []
    for i in range(count):
        a = float(speeds[i % len(speeds)])
        out.append(SampleParams(
            a=a,
            alpha=float(rng.uniform(0.1, 0.5)),
            delta=float(rng.uniform(0.1, 1.0)),
            p=int(rng.integers(1, 5)),
            t_final=float(10.0 / a * rng.uniform(1.1, 1.3)),
            seed=int(rng.integers(2**31)),
            index=i))
    return out


def normalize_window(inp, target) -> tuple[np.ndarray, np.ndarray, Transform]:
    """Affine map sending the input's range to [0, 1]; flat inputs get the identity."""
    inp = np.asarray(inp, dtype=float)
    lo, hi = float(inp.min()), float(inp.max())
    tr = Transform(lo, hi - lo) if hi > lo else Transform(0.0, 1.0)
    return tr.apply(inp), tr.apply(target), tr


def denormalize(y, tr: Transform) -> np.ndarray:
    return tr.invert(y)


def window_points(grid: GridData, centre: int, half: int = HALF_WIDTH,
                  periodic: bool = True) -> np.ndarray:
    """Flat grid indices of the ``2 half + 1`` elements around ``centre``."""
    N, nq = grid.mesh.n_elements, grid.n_nodes
    elems = np.arange(centre - half, centre + half + 1)
    if periodic:
        elems = elems % N
    elif elems[0] < 0 or elems[-1] >= N:
        raise IndexError("window leaves the domain")
    return (elems[:, None] * nq + np.arange(nq)).ravel()


def _jump_near(jumps, centre: int, mesh, periodic: bool) -> bool:
    cells = np.floor((np.asarray(jumps) - mesh.domain_lo) / mesh.h).astype(int)
    dist = np.abs(cells - centre)
    if periodic:
        dist = np.minimum(dist, mesh.n_elements - dist)
    return bool(np.any(dist <= JUMP_HALF_WIDTH))


def window_centres(filtered: GridData, troubled, periodic: bool) -> list[int]:
    """One centre per run of adjacent troubled cells: the cell of the largest jump."""
    N = filtered.mesh.n_elements
    centres = []
    for g in group_windows(troubled, 1, 0, N, periodic):
        vals = filtered.by_element()[np.arange(g.s_lo, g.s_hi + 1) % N].ravel()
        if vals.size < 2:
            centres.append(g.s_lo % N)
            continue
        centres.append(locate_discontinuity_cell(vals, g.s_lo, filtered.n_nodes) % N)
    return centres


def _windows_from_grid(filtered: GridData, exact_vals: np.ndarray, jumps, C: float,
                       periodic: bool, provenance: dict) -> list[WindowSample]:
    troubled = multiwavelet_detect(grid_to_field(filtered), C, periodic)
    if troubled.size == 0:
        log.warning("no troubled cells found for %s", provenance)
        return []
    mesh = filtered.mesh
    out = []
    for tc in window_centres(filtered, troubled, periodic):
        if not periodic and (tc - HALF_WIDTH < 0 or tc + HALF_WIDTH >= mesh.n_elements):
            continue
        if not _jump_near(jumps, tc, mesh, periodic):
            continue
        idx = window_points(filtered, tc, periodic=periodic)
        inp, tgt, tr = normalize_window(filtered.values[idx], exact_vals[idx])
        out.append(WindowSample(inp, tgt, tr, {**provenance, "tc": int(tc)}))
    return out


def filtered_advection(params: SampleParams) -> GridData:
    """Moving-average filtered (periodic) DG solution of a top-hat sample."""
    uh, _ = advect_solve(params.problem(), params.p, N_TRAIN_ELEMENTS)
    return moving_average_filter(uh, quad=gauss_legendre(N_NODES), periodic=True)


def make_window_samples(params: SampleParams, C: float = DEFAULT_THRESHOLD) -> list[WindowSample]:
    """Troubled-cell windows of one top-hat run whose exact jump sits in the central cells."""
    grid = filtered_advection(params)
    prob = params.problem()
    exact_vals = prob.exact(grid.x)
    return _windows_from_grid(grid, exact_vals, prob.jump_locations(), C, True,
                              {"kind": "tophat", **asdict(params)})


def recompute_input(sample: WindowSample) -> np.ndarray:
    """Raw (unnormalised) window input rebuilt from the sample's provenance."""
    prov = dict(sample.provenance)
    if prov.get("kind") != "tophat":
        raise ValueError("only top-hat samples can be recomputed")
    keys = {k: prov[k] for k in ("a", "alpha", "delta", "p", "t_final", "seed", "index")}
    grid = filtered_advection(SampleParams(**keys))
    return grid.values[window_points(grid, prov["tc"])]


# ---- Euler validation windows

def jump_positions(ic_id: str, t: float) -> np.ndarray:
    """Positions of the contact and of any shocks of a Riemann tube at time ``t``."""
    ws = wave_speeds(*riemann_states(ic_id))
    speeds = [ws["contact"]] + [ws[s][1] for s in ("left", "right") if ws[s][0] == "shock"]
    return np.array(speeds, dtype=float) * t


def exact_density(ic_id: str, x, t: float) -> np.ndarray:
    rho, _, _ = exact_riemann(*riemann_states(ic_id), np.asarray(x, dtype=float) / t)
    return rho


def euler_validation_windows(ic_id: str, p: int, t: float, C: float = DEFAULT_THRESHOLD,
                             n_elements: int = N_TRAIN_ELEMENTS) -> list[WindowSample]:
    fields = euler_solve(ic_id, p, n_elements, t_final=t)
    grid = moving_average_filter(fields.rho, quad=gauss_legendre(N_NODES))
    exact_vals = exact_density(ic_id, grid.x, t)
    return _windows_from_grid(grid, exact_vals, jump_positions(ic_id, t), C, False,
                              {"kind": "euler", "ic": ic_id, "p": p, "t_final": t,
                               "variable": "rho"})


def validation_runs(per_ic: int, seed: int = 0) -> list[tuple[str, int, float]]:
    """Run list ``(ic, p, t)`` cycling through degrees with uniform times per problem."""
    rng = np.random.default_rng(seed)
    runs = []
    for ic_id, (t0, t1) in VALIDATION_TIMES.items():
        for i in range(per_ic):
            runs.append((ic_id, 1 + i % 4, float(rng.uniform(t0, t1))))
    return runs


def build_validation_set(euler_runs, windows_per_ic: int | None = None,
                         C: float = DEFAULT_THRESHOLD) -> list[WindowSample]:
    """Density windows from the given Euler runs, optionally capped per problem."""
    out: list[WindowSample] = []
    counts: dict[str, int] = {}
    for ic_id, p, t in euler_runs:
        if windows_per_ic is not None and counts.get(ic_id, 0) >= windows_per_ic:
            continue
        for w in euler_validation_windows(ic_id, p, t, C):
            if windows_per_ic is not None and counts.get(ic_id, 0) >= windows_per_ic:
                break
            out.append(w)
            counts[ic_id] = counts.get(ic_id, 0) + 1
    return out


# ---- corpus file

_CORPUS_HEAD = struct.Struct("<4sHII")


def as_arrays(samples) -> tuple[np.ndarray, np.ndarray]:
    return (np.array([s.input for s in samples]), np.array([s.target for s in samples]))


def write_corpus(path, samples, manifest_path=None) -> str:
    """Write fixed-width records and a JSON manifest; returns the corpus SHA-256."""
    length = len(samples[0].input) if samples else 0
    buf = [_CORPUS_HEAD.pack(CORPUS_MAGIC, CORPUS_VERSION, len(samples), length)]
    for s in samples:
        rec = np.concatenate([s.input, s.target, [s.transform.shift, s.transform.scale]])
        buf.append(rec.astype("<f8").tobytes())
    data = b"".join(buf)
    Path(path).write_bytes(data)
    digest = hashlib.sha256(data).hexdigest()
    if manifest_path is not None:
        Path(manifest_path).write_text(json.dumps(
            {"count": len(samples), "length": length, "sha256": digest,
             "samples": [s.provenance for s in samples]}, indent=1, sort_keys=True))
    return digest


def read_corpus(path, manifest_path=None) -> list[WindowSample]:
    data = Path(path).read_bytes()
    if len(data) < _CORPUS_HEAD.size:
        raise ValueError(f"{path}: truncated corpus file")
    magic, version, count, length = _CORPUS_HEAD.unpack_from(data)
    if magic != CORPUS_MAGIC or version != CORPUS_VERSION:
        raise ValueError(f"{path}: not a version-{CORPUS_VERSION} corpus file")
    width = 2 * length + 2
    if len(data) != _CORPUS_HEAD.size + 8 * width * count:
        raise ValueError(f"{path}: corpus size does not match its header")
    recs = np.frombuffer(data, "<f8", offset=_CORPUS_HEAD.size).reshape(count, width)
    prov = [{}] * count
    if manifest_path is not None:
        prov = json.loads(Path(manifest_path).read_text())["samples"]
    return [WindowSample(r[:length].copy(), r[length:2 * length].copy(),
                         Transform(float(r[-2]), float(r[-1])), pv) for r, pv in zip(recs, prov)]


def corpus_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def generate_training_set(count: int, seed: int, C: float = DEFAULT_THRESHOLD,
                          wave_speeds=WAVE_SPEEDS) -> list[WindowSample]:
    out = []
    for params in draw_params(count, wave_speeds, seed):
        out.extend(make_window_samples(params, C))
    return out


__all__ = ["SampleParams", "Transform", "WindowSample", "WAVE_SPEEDS", "draw_params",
           "normalize_window", "denormalize", "make_window_samples", "recompute_input",
           "build_validation_set", "validation_runs", "euler_validation_windows",
           "jump_positions", "exact_density", "write_corpus", "read_corpus", "corpus_digest",
           "generate_training_set", "as_arrays", "window_points", "filtered_advection"]
