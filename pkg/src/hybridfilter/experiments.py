"""Experiment presets and the generate / train / run / filter / evaluate pipelines."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import datagen
from .detect import DiscontinuityWindow
from .dg import GridData, gauss_legendre, grid_points, read_fields, write_fields
from .hybrid import HybridConfig, hybrid_filter_euler, hybrid_filter_field
from .metrics import grid_errors, quartiles
from .nn_filter import (ArchitectureConfig, ConvFilterParams, TrainConfig, load_model,
                        save_model, train)
from .siac import moving_average_kernel, siac_values
from .solvers import (BENCHMARK_TIMES, DEFAULT_TVB_M, EulerFields, advect_solve, euler_solve,
                      exact_riemann, reference_shu_osher_series, riemann_states,
                      sample_cellwise, to_primitive)
from .solvers.euler import DOMAIN

log = logging.getLogger(__name__)

DATASET_TIMES = {"lax": (1.0, 1.3), "sod": (1.5, 2.0), "shu_osher": (1.0, 1.2)}
VARIABLES = ("rho", "u", "p")
METHODS = ("unfiltered", "siac_ma", "hybrid")

# medians / single-window values quoted for comparison (grid l2, l_inf)
PAPER_VALUES = {
    ("lax", "rho", "dataset_median_l2"): {"unfiltered": 1.68e-01, "hybrid": 4.80e-02},
    ("sod", "u", "shock_p2_linf"): {"unfiltered": 4.04e-01, "hybrid": 5.84e-02},
    ("lax", "rho", "shock_p1_linf"): {"unfiltered": 3.75e-01, "hybrid": 6.78e-02},
}


@dataclass(frozen=True)
class Preset:
    name: str
    train_samples: int
    arch: ArchitectureConfig
    train: TrainConfig
    validation_runs_per_ic: int
    validation_windows_per_ic: int
    dataset_runs: dict = field(default_factory=dict)
    reference_cells: int = 8000
    tophat_eval_windows: int = 30
    n_elements: int = 128

    def to_dict(self) -> dict:
        return asdict(self)


PRESETS = {
    "paper": Preset("paper", 900, ArchitectureConfig.preset("paper"),
                    TrainConfig(max_epochs=5000, patience=200), 40, 25,
                    {"lax": 84, "sod": 65, "shu_osher": 84}, reference_cells=30000),
    "desk": Preset("desk", 90, ArchitectureConfig.preset("desk"),
                   TrainConfig(max_epochs=2000, patience=200), 6, 8,
                   {"lax": 12, "sod": 10, "shu_osher": 12}),
}


def get_preset(name: str, **overrides) -> Preset:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r} (choose from {sorted(PRESETS)})")
    preset = PRESETS[name]
    train_over = {k[6:]: v for k, v in overrides.items() if k.startswith("train_") and
                  k != "train_samples" and v is not None}
    top = {k: v for k, v in overrides.items() if v is not None and
           (not k.startswith("train_") or k == "train_samples")}
    if train_over:
        top["train"] = replace(preset.train, **train_over)
    return replace(preset, **top)


# ---- data and training

def generate_data(out: Path, preset: Preset, seed: int) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    train_set = datagen.generate_training_set(preset.train_samples, seed)
    if not train_set:
        raise RuntimeError("no training windows were produced")
    val_set = datagen.build_validation_set(
        datagen.validation_runs(preset.validation_runs_per_ic, seed + 1),
        preset.validation_windows_per_ic)
    if not val_set:
        raise RuntimeError("no validation windows were produced")
    digests = {
        "train": datagen.write_corpus(out / "train.bin", train_set, out / "train_manifest.json"),
        "validation": datagen.write_corpus(out / "validation.bin", val_set,
                                           out / "validation_manifest.json"),
    }
    (out / "corpus_digest.json").write_text(json.dumps(digests, indent=1, sort_keys=True))
    return digests


def train_model(data_dir: Path, out: Path, preset: Preset, seed: int) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    tr = datagen.read_corpus(data_dir / "train.bin")
    va = datagen.read_corpus(data_dir / "validation.bin")
    tc = replace(preset.train, seed=seed)
    result = train(datagen.as_arrays(tr), datagen.as_arrays(va), tc, preset.arch)
    path = out / "model.bin"
    save_model(result.params, path)
    result.history_csv(out / "loss_history.csv")
    log.info("best validation MSE %.3e at epoch %d", result.history[result.best_epoch - 1][2],
             result.best_epoch)
    return path


# ---- Euler runs and references

@dataclass(frozen=True)
class RunDescriptor:
    ic_id: str
    p: int
    N: int = 128
    T_f: float | None = None
    tvb_M: float | None = None
    cfl: float | None = None
    seed: int = 0

    def resolved(self) -> "RunDescriptor":
        return replace(self, T_f=BENCHMARK_TIMES[self.ic_id] if self.T_f is None else self.T_f,
                       tvb_M=DEFAULT_TVB_M[self.ic_id] if self.tvb_M is None else self.tvb_M)


def run_euler(desc: RunDescriptor) -> EulerFields:
    d = desc.resolved()
    return euler_solve(d.ic_id, d.p, d.N, d.T_f, d.tvb_M, d.cfl)


def save_run(fields: EulerFields, out: Path, stem: str) -> None:
    write_fields(out / f"{stem}.dgf", fields.as_list())
    quad = gauss_legendre(4)
    x = grid_points(fields.mesh, quad)
    rho, u, p = fields.primitive_at(x)
    with open(out / f"{stem}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "rho", "u", "p"])
        for row in zip(x, rho, u, p):
            w.writerow([f"{v:.17g}" for v in row])


def load_run(path: Path, gamma: float = 1.4) -> EulerFields:
    rho, mom, energy = read_fields(path)
    return EulerFields(rho, mom, energy, gamma)


def riemann_reference(ic_id: str, grid_x: np.ndarray, t: float) -> dict[str, np.ndarray]:
    rho, u, p = exact_riemann(*riemann_states(ic_id), grid_x / t)
    return {"rho": rho, "u": u, "p": p}


def shock_position(ic_id: str, t: float) -> float:
    from .solvers import wave_speeds
    ws = wave_speeds(*riemann_states(ic_id))
    return float(ws["right"][1] * t)


def window_containing(windows, x: float, mesh) -> DiscontinuityWindow | None:
    cell = int(np.floor((x - mesh.domain_lo) / mesh.h))
    for w in windows:
        if w.lo <= cell <= w.hi:
            return w
    return None


def ma_grid(field, quad) -> GridData:
    x = grid_points(field.mesh, quad)
    v, ok = siac_values(field, moving_average_kernel(), x)
    return GridData(field.mesh, quad, np.where(ok, v, field.evaluate(x)))


def euler_window_errors(fields: EulerFields, model: ConvFilterParams | None,
                        reference: dict[str, np.ndarray], provenance: dict) -> list[dict]:
    """Per-window errors of unfiltered, moving-average and hybrid primitives."""
    cfg = HybridConfig(fields.degree, model=model)
    quad = cfg.quad
    hyb = hybrid_filter_euler(fields, cfg)
    x = grid_points(fields.mesh, quad)
    raw = dict(zip(VARIABLES, fields.primitive_at(x)))
    ma_cons = [ma_grid(f, quad).values for f in fields.as_list()]
    ma = dict(zip(VARIABLES, to_primitive(*ma_cons, fields.gamma)))
    mesh = fields.mesh
    rows = []
    for w in hyb["rho"].windows:
        for var in VARIABLES:
            ref = GridData(mesh, quad, reference[var])
            approx = {"unfiltered": raw[var], "siac_ma": ma[var], "hybrid": hyb[var].grid.values}
            for method in METHODS:
                l2, linf = grid_errors(GridData(mesh, quad, approx[method]), ref, w)
                rows.append({**provenance, "window_lo": w.lo, "window_hi": w.hi,
                             "j_dagger": w.j_dagger, "variable": var, "method": method,
                             "l2": l2, "linf": linf})
    return rows


# ---- evaluation

def tophat_errors(model: ConvFilterParams | None, n_windows: int, seed: int,
                  max_samples: int = 400) -> list[dict]:
    """Held-out top-hat windows: errors of the unfiltered and hybrid approximations over
    each detected window containing an exact jump."""
    rows: list[dict] = []
    quad = gauss_legendre(4)
    i = 0
    for params in datagen.draw_params(max_samples, seed=seed):
        if len(rows) >= 2 * n_windows:
            break
        prob = params.problem()
        uh, exact = advect_solve(prob, params.p, datagen.N_TRAIN_ELEMENTS)
        cfg = HybridConfig(params.p, model=model, periodic=True, quad=quad)
        hyb = hybrid_filter_field(uh, cfg)
        x = grid_points(uh.mesh, quad)
        ref = GridData(uh.mesh, quad, exact(x))
        raw = GridData(uh.mesh, quad, uh.evaluate(x))
        jumps = np.floor((prob.jump_locations() - uh.mesh.domain_lo) / uh.mesh.h).astype(int)
        for w in hyb.windows:
            if len(rows) >= 2 * n_windows:
                break
            if not np.any(np.isin(jumps, w.elements(uh.mesh.n_elements))):
                continue
            for method, grid in (("unfiltered", raw), ("hybrid", hyb.grid)):
                l2, linf = grid_errors(grid, ref, w)
                rows.append({"sample": params.index, "p": params.p, "a": params.a,
                             "window": i, "method": method, "l2": l2, "linf": linf})
            i += 1
    return rows


def summarize(rows: list[dict], keys: tuple[str, ...]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in keys), []).append(r)
    out = []
    for key in sorted(groups, key=lambda k: tuple(str(v) for v in k)):
        g = groups[key]
        for metric in ("l2", "linf"):
            q = quartiles([r[metric] for r in g])
            out.append({**dict(zip(keys, key)), "metric": metric, "count": len(g),
                        "q25": q[0], "median": q[1], "q75": q[2]})
    return out


def write_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        path.write_text("")
        return
    cols = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.10e}" if isinstance(v, float) else v) for k, v in r.items()})


def dataset_runs(preset: Preset, seed: int, problems=("lax", "sod", "shu_osher")):
    rng = np.random.default_rng(seed)
    runs = []
    for ic_id in problems:
        t0, t1 = DATASET_TIMES[ic_id]
        for i in range(preset.dataset_runs[ic_id]):
            runs.append((ic_id, 1 + i % 4, float(rng.uniform(t0, t1))))
    return runs


def euler_references(runs, preset: Preset, quad) -> dict:
    so_times = [t for ic, _, t in runs if ic == "shu_osher"]
    so = reference_shu_osher_series(so_times, preset.reference_cells) if so_times else {}
    x = grid_points(datagen_mesh(preset), quad)
    refs = {}
    for ic_id, p, t in runs:
        if ic_id == "shu_osher":
            refs[(ic_id, t)] = {v: sample_cellwise(so[t][v], x) for v in VARIABLES}
        else:
            refs[(ic_id, t)] = riemann_reference(ic_id, x, t)
    return refs


def datagen_mesh(preset: Preset):
    from .dg import build_mesh
    return build_mesh(DOMAIN[0], DOMAIN[1], preset.n_elements)


def evaluate_euler(model, preset: Preset, seed: int, runs=None) -> list[dict]:
    quad = gauss_legendre(4)
    runs = dataset_runs(preset, seed) if runs is None else runs
    refs = euler_references(runs, preset, quad)
    rows = []
    for ic_id, p, t in runs:
        fields = euler_solve(ic_id, p, preset.n_elements, t_final=t)
        rows += euler_window_errors(fields, model, refs[(ic_id, t)],
                                    {"problem": ic_id, "p": p, "t_final": t})
    return rows


def final_time_rows(model, preset: Preset, problems=("lax", "sod", "shu_osher"),
                    degrees=(1, 2, 3, 4)) -> list[dict]:
    runs = [(ic, p, BENCHMARK_TIMES[ic]) for ic in problems for p in degrees]
    rows = evaluate_euler(model, preset, 0, runs)
    mesh = datagen_mesh(preset)
    for r in rows:
        kind = ""
        if r["problem"] in ("lax", "sod"):
            w = (r["window_lo"], r["window_hi"])
            cell = int(np.floor((shock_position(r["problem"], r["t_final"]) - mesh.domain_lo)
                                / mesh.h))
            kind = "shock" if w[0] <= cell <= w[1] else "other"
        r["discontinuity"] = kind
    return rows


def shock_window_linf(model, ic_id: str, p: int, variable: str,
                      n_elements: int = 128) -> dict[str, float]:
    """Grid l_inf of each method on the window holding the shock at the benchmark time."""
    t = BENCHMARK_TIMES[ic_id]
    fields = euler_solve(ic_id, p, n_elements, t_final=t)
    quad = gauss_legendre(4)
    x = grid_points(fields.mesh, quad)
    rows = euler_window_errors(fields, model, riemann_reference(ic_id, x, t),
                               {"problem": ic_id, "p": p, "t_final": t})
    w = window_containing(
        [DiscontinuityWindow(r["window_lo"], r["window_hi"], 0, r["window_lo"], r["window_hi"])
         for r in rows], shock_position(ic_id, t), fields.mesh)
    if w is None:
        raise RuntimeError(f"no window holds the {ic_id} shock")
    return {r["method"]: r["linf"] for r in rows
            if r["window_lo"] == w.lo and r["variable"] == variable}


def load_optional_model(path) -> ConvFilterParams | None:
    return None if path is None else load_model(path)
