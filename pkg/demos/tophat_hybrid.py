"""
Hybrid filtering of an advected top-hat
=======================================

Without care, a global SIAC filter smears the two jumps of a top-hat and
leaves ripples around them. The hybrid filter detects the jumps, keeps a
moving average inside each window and, given a trained model, replaces the
cell holding the jump with the learned prediction.

Pass a model file written by ``hybridfilter train`` as the first argument;
without one the learned stage is skipped.
"""
import sys

import numpy as np

from hybridfilter.dg import gauss_legendre, grid_points
from hybridfilter.hybrid import LABELS, HybridConfig, hybrid_filter_field
from hybridfilter.nn_filter import load_model
from hybridfilter.siac import global_kernel, siac_filter
from hybridfilter.solvers import AdvectionProblem, advect_solve

model = load_model(sys.argv[1]) if len(sys.argv) > 1 else None
p = 2
prob = AdvectionProblem(wave_speed=2.0, bias=0.3, jump=0.6, t_final=6.0)
uh, exact = advect_solve(prob, p, 128)

quad = gauss_legendre(4)
x = grid_points(uh.mesh, quad)
ref = exact(x)
glob = siac_filter(uh, global_kernel(p), quad=quad, periodic=True)
hyb = hybrid_filter_field(uh, HybridConfig(p, model=model, periodic=True, quad=quad))

for w in hyb.windows:
    print(f"window cells {w.lo}..{w.hi}, discontinuity cell {w.j_dagger}")

for name, vals in (("unfiltered", uh.evaluate(x)), ("global SIAC", glob.values),
                   ("hybrid", hyb.grid.values)):
    err = np.abs(vals - ref)
    print(f"{name:12s} max error {err.max():.3f}  rms {np.sqrt(np.mean(err ** 2)):.4f}")

counts = np.bincount(hyb.labels, minlength=len(LABELS))
print("points per stage:", dict(zip(LABELS, counts.tolist())))
