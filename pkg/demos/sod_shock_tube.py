"""
Sod shock tube: unfiltered DG versus hybrid filtering
=====================================================

Runs the limited RKDG Euler solver to t=2, filters the conservative
variables and compares primitive variables against the exact Riemann
solution over the window holding the shock.
"""
import sys

from hybridfilter.experiments import PAPER_VALUES, shock_window_linf
from hybridfilter.nn_filter import load_model
from hybridfilter.solvers import SOD, star_state

p_star, u_star = star_state(*SOD)
print(f"star state: p* = {p_star:.5f}, u* = {u_star:.5f}")

model = load_model(sys.argv[1]) if len(sys.argv) > 1 else None
errs = shock_window_linf(model, "sod", 2, "u")
for method, v in errs.items():
    print(f"velocity l_inf over the shock window, {method:10s}: {v:.3e}")
print("reported at full scale:", PAPER_VALUES[("sod", "u", "shock_p2_linf")])
