"""RKDG solvers: linear advection, Euler shock tubes, limiting and exact Riemann data."""
from .advection import AdvectionOperator, AdvectionProblem, advect_run, advect_solve
from .euler import (BENCHMARK_TIMES, DEFAULT_TVB_M, LAX, SOD, EulerFields, EulerOperator,
                    characteristic_limit, euler_solve, evolve, initial_primitive,
                    project_initial, reference_shu_osher, reference_shu_osher_series,
                    riemann_states, sample_cellwise, to_conservative, to_primitive)
from .limiter import minmod, moment_limit, moment_limit_coeffs, tvb_detect, tvb_flags
from .riemann import GAMMA, RiemannState, VacuumError, exact_riemann, star_state, wave_speeds
from .timestep import SolverError, cfl_number, ssp_rk3_step, time_grid
