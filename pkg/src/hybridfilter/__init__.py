"""Hybrid SIAC / data-driven filtering of discontinuous Galerkin solutions near discontinuities."""
from .detect import DiscontinuityWindow, detect_windows, group_windows, multiwavelet_detect
from .dg import DGField, GridData, Mesh, build_mesh, eval_grid, gauss_legendre, project
from .hybrid import FilteredSolution, HybridConfig, hybrid_filter_euler, hybrid_filter_field
from .metrics import grid_errors, quartiles
from .nn_filter import (ArchitectureConfig, ConvFilterParams, TrainConfig, forward, load_model,
                        save_model, train)
from .siac import SIACKernel, global_kernel, moving_average_kernel, siac_filter, solve_coefficients

__version__ = "0.1.0"
