"""
Finite-difference oracle used to cross-validate the finite-element solver.
"""

from .fd_solver import (FDGrid, build_grid, fd_field, fd_solve, plane_wave_residual,
                        richardson, compare_with_fem, MIN_CELLS_ACROSS)
