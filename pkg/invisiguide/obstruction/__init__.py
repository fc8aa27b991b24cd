"""
Obstruction package: the constrained Neumann eigenvalue and the k_star bound.
"""

from .eigenproblem import (ConstrainedEigenproblem, ObstructionResult, LAMBDA_1,
                           assemble_constrained_eigenproblem, smallest_eigenvalue,
                           k_star_bound, minmax_upper_bound, default_truncation,
                           obstruction_bound, obstruction_for_spec, truncation_sweep,
                           obstruction_record)
