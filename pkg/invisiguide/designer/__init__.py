"""
Designer package: the fixed-point loop on chimney heights.
"""

from .fixed_point import (DesignConfig, DesignState, IterationRecord, build_matrix,
                          equispaced_determinant, default_positions, initial_state,
                          fixed_point_step, measure_final, run_design, branch_check, fem_oracle,
                          first_order_oracle, design_sweep, write_convergence_csv,
                          final_spec_document, write_final_spec, CONVERGENCE_COLUMNS)
