"""
Solver package: P2 assembly with DtN ends and the direct Helmholtz solve.
"""

from .assembly import (AssembledSystem, DtNBlock, assemble, assemble_volume,
                       barycentric_gradients, incident_forcing, p2_shapes,
                       p2_shape_derivatives, QUAD_BARYCENTRIC, QUAD_WEIGHTS)
from .helmholtz import (ComplexField, solve, scattered_field, solve_spec,
                        field_at_stations, write_field, RESIDUAL_TOL, PIVOT_TOL)
