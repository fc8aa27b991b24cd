"""
Modal package: strip modes, axial wavenumbers and truncated DtN operators.
"""

from .modes import (ModalBasis, transverse_mode, axial_wavenumber, branch_sqrt,
                    CUTOFF_TOL)
from .dtn import (EndTrace, end_trace, line_trace, edge_quadrature, trace_projections,
                  trace_mass_matrix, trace_integrals, dtn_matrix, dtn_apply)
