"""
Geometry package: waveguide layouts, their validation and the structured mesher.
"""

from .chimney_layout import (Chimney, WaveguideSpec, STRIP_HEIGHT, RESONANCE_BAND,
                             three_chimney_spec, reflect_spec, resonant_heights,
                             resonance_distance, is_near_resonant, random_spec)
from .validation import SpecDiagnostic, SpecValidator, validate_spec
from .mesher import (Mesh, build_mesh, generate_mesh, estimate_nodes, write_mesh,
                     WALL, SIGMA_MINUS, SIGMA_PLUS, TAG_NAMES, LOCAL_EDGES)
