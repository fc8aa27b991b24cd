"""
Scattering package: coefficient extraction and energy identities.
"""

from .energy import energy_identity_defects, energy_volume_identity, volume_energy, tail_energy
from .coefficients import (CoefficientOracle, ScatteringResult, extract_by_overlap, extract_by_flux,
                           overlap_coefficients, modal_amplitudes, analyze, to_record,
                           write_record, format_value, fem_coefficients)
