"""
Detection of invalid waveguide layouts.
"""

import math
from dataclasses import dataclass
from typing import List, Union

from .chimney_layout import (WaveguideSpec, Chimney, RESONANCE_BAND,
                             resonance_distance)


@dataclass
class SpecDiagnostic:
    code: str
    message: str
    severity: str  # 'error', 'warning', 'info'
    suggestion: str = ''
    chimney: int = -1


class SpecValidator:
    def __init__(self, resonance_band: float = RESONANCE_BAND):
        self.errors: List[SpecDiagnostic] = []
        self.resonance_band = resonance_band

    def detect_errors(self, spec: WaveguideSpec) -> List[SpecDiagnostic]:
        """Detect every invariant violation of the spec."""
        self.errors.clear()

        self._check_wavenumber(spec)
        self._check_numerics(spec)

        for index, chimney in enumerate(spec.chimneys):
            self._check_chimney(spec, index, chimney)

        self._check_overlaps(spec)
        self._check_widths(spec)

        return self.errors

    def has_errors(self) -> bool:
        return any(d.severity == 'error' for d in self.errors)

    def _check_wavenumber(self, spec: WaveguideSpec):
        """Only the piston mode may propagate: 0 < k < pi."""
        if not (0.0 < spec.k < math.pi):
            self.errors.append(SpecDiagnostic(
                code="wavenumber-range",
                message=f"k = {spec.k!r} is outside (0, pi)",
                severity="error",
                suggestion="Choose a wavenumber strictly between 0 and pi"
            ))

    def _check_numerics(self, spec: WaveguideSpec):
        if spec.trunc_half_length <= 0:
            self.errors.append(SpecDiagnostic(
                code="truncation",
                message=f"truncation half-length L = {spec.trunc_half_length!r} must be positive",
                severity="error",
                suggestion="Set trunc_half_length > 0"
            ))
        if spec.dtn_terms < 1:
            self.errors.append(SpecDiagnostic(
                code="dtn-terms",
                message=f"dtn_terms = {spec.dtn_terms!r} must be at least 1",
                severity="error",
                suggestion="Use the default of 20 modal terms"
            ))
        if spec.mesh_target_h <= 0:
            self.errors.append(SpecDiagnostic(
                code="mesh-size",
                message=f"mesh_target_h = {spec.mesh_target_h!r} must be positive",
                severity="error",
                suggestion="Set a positive element size"
            ))
        if spec.min_cells_across_chimney < 2:
            self.errors.append(SpecDiagnostic(
                code="chimney-cells",
                message="min_cells_across_chimney must be at least 2",
                severity="error",
                suggestion="Resolve each chimney with two or more elements"
            ))

    def _check_chimney(self, spec: WaveguideSpec, index: int, chimney: Chimney):
        """Check size, resonance and clearance of one chimney."""
        if chimney.height <= 0 or chimney.width <= 0:
            self.errors.append(SpecDiagnostic(
                code="chimney-size",
                message=f"chimney {index} has non-positive height or width",
                severity="error",
                suggestion="Heights and widths must be positive",
                chimney=index
            ))
            return

        if 0.0 < spec.k:
            distance = resonance_distance(spec.k, chimney.height)
            band = self.resonance_band * math.pi / (2.0 * spec.k)
            if distance < band:
                self.errors.append(SpecDiagnostic(
                    code="resonant-height",
                    message=(f"chimney {index}: height {chimney.height:.12g} is within "
                             f"{distance:.3g} of a resonant height (2p+1)pi/(2k)"),
                    severity="error",
                    suggestion=f"Move the height at least {band:.3g} away from the resonance",
                    chimney=index
                ))

            limit = spec.trunc_half_length - spec.margin
            if not (-limit < chimney.left and chimney.right < limit):
                self.errors.append(SpecDiagnostic(
                    code="boundary-margin",
                    message=(f"chimney {index}: footprint ({chimney.left:.6g}, {chimney.right:.6g}) "
                             f"is closer than one wavelength ({spec.margin:.6g}) to x = ±L"),
                    severity="error",
                    suggestion=f"Increase trunc_half_length above {max(abs(chimney.left), abs(chimney.right)) + spec.margin:.6g}",
                    chimney=index
                ))

    def _check_overlaps(self, spec: WaveguideSpec):
        """Chimney footprints must be pairwise disjoint."""
        ordered = sorted(enumerate(spec.chimneys), key=lambda item: item[1].x_center)
        for (i, first), (j, second) in zip(ordered, ordered[1:]):
            if first.right >= second.left:
                self.errors.append(SpecDiagnostic(
                    code="overlapping-footprints",
                    message=(f"chimneys {i} and {j} overlap: "
                             f"{first.right:.6g} >= {second.left:.6g}"),
                    severity="error",
                    suggestion="Separate the chimney centres by more than one width",
                    chimney=j
                ))

    def _check_widths(self, spec: WaveguideSpec):
        widths = {c.width for c in spec.chimneys}
        if len(widths) > 1:
            self.errors.append(SpecDiagnostic(
                code="mixed-widths",
                message=f"chimneys use {len(widths)} different widths",
                severity="warning",
                suggestion="The asymptotic model assumes a common width eps"
            ))


def validate_spec(spec: WaveguideSpec) -> Union[WaveguideSpec, List[SpecDiagnostic]]:
    """Return the spec unchanged when valid, else the list of diagnostics."""
    validator = SpecValidator()
    diagnostics = validator.detect_errors(spec)
    if validator.has_errors():
        return diagnostics
    return spec
