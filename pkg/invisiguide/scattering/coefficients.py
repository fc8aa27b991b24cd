"""
Reflection and transmission coefficients of a computed field.

Two independent extractors are provided. The overlap formula projects the
scattered trace on the piston mode at a station past the chimneys:

    s = sqrt(2k) e^{-ik|x|} (u_s, phi_0)

The flux formula integrates the total field against the conjugate piston
waves over both truncation sections:

    i s(+/-) = int_{sigma_minus U sigma_plus} d_nu u conj(w+/-) - u d_nu conj(w+/-)
"""

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from ..errors import GeometryError
from ..geometry.chimney_layout import WaveguideSpec
from ..geometry.mesher import LOCAL_EDGES, SIGMA_MINUS, SIGMA_PLUS
from ..modal.dtn import edge_quadrature, line_trace, trace_projections
from ..modal.modes import ModalBasis
from ..solver.assembly import AssembledSystem, barycentric_gradients, p2_shapes, p2_shape_derivatives
from ..solver.helmholtz import ComplexField, scattered_field, solve_spec
from .energy import energy_identity_defects, energy_volume_identity

logger = logging.getLogger(__name__)

NAN = float('nan')

CoefficientOracle = Callable[[WaveguideSpec], Tuple[complex, complex]]


@dataclass
class ScatteringResult:
    s_minus: complex
    s_plus: complex
    energy_defect: float = NAN
    optical_defect: float = NAN
    energy_integral_defect: float = NAN
    flux_minus: complex = complex(NAN, NAN)
    flux_plus: complex = complex(NAN, NAN)
    extras: Dict[str, float] = field(default_factory=dict)

    @property
    def reflection(self) -> complex:
        return self.s_minus

    @property
    def transmission(self) -> complex:
        return 1.0 + self.s_plus

    @property
    def extractor_gap(self) -> float:
        return max(abs(self.s_minus - self.flux_minus), abs(self.s_plus - self.flux_plus))


def _check_station(mesh, x_station: float):
    if x_station == 0.0:
        raise GeometryError("station x = 0 has no side", reason="station-not-aligned")
    if mesh.chimneys:
        hull_left = min(c.left for c in mesh.chimneys)
        hull_right = max(c.right for c in mesh.chimneys)
        if hull_left <= x_station <= hull_right or (x_station < 0) != (x_station < hull_left):
            raise GeometryError(f"station x = {x_station:.6g} is not past all chimneys",
                                reason="station-not-aligned")


def extract_by_overlap(scattered: ComplexField, basis: ModalBasis, x_station: float) -> complex:
    """s- for a station left of every chimney, s+ for one on the right."""
    _check_station(scattered.mesh, x_station)
    trace = line_trace(scattered.mesh, x_station)
    piston = trace_projections(basis, trace)[0] @ scattered.values[trace.nodes]
    return complex(math.sqrt(2.0 * basis.k) * np.exp(-1j * basis.k * abs(x_station)) * piston)


def overlap_coefficients(scattered: ComplexField, basis: ModalBasis,
                         stations: Optional[Tuple[float, float]] = None) -> Tuple[complex, complex]:
    """(s-, s+) at two stations, by default the truncation sections."""
    left, right = stations or (scattered.mesh.x_min, scattered.mesh.x_max)
    return extract_by_overlap(scattered, basis, left), extract_by_overlap(scattered, basis, right)


def modal_amplitudes(scattered: ComplexField, basis: ModalBasis, x_station: float) -> np.ndarray:
    """Evanescent amplitudes alpha_n, n = 1..N-1, of the scattered field at a station."""
    _check_station(scattered.mesh, x_station)
    trace = line_trace(scattered.mesh, x_station)
    proj = trace_projections(basis, trace, scattered.values[trace.nodes])[1:]
    rates = np.abs(basis.betas[1:])
    return np.sqrt(2.0 * rates) * np.exp(rates * abs(x_station)) * proj


def extract_by_flux(total: ComplexField, basis: ModalBasis, n_points: int = 6) -> Tuple[complex, complex]:
    """Both coefficients from the flux integrals over the two truncation sections."""
    mesh = total.mesh
    chosen = np.flatnonzero((mesh.edge_tags == SIGMA_MINUS) | (mesh.edge_tags == SIGMA_PLUS))
    owners = mesh.edge_elements[chosen]
    local = mesh.edge_local[chosen]
    s, w = edge_quadrature(n_points)

    first = np.array([LOCAL_EDGES[l][0] for l in local])
    second = np.array([LOCAL_EDGES[l][1] for l in local])
    lam = np.zeros((len(chosen), len(s), 3))
    rows = np.arange(len(chosen))
    lam[rows, :, first] = 1.0 - s[None, :]
    lam[rows, :, second] = s[None, :]

    grad_lam, _ = barycentric_gradients(mesh)
    shapes = p2_shapes(lam)
    grads = np.einsum('eqic,ecd->eqid', p2_shape_derivatives(lam), grad_lam[owners])
    u_local = total.values[mesh.elements[owners]]
    u = np.einsum('eqi,ei->eq', shapes, u_local)
    grad_u = np.einsum('eqid,ei->eqd', grads, u_local)

    pa = mesh.nodes[mesh.elements[owners, first]]
    pb = mesh.nodes[mesh.elements[owners, second]]
    d = pb - pa
    length = np.hypot(d[:, 0], d[:, 1])
    normal = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]
    x = pa[:, None, 0] + np.outer(d[:, 0], s)
    du_dn = np.einsum('eqd,ed->eq', grad_u, normal)

    k = basis.k
    scale = 1.0 / math.sqrt(2.0 * k)
    weights = length[:, None] * w[None, :]
    out = []
    for sign in (-1.0, 1.0):
        conj_w = scale * np.exp(-1j * sign * k * x)
        dconj_w_dn = (-1j * sign * k) * conj_w * normal[:, 0:1]
        integral = np.sum(weights * (du_dn * conj_w - u * dconj_w_dn))
        out.append(complex(integral / 1j))
    return out[0], out[1]


def to_record(result: ScatteringResult, spec: Optional[WaveguideSpec] = None) -> Dict[str, object]:
    """Flat key-value view of a result, with the layout when a spec is given."""
    record: Dict[str, object] = {}
    if spec is not None:
        record['k'] = spec.k
        record['eps'] = spec.chimneys[0].width if spec.chimneys else 0.0
        for m, chimney in enumerate(spec.chimneys, start=1):
            record[f'x_{m}'] = chimney.x_center
            record[f'h_{m}'] = chimney.height
    r, t = result.reflection, result.transmission
    record.update({
        're_s_minus': result.s_minus.real, 'im_s_minus': result.s_minus.imag,
        're_s_plus': result.s_plus.real, 'im_s_plus': result.s_plus.imag,
        're_R': r.real, 'im_R': r.imag, 'abs_R': abs(r),
        're_T': t.real, 'im_T': t.imag, 'abs_T': abs(t),
        're_flux_s_minus': result.flux_minus.real, 'im_flux_s_minus': result.flux_minus.imag,
        're_flux_s_plus': result.flux_plus.real, 'im_flux_s_plus': result.flux_plus.imag,
        'energy_defect': result.energy_defect,
        'optical_defect': result.optical_defect,
        'energy_integral_defect': result.energy_integral_defect,
        'extractor_gap': result.extractor_gap,
    })
    record.update(result.extras)
    return record


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_record(record: Dict[str, object], path: str, header: str = '') -> str:
    """One `key = value` line per entry."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w') as fh:
        for line in header.splitlines():
            fh.write(f"# {line}\n")
        for key, value in record.items():
            fh.write(f"{key} = {format_value(value)}\n")
    return path


def analyze(total: ComplexField, system: AssembledSystem) -> ScatteringResult:
    """Overlap coefficients, flux audit and all energy defects of a solved field."""
    basis = system.basis
    scattered = scattered_field(total)
    s_minus, s_plus = overlap_coefficients(scattered, basis)
    flux_minus, flux_plus = extract_by_flux(total, basis)
    result = ScatteringResult(s_minus, s_plus, flux_minus=flux_minus, flux_plus=flux_plus)
    result.energy_defect, result.optical_defect = energy_identity_defects(result)
    result.energy_integral_defect = energy_volume_identity(scattered, result, system)
    logger.info("|R|=%.3e |T-1|=%.3e energy defect %.2e, extractor gap %.2e",
                abs(s_minus), abs(s_plus), result.energy_defect, result.extractor_gap)
    return result


def fem_coefficients(spec: WaveguideSpec, residual_tol: float = 1e-10,
                     pivot_tol: float = 1e-14) -> ScatteringResult:
    """Mesh, solve and analyze one configuration."""
    total, system = solve_spec(spec, residual_tol, pivot_tol)
    return analyze(total, system)
