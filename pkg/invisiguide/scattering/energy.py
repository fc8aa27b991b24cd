"""
Energy balances of the scattering coefficients.

Unitarity |R|^2 + |T|^2 = 1 and its optical form
Re s+ + (|s+|^2 + |s-|^2) / 2 = 0 follow from the same flux identity; the
volume form ties Im s+ to the indefinite energy of the scattered field,

    Im s+ = int_Omega |grad u_s|^2 - k^2 |u_s|^2,

where the part of Omega beyond x = +/-L is integrated analytically from the
evanescent content of the traces: sum_{n>=1} |beta_n| |(u_s, phi_n)|^2 per end.
"""

import logging
from typing import Tuple

import numpy as np

from ..geometry.mesher import SIGMA_MINUS, SIGMA_PLUS
from ..modal.modes import ModalBasis

logger = logging.getLogger(__name__)


def energy_identity_defects(result) -> Tuple[float, float]:
    """(| |R|^2 + |T|^2 - 1 |, | Re s+ + (|s+|^2 + |s-|^2)/2 |)."""
    s_minus, s_plus = complex(result.s_minus), complex(result.s_plus)
    energy = abs(abs(s_minus) ** 2 + abs(1.0 + s_plus) ** 2 - 1.0)
    optical = abs(s_plus.real + 0.5 * (abs(s_plus) ** 2 + abs(s_minus) ** 2))
    return energy, optical


def tail_energy(scattered, basis: ModalBasis, system) -> float:
    """Energy of the evanescent tails beyond both truncation sections."""
    total = 0.0
    for tag in (SIGMA_MINUS, SIGMA_PLUS):
        block = system.dtn[tag]
        proj = block.overlap[1:basis.n_terms] @ scattered.values[block.trace.nodes]
        total += float(np.sum(np.abs(basis.betas[1:]) * np.abs(proj) ** 2))
    return total


def volume_energy(scattered, system) -> Tuple[float, float, float]:
    """(int |grad u_s|^2, k^2 int |u_s|^2, tail energy) over the truncated domain."""
    u = scattered.values
    grad_sq = float(np.real(np.vdot(u, system.stiffness @ u)))
    mass_sq = float(np.real(np.vdot(u, system.mass @ u)))
    k = system.basis.k
    return grad_sq, k * k * mass_sq, tail_energy(scattered, system.basis, system)


def energy_volume_identity(scattered, result, system) -> float:
    """| int (|grad u_s|^2 - k^2 |u_s|^2) + tails - Im s+ |."""
    grad_sq, mass_sq, tails = volume_energy(scattered, system)
    integral = grad_sq - mass_sq + tails
    defect = abs(integral - complex(result.s_plus).imag)
    logger.debug("volume identity: integral %.6e, Im s+ %.6e, tails %.3e",
                 integral, complex(result.s_plus).imag, tails)
    return defect
