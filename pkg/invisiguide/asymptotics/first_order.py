"""
First-order model of thin chimneys.

For chimneys of width eps the coefficients behave as s(+/-) = eps s1(+/-) + o(eps)
with

    i s1(+/-) = -k sum_m conj(w+/-(M_m)) w+(M_m) tan(k h_m),

M_m = (x_m, 1) being the foot of chimney m. Inside a chimney the leading
field is the 1D profile v0 solving v'' + k^2 v = 0, v(1) = w+(M_m), v'(1 + h) = 0.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..errors import GeometryError
from ..geometry.chimney_layout import STRIP_HEIGHT, WaveguideSpec, is_near_resonant

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FirstOrderPrediction:
    k: float
    s1_minus: complex
    s1_plus: complex
    a: Tuple[complex, ...]                 # junction constants a_m
    boundary_values: Tuple[complex, ...]   # w+(M_m)

    def predicted(self, eps: float) -> Tuple[complex, complex]:
        """(eps s1-, eps s1+)."""
        return eps * self.s1_minus, eps * self.s1_plus


def _check_height(k: float, h: float):
    if is_near_resonant(k, h):
        raise GeometryError(f"height {h:.12g} is resonant for k = {k:.12g}: tan(kh) is unbounded",
                            reason="resonant-height")


def first_order(spec: WaveguideSpec) -> FirstOrderPrediction:
    k = spec.k
    scale = 1.0 / math.sqrt(2.0 * k)
    tangents, feet = [], []
    for chimney in spec.chimneys:
        _check_height(k, chimney.height)
        tangents.append(math.tan(k * chimney.height))
        feet.append(scale * complex(np.exp(1j * k * chimney.x_center)))

    tangents = np.asarray(tangents, dtype=float)
    feet = np.asarray(feet, dtype=complex)
    # conj(w-(M)) w+(M) = e^{2ikx}/(2k), |w+(M)|^2 = 1/(2k)
    i_s1_minus = -k * np.sum(feet * feet * tangents)
    i_s1_plus = -k * np.sum(np.abs(feet) ** 2 * tangents)
    a = -k * tangents * feet / math.pi

    return FirstOrderPrediction(
        k=k,
        s1_minus=complex(i_s1_minus / 1j),
        s1_plus=complex(0.0, -float(np.real(i_s1_plus))),
        a=tuple(complex(v) for v in a),
        boundary_values=tuple(complex(v) for v in feet),
    )


def chimney_profile(k: float, h: float, boundary_value: complex, y):
    """v0(y) = v(1) (cos k(y-1) + tan(kh) sin k(y-1)) on 1 <= y <= 1 + h."""
    _check_height(k, h)
    t = k * (np.asarray(y, dtype=float) - STRIP_HEIGHT)
    return boundary_value * (np.cos(t) + math.tan(k * h) * np.sin(t))


def chimney_profile_derivative(k: float, h: float, boundary_value: complex, y):
    _check_height(k, h)
    t = k * (np.asarray(y, dtype=float) - STRIP_HEIGHT)
    return boundary_value * k * (-np.sin(t) + math.tan(k * h) * np.cos(t))
