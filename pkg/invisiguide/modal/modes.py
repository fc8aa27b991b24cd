"""
Transverse modes of the unit strip and their axial wavenumbers.
"""

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError

CUTOFF_TOL = 1e-12


def transverse_mode(n: int, y):
    """phi_0 = 1, phi_n = sqrt(2) cos(n pi y); orthonormal on (0, 1)."""
    if n < 0:
        raise ValueError(f"mode index must be non-negative, got {n}")
    y = np.asarray(y, dtype=float)
    if n == 0:
        out = np.ones_like(y)
    else:
        out = math.sqrt(2.0) * np.cos(n * math.pi * y)
    return out if out.ndim else float(out)


def branch_sqrt(xi: complex) -> complex:
    """sqrt with the cut on the positive real axis: xi = r e^{ig}, g in [0, 2pi)."""
    xi = complex(xi)
    r = abs(xi)
    gamma = cmath.phase(xi) % (2.0 * math.pi)
    return math.sqrt(r) * cmath.exp(0.5j * gamma)


def axial_wavenumber(k: float, n: int) -> complex:
    """beta_n = sqrt(k^2 - (n pi)^2) with Im beta_n >= 0."""
    if k <= 0:
        raise ConfigError(f"wavenumber must be positive, got {k!r}")
    xi = k * k - (n * math.pi) ** 2
    if abs(xi) < CUTOFF_TOL * math.pi ** 2:
        raise ConfigError(f"k = {k!r} is the cut-off frequency of mode {n}",
                          reason="cut-off-frequency")
    if n == 0:
        return complex(k)
    return branch_sqrt(xi)


@dataclass(frozen=True)
class ModalBasis:
    k: float
    n_terms: int = 20
    lambdas: np.ndarray = field(init=False, repr=False, compare=False)
    betas: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_terms < 1:
            raise ConfigError(f"at least one modal term is required, got {self.n_terms}")
        n = np.arange(self.n_terms)
        object.__setattr__(self, 'lambdas', (n * math.pi) ** 2)
        object.__setattr__(self, 'betas',
                           np.array([axial_wavenumber(self.k, int(m)) for m in n]))

    def modes(self, y) -> np.ndarray:
        """(n_terms, len(y)) table of phi_n(y)."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        table = np.sqrt(2.0) * np.cos(np.outer(np.arange(self.n_terms) * math.pi, y))
        table[0] = 1.0
        return table

    def mode_amplitude(self, n: int) -> float:
        """(2 |beta_n|)^{-1/2}, the flux normalisation of w_n."""
        return 1.0 / math.sqrt(2.0 * abs(self.betas[n]))

    def incident_wave(self, x):
        """w+ = (2k)^{-1/2} e^{ikx}."""
        return np.exp(1j * self.k * np.asarray(x, dtype=float)) / math.sqrt(2.0 * self.k)

    def w_minus(self, x):
        """w- = (2k)^{-1/2} e^{-ikx}."""
        return np.exp(-1j * self.k * np.asarray(x, dtype=float)) / math.sqrt(2.0 * self.k)

    def evanescent_wave(self, n: int, x, y, sign: int = 1):
        """w_n^{+/-} = (2|beta_n|)^{-1/2} e^{-/+ |beta_n| x} phi_n(y) for n >= 1."""
        rate = abs(self.betas[n])
        return (self.mode_amplitude(n) * np.exp(-sign * rate * np.asarray(x, dtype=float))
                * transverse_mode(n, y))
