"""
Empirical scaling of the coefficient remainder with the chimney width.

With every height at pi/k the first-order terms vanish, so the computed
coefficients are pure remainder. Fitting log|s| against log(eps) measures
the exponent of that remainder.
"""

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from ..geometry.chimney_layout import three_chimney_spec
from ..scattering.coefficients import CoefficientOracle

logger = logging.getLogger(__name__)


@dataclass
class RemainderProbe:
    eps: List[float] = field(default_factory=list)
    s_minus: List[complex] = field(default_factory=list)
    s_plus: List[complex] = field(default_factory=list)
    slope_minus: float = float('nan')
    slope_plus: float = float('nan')
    slope: float = float('nan')


def fit_exponent(eps: Sequence[float], values: Sequence[float], last: int = 4) -> float:
    """Least-squares slope of log(values) against log(eps) over the smallest `last` eps."""
    order = np.argsort(eps)[::-1]
    eps = np.asarray(eps, dtype=float)[order][-last:]
    values = np.asarray(values, dtype=float)[order][-last:]
    keep = values > 0
    if keep.sum() < 2:
        return float('nan')
    slope, _ = np.polyfit(np.log(eps[keep]), np.log(values[keep]), 1)
    return float(slope)


def residual_scaling_probe(k: float, positions: Sequence[float], eps_values: Sequence[float],
                           oracle: CoefficientOracle, heights: Sequence[float] = None,
                           fit_points: int = 4, threads: int = 1, **spec_options) -> RemainderProbe:
    """Solve the family over eps and fit the remainder exponent."""
    if heights is None:
        heights = [math.pi / k] * len(positions)
    specs = [three_chimney_spec(k, eps, positions, heights, **spec_options) for eps in eps_values]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            coefficients = list(pool.map(oracle, specs))
    else:
        coefficients = [oracle(spec) for spec in specs]

    probe = RemainderProbe(eps=[float(e) for e in eps_values])
    for eps, (s_minus, s_plus) in zip(eps_values, coefficients):
        probe.s_minus.append(complex(s_minus))
        probe.s_plus.append(complex(s_plus))
        logger.info("eps=%.4g |s-|=%.3e |s+|=%.3e", eps, abs(s_minus), abs(s_plus))

    probe.slope_minus = fit_exponent(probe.eps, [abs(s) for s in probe.s_minus], fit_points)
    probe.slope_plus = fit_exponent(probe.eps, [abs(s) for s in probe.s_plus], fit_points)
    probe.slope = fit_exponent(probe.eps, [math.hypot(abs(a), abs(b))
                                           for a, b in zip(probe.s_minus, probe.s_plus)], fit_points)
    logger.info("remainder exponent %.3f (s-: %.3f, s+: %.3f)",
                probe.slope, probe.slope_minus, probe.slope_plus)
    return probe

REMAINDER_COLUMNS = ("eps", "re_s_minus", "im_s_minus", "re_s_plus", "im_s_plus", "abs_s_minus",
                     "abs_s_plus")


def write_remainder_csv(probe: RemainderProbe, path: str, header: str = '') -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', newline='') as fh:
        for line in header.splitlines():
            fh.write(f"# {line}\n")
        fh.write(f"# slope = {probe.slope:.17g}, slope_minus = {probe.slope_minus:.17g}, "
                 f"slope_plus = {probe.slope_plus:.17g}\n")
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(REMAINDER_COLUMNS)
        for eps, sm, spl in zip(probe.eps, probe.s_minus, probe.s_plus):
            writer.writerow([f"{v:.17g}" for v in
                             (eps, sm.real, sm.imag, spl.real, spl.imag, abs(sm), abs(spl))])
    return path
