"""
Fixed-point tuning of three chimney heights towards R = 0 and T = 1.

Heights are written h_m = pi/k + tau_m with t_m = tan(k tau_m). Since the
first-order coefficients are linear in t,

    (Re i s-, Im i s-, Re i s+) = -(eps / 2) M t + remainder,

with M rows (cos 2k x_m), (sin 2k x_m), (1, 1, 1), the iteration

    t <- t + (2 / eps) M^{-1} (Re i s-, Im i s-, Re i s+)

removes the measured defect at each step. Imaginary parts of i s+ need no
control: once s- = 0 and Re s+ = 0 the energy balance leaves s+ in {0, -2}.
"""

import csv
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..asymptotics.first_order import first_order
from ..errors import ConfigError, ConvergenceError
from ..geometry.chimney_layout import WaveguideSpec, is_near_resonant, three_chimney_spec
from ..scattering.coefficients import CoefficientOracle, fem_coefficients

logger = logging.getLogger(__name__)

DET_TOL = 1e-6
BRANCH_BAND = (0.999, 1.001)


def default_positions(k: float) -> Tuple[float, float, float]:
    """(-3pi/(4k), 0, 3pi/(4k))."""
    x = 3.0 * math.pi / (4.0 * k)
    return (-x, 0.0, x)


def build_matrix(k: float, positions: Sequence[float]) -> np.ndarray:
    positions = np.asarray(positions, dtype=float)
    if positions.shape != (3,):
        raise ConfigError(f"the design uses exactly three chimneys, got {positions.size}")
    matrix = np.vstack([np.cos(2.0 * k * positions), np.sin(2.0 * k * positions), np.ones(3)])
    det = float(np.linalg.det(matrix))
    if abs(det) <= DET_TOL:
        raise ConfigError(f"degenerate placement: |det M| = {abs(det):.3e}",
                          reason="degenerate-placement")
    return matrix


def equispaced_determinant(k: float, eta: float) -> float:
    """det M for x_3 - x_2 = x_2 - x_1 = eta."""
    return 2.0 * math.sin(2.0 * k * eta) * (1.0 - math.cos(2.0 * k * eta))


@dataclass
class DesignConfig:
    k: float
    eps: float
    positions: Optional[Tuple[float, float, float]] = None
    stop_tol: float = 1e-9
    max_iter: int = 50
    relaxation: float = 1.0
    t_initial: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    require_convergence: bool = True
    spec_options: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if not (math.isfinite(self.k) and self.k > 0.0):
            raise ConfigError(f"k must be a positive number, got {self.k!r}")
        if self.positions is None:
            self.positions = default_positions(self.k)
        self.positions = tuple(float(x) for x in self.positions)
        self.t_initial = tuple(float(t) for t in self.t_initial)

    @property
    def tau_bounds(self) -> Tuple[float, float]:
        half = math.pi / (2.0 * self.k)
        return (-half, half)

    def validate(self) -> np.ndarray:
        """Check the numeric options and return the placement matrix."""
        if self.eps <= 0:
            raise ConfigError(f"eps must be positive, got {self.eps!r}")
        if not 0.0 < self.relaxation <= 1.0:
            raise ConfigError(f"relaxation must lie in (0, 1], got {self.relaxation!r}")
        if self.stop_tol <= 0 or self.max_iter < 1:
            raise ConfigError("stop_tol must be positive and max_iter at least 1")
        if len(self.t_initial) != 3:
            raise ConfigError("t_initial needs three entries")
        return build_matrix(self.k, self.positions)

    def heights_for(self, t: Sequence[float]) -> np.ndarray:
        return math.pi / self.k + np.arctan(np.asarray(t, dtype=float)) / self.k

    def spec_for(self, heights: Sequence[float]) -> WaveguideSpec:
        return three_chimney_spec(self.k, self.eps, self.positions, list(heights), **self.spec_options)


@dataclass
class IterationRecord:
    iteration: int
    t: Tuple[float, float, float]
    heights: Tuple[float, float, float]
    s_minus: complex
    s_plus: complex
    step_norm: float

    @property
    def ln_abs_s_minus(self) -> float:
        return math.log(abs(self.s_minus)) if self.s_minus != 0 else float('-inf')

    @property
    def ln_abs_s_plus(self) -> float:
        return math.log(abs(self.s_plus)) if self.s_plus != 0 else float('-inf')


@dataclass
class DesignState:
    iteration: int
    t_vec: np.ndarray
    tau_vec: np.ndarray
    heights: np.ndarray
    history: List[IterationRecord] = field(default_factory=list)
    converged: bool = False
    branch_ok: Optional[bool] = None
    final_s_minus: Optional[complex] = None
    final_s_plus: Optional[complex] = None

    @property
    def s_minus(self) -> Optional[complex]:
        """s- at the current heights once measured, else at the last iterate."""
        if self.final_s_minus is not None:
            return self.final_s_minus
        return self.history[-1].s_minus if self.history else None

    @property
    def s_plus(self) -> Optional[complex]:
        if self.final_s_plus is not None:
            return self.final_s_plus
        return self.history[-1].s_plus if self.history else None

    @property
    def last_step(self) -> float:
        return self.history[-1].step_norm if self.history else float('inf')


def initial_state(config: DesignConfig) -> DesignState:
    t = np.asarray(config.t_initial, dtype=float)
    tau = np.arctan(t) / config.k
    return DesignState(iteration=0, t_vec=t, tau_vec=tau, heights=config.heights_for(t))


def fixed_point_step(state: DesignState, config: DesignConfig, oracle: CoefficientOracle,
                     matrix: np.ndarray = None) -> DesignState:
    """Measure s(+/-) at the current heights and apply one update of t."""
    if matrix is None:
        matrix = build_matrix(config.k, config.positions)

    s_minus, s_plus = oracle(config.spec_for(state.heights))
    s_minus, s_plus = complex(s_minus), complex(s_plus)
    if not (np.isfinite(s_minus) and np.isfinite(s_plus)):
        raise ConvergenceError("fixed point diverged: non-finite coefficients",
                               reason="divergence", state=state)

    defect = np.array([(1j * s_minus).real, (1j * s_minus).imag, (1j * s_plus).real])
    delta = config.relaxation * (2.0 / config.eps) * np.linalg.solve(matrix, defect)
    t_new = state.t_vec + delta
    if not np.all(np.isfinite(t_new)):
        raise ConvergenceError("fixed point diverged: tau left the admissible box",
                               reason="divergence", state=state)

    tau_new = np.arctan(t_new) / config.k
    low, high = config.tau_bounds
    heights = config.heights_for(t_new)
    if np.any(tau_new <= low) or np.any(tau_new >= high) or \
            any(is_near_resonant(config.k, h) for h in heights):
        raise ConvergenceError(f"fixed point diverged: near-resonant height in {np.round(heights, 6)}",
                               reason="divergence", state=state)

    record = IterationRecord(
        iteration=state.iteration,
        t=tuple(float(v) for v in state.t_vec),
        heights=tuple(float(v) for v in state.heights),
        s_minus=s_minus,
        s_plus=s_plus,
        step_norm=float(np.sum(np.abs(t_new - state.t_vec))),
    )
    logger.info("iteration %d: |s-|=%.3e |s+|=%.3e step=%.3e",
                record.iteration, abs(s_minus), abs(s_plus), record.step_norm)
    return DesignState(iteration=state.iteration + 1, t_vec=t_new, tau_vec=tau_new,
                       heights=heights, history=state.history + [record])


def measure_final(state: DesignState, config: DesignConfig, oracle: CoefficientOracle) -> DesignState:
    """Coefficients at the heights the last update produced."""
    s_minus, s_plus = oracle(config.spec_for(state.heights))
    s_minus, s_plus = complex(s_minus), complex(s_plus)
    if not (np.isfinite(s_minus) and np.isfinite(s_plus)):
        raise ConvergenceError("fixed point diverged: non-finite coefficients at the final heights",
                               reason="divergence", state=state)
    state.final_s_minus, state.final_s_plus = s_minus, s_plus
    logger.info("final heights: |s-|=%.3e |s+|=%.3e", abs(s_minus), abs(s_plus))
    return state


def branch_check(s_plus: complex) -> bool:
    """T = 1 + s+ must sit near 1, not near -1."""
    low, high = BRANCH_BAND
    transmission = 1.0 + complex(s_plus)
    return low <= abs(transmission) <= high and transmission.real > 0.0


def run_design(config: DesignConfig, oracle: CoefficientOracle = None) -> DesignState:
    """Iterate until sum |t_{j+1} - t_j| <= stop_tol or max_iter is reached."""
    matrix = config.validate()
    oracle = oracle or fem_oracle()
    state = initial_state(config)

    while state.iteration < config.max_iter:
        state = fixed_point_step(state, config, oracle, matrix)
        if state.last_step <= config.stop_tol:
            state.converged = True
            break

    if not state.converged:
        message = (f"design did not reach step {config.stop_tol:.1e} in {config.max_iter} "
                   f"iterations (last step {state.last_step:.3e})")
        if config.require_convergence:
            raise ConvergenceError(message, reason="max-iter", state=state)
        logger.warning(message)
        return state

    measure_final(state, config, oracle)
    state.branch_ok = branch_check(state.s_plus)
    if not state.branch_ok:
        raise ConvergenceError(f"converged on the wrong branch: T = {1 + state.s_plus:.6f}",
                               reason="wrong-branch", state=state)
    logger.info("design converged in %d iterations: heights %s", state.iteration,
                ", ".join(f"{h:.10g}" for h in state.heights))
    return state


def fem_oracle(residual_tol: float = 1e-10, pivot_tol: float = 1e-14) -> CoefficientOracle:
    """Coefficients from the finite-element solve (overlap extraction)."""
    def oracle(spec: WaveguideSpec) -> Tuple[complex, complex]:
        result = fem_coefficients(spec, residual_tol, pivot_tol)
        return result.s_minus, result.s_plus
    return oracle


def first_order_oracle() -> CoefficientOracle:
    """Linear surrogate s(+/-) = eps s1(+/-)."""
    def oracle(spec: WaveguideSpec) -> Tuple[complex, complex]:
        eps = spec.chimneys[0].width
        return first_order(spec).predicted(eps)
    return oracle


def design_sweep(base: DesignConfig, eps_values: Sequence[float], oracle: CoefficientOracle = None,
                 threads: int = 1, max_iter: int = None) -> List[DesignState]:
    """Independent designs over eps, returned in input order."""
    configs = [replace(base, eps=float(eps), max_iter=max_iter or base.max_iter)
               for eps in eps_values]

    def run(config: DesignConfig) -> DesignState:
        return run_design(config, oracle)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, configs))
    return [run(config) for config in configs]


CONVERGENCE_COLUMNS = ("iter", "t1", "t2", "t3", "h1", "h2", "h3", "Re_s_minus", "Im_s_minus",
                       "Re_s_plus", "Im_s_plus", "ln_abs_s_minus", "ln_abs_s_plus", "step_norm")


def write_convergence_csv(state: DesignState, path: str, header: str = '') -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', newline='') as fh:
        for line in header.splitlines():
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(CONVERGENCE_COLUMNS)
        for rec in state.history:
            values = (*rec.t, *rec.heights, rec.s_minus.real, rec.s_minus.imag,
                      rec.s_plus.real, rec.s_plus.imag, rec.ln_abs_s_minus, rec.ln_abs_s_plus,
                      rec.step_norm)
            writer.writerow([rec.iteration] + [f"{v:.17g}" for v in values])
    return path


def final_spec_document(config: DesignConfig, state: DesignState) -> Dict[str, object]:
    """JSON-ready description of the designed waveguide."""
    spec = config.spec_for(state.heights)
    return {
        'k': spec.k,
        'eps': config.eps,
        'converged': state.converged,
        'iterations': state.iteration,
        't': [float(t) for t in state.t_vec],
        'tau': [float(t) for t in state.tau_vec],
        'chimneys': [{'x_center': c.x_center, 'height': c.height, 'width': c.width}
                     for c in spec.chimneys],
        'trunc_half_length': spec.trunc_half_length,
        'dtn_terms': spec.dtn_terms,
        'mesh_target_h': spec.mesh_target_h,
    }


def write_final_spec(config: DesignConfig, state: DesignState, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w') as fh:
        json.dump(final_spec_document(config, state), fh, indent=2)
        fh.write("\n")
    return path
