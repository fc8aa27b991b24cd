"""
Lower bound on wavenumbers for which T = 1 is impossible.

On the bounded part Omega_b = {-x_minus < x < x_plus} of the waveguide, let
mu_1 be the smallest eigenvalue of the Neumann Laplacian restricted to
functions with zero mean on both end sections. Perfect transmission forces
k^2 > mu_1, so no geometry achieves T = 1 for 0 < k <= min(sqrt(mu_1), pi).

The two mean-zero constraints are imposed with Lagrange multipliers:

    [ K - sigma M   C ] [zeta  ]   [M x]
    [ C^T           0 ] [lambda] = [ 0 ]

and the saddle matrix is factorized once for a block inverse iteration
with Rayleigh-Ritz on the constrained iterates.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh, lstsq
from scipy.sparse.linalg import splu

from ..errors import SolverError
from ..geometry.chimney_layout import Chimney, WaveguideSpec
from ..geometry.mesher import Mesh, SIGMA_MINUS, SIGMA_PLUS, build_mesh
from ..modal.dtn import end_trace, trace_integrals
from ..solver.assembly import assemble_volume

logger = logging.getLogger(__name__)

LAMBDA_1 = math.pi ** 2


@dataclass(eq=False)
class ConstrainedEigenproblem:
    mesh: Mesh
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    constraints: np.ndarray   # (n_nodes, 2) end-section integrals

    def saddle_matrix(self, shift: float = 0.0) -> sp.csc_matrix:
        c = sp.csr_matrix(self.constraints)
        return sp.bmat([[self.stiffness - shift * self.mass, c], [c.T, None]], format='csc')

    def rayleigh_quotient(self, zeta: np.ndarray) -> float:
        return float(zeta @ (self.stiffness @ zeta)) / float(zeta @ (self.mass @ zeta))

    def residual(self, mu: float, zeta: np.ndarray) -> float:
        """|| K z - mu M z - C lambda || / (mu || M z ||) with the best multipliers."""
        mz = self.mass @ zeta
        r = self.stiffness @ zeta - mu * mz
        multipliers = lstsq(self.constraints, r)[0]
        r = r - self.constraints @ multipliers
        return float(np.linalg.norm(r) / (abs(mu) * np.linalg.norm(mz)))


@dataclass
class ObstructionResult:
    mu1: float
    eigenvector: np.ndarray = field(repr=False)
    minmax_upper: float
    x_minus: float
    x_plus: float
    residual: float
    iterations: int
    h_used: float
    n_nodes: int
    end_means: Tuple[float, float] = (0.0, 0.0)
    lambda1: float = LAMBDA_1

    @property
    def k_star_bound(self) -> float:
        return k_star_bound(self)


def assemble_constrained_eigenproblem(mesh: Mesh) -> ConstrainedEigenproblem:
    """Stiffness, mass and the two end-mean constraints of a mesh of Omega_b."""
    stiffness, mass = assemble_volume(mesh)
    constraints = np.zeros((mesh.n_nodes, 2))
    for column, tag in enumerate((SIGMA_MINUS, SIGMA_PLUS)):
        trace = end_trace(mesh, tag)
        constraints[trace.nodes, column] = trace_integrals(trace)
    return ConstrainedEigenproblem(mesh, stiffness, mass, constraints)


def smallest_eigenvalue(problem: ConstrainedEigenproblem, shift: float = 0.0, block_size: int = 4,
                        max_iter: int = 300, tol: float = 1e-8, seed: int = 0):
    """(mu_1, eigenvector, residual, iterations) by shifted block inverse iteration."""
    n = problem.mesh.n_nodes
    try:
        lu = splu(problem.saddle_matrix(shift))
    except RuntimeError as exc:
        raise SolverError(f"saddle-point factorization failed: {exc}", reason="near-singular")

    pad = np.zeros((2, block_size))

    def inverse(x: np.ndarray) -> np.ndarray:
        return lu.solve(np.vstack([problem.mass @ x, pad]))[:n]

    rng = np.random.default_rng(seed)
    x = inverse(rng.standard_normal((n, block_size)))
    mu, zeta, residual = float('nan'), None, float('inf')
    for iteration in range(1, max_iter + 1):
        z = inverse(x)
        kz = problem.stiffness @ z
        mz = problem.mass @ z
        values, vectors = eigh(z.T @ kz, z.T @ mz)
        x = z @ vectors
        mu, zeta = float(values[0]), x[:, 0]
        residual = problem.residual(mu, zeta)
        if residual <= tol:
            logger.debug("inverse iteration converged after %d steps: mu1=%.12g residual=%.2e",
                         iteration, mu, residual)
            return mu, zeta, residual, iteration

    raise SolverError(f"eigen-iteration stalled after {max_iter} steps (residual {residual:.2e})",
                      reason="eigen-iteration")


def k_star_bound(result) -> float:
    """min(sqrt(mu_1), pi); accepts a result or the eigenvalue itself."""
    mu1 = result.mu1 if hasattr(result, 'mu1') else float(result)
    return min(math.sqrt(mu1), math.pi)


def minmax_upper_bound(chimneys: Sequence[Chimney]) -> float:
    """max_m (pi / (2 h_m))^2, the quarter-wave test-function bound."""
    if not chimneys:
        return math.inf
    return max((math.pi / (2.0 * c.height)) ** 2 for c in chimneys)


def default_truncation(chimneys: Sequence[Chimney], pad: float = 1.0) -> Tuple[float, float]:
    """(x_minus, x_plus): footprint hull widened by one strip height."""
    if not chimneys:
        return pad, pad
    left = min(c.left for c in chimneys)
    right = max(c.right for c in chimneys)
    return pad - left, right + pad


def obstruction_bound(chimneys: Sequence[Chimney], x_minus: float = None, x_plus: float = None,
                      mesh_target_h: float = 0.05, min_cells: int = 4, shift: float = 0.0,
                      max_iter: int = 300, tol: float = 1e-8) -> ObstructionResult:
    """Build Omega_b, solve the constrained problem and collect the bounds."""
    default_minus, default_plus = default_truncation(chimneys)
    x_minus = default_minus if x_minus is None else float(x_minus)
    x_plus = default_plus if x_plus is None else float(x_plus)

    mesh = build_mesh(-x_minus, x_plus, chimneys, mesh_target_h, min_cells)
    problem = assemble_constrained_eigenproblem(mesh)
    mu1, zeta, residual, iterations = smallest_eigenvalue(problem, shift=shift,
                                                          max_iter=max_iter, tol=tol)
    means = problem.constraints.T @ zeta
    result = ObstructionResult(
        mu1=mu1, eigenvector=zeta, minmax_upper=minmax_upper_bound(chimneys),
        x_minus=x_minus, x_plus=x_plus, residual=residual, iterations=iterations,
        h_used=mesh.h_used, n_nodes=mesh.n_nodes,
        end_means=(float(means[0]), float(means[1])),
    )
    logger.info("obstruction on (-%.4g, %.4g): mu1=%.10g, k_star=%.10g",
                x_minus, x_plus, mu1, result.k_star_bound)
    return result


def obstruction_for_spec(spec: WaveguideSpec, **options) -> ObstructionResult:
    """Bound for the chimneys of a layout at its own chimney resolution."""
    options.setdefault('min_cells', spec.min_cells_across_chimney)
    return obstruction_bound(spec.chimneys, **options)


def truncation_sweep(chimneys: Sequence[Chimney], x_minus_values: Sequence[float],
                     x_plus_values: Sequence[float], threads: int = 1,
                     **options) -> List[ObstructionResult]:
    """mu_1 over a grid of truncations, row-major in (x_minus, x_plus)."""
    pairs = [(a, b) for a in x_minus_values for b in x_plus_values]

    def run(pair):
        return obstruction_bound(chimneys, pair[0], pair[1], **options)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, pairs))
    return [run(pair) for pair in pairs]


def obstruction_record(result: ObstructionResult):
    return {
        'mu1': result.mu1,
        'lambda1': result.lambda1,
        'k_star_bound': result.k_star_bound,
        'minmax_upper': result.minmax_upper,
        'x_minus': result.x_minus,
        'x_plus': result.x_plus,
        'h_used': result.h_used,
        'n_nodes': result.n_nodes,
        'residual': result.residual,
        'iterations': result.iterations,
        'end_mean_minus': result.end_means[0],
        'end_mean_plus': result.end_means[1],
    }
