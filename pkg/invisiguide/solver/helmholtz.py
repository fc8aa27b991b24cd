"""
Direct solution of the assembled Helmholtz system and nodal field handling.
"""

import logging
import math
import os
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.sparse.linalg import splu

from ..errors import SolverError
from ..geometry.chimney_layout import WaveguideSpec
from ..geometry.mesher import Mesh, generate_mesh
from ..modal.dtn import line_trace
from ..modal.modes import ModalBasis
from .assembly import AssembledSystem, assemble

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
PIVOT_TOL = 1e-14


@dataclass(eq=False)
class ComplexField:
    mesh: Mesh
    values: np.ndarray
    k: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.mesh.n_nodes,):
            raise ValueError(f"field has {self.values.shape} values for {self.mesh.n_nodes} nodes")
        if not np.all(np.isfinite(self.values)):
            raise SolverError("field contains non-finite values", reason="non-finite-field")

    def incident(self) -> np.ndarray:
        """w+ sampled at every node, chimneys included."""
        x = self.mesh.nodes[:, 0]
        return np.exp(1j * self.k * x) / math.sqrt(2.0 * self.k)


def solve(system: AssembledSystem, residual_tol: float = RESIDUAL_TOL,
          pivot_tol: float = PIVOT_TOL) -> ComplexField:
    """Sparse LU solve with pivot and residual checks."""
    try:
        lu = splu(system.matrix, permc_spec='COLAMD')
    except RuntimeError as exc:
        raise SolverError(f"solve failed: near-singular ({exc})", reason="near-singular", pivot=0.0)

    pivots = np.abs(lu.U.diagonal())
    smallest = float(pivots.min())
    ratio = smallest / float(pivots.max())
    if ratio < pivot_tol:
        raise SolverError(f"solve failed: near-singular, smallest pivot {smallest:.3e} "
                          f"(ratio {ratio:.3e})", reason="near-singular", pivot=smallest)

    u = lu.solve(system.rhs)
    norm_f = np.linalg.norm(system.rhs)
    residual = np.linalg.norm(system.matrix @ u - system.rhs) / (norm_f if norm_f > 0 else 1.0)
    logger.debug("LU solve: %d dofs, pivot ratio %.3e, relative residual %.3e",
                 system.n_dofs, ratio, residual)
    if residual > residual_tol:
        raise SolverError(f"solve failed: relative residual {residual:.3e} above {residual_tol:.1e}",
                          reason="residual", pivot=smallest)
    return ComplexField(system.mesh, u, system.basis.k)


def scattered_field(total: ComplexField) -> ComplexField:
    """u_s = u - w+ at every node."""
    return ComplexField(total.mesh, total.values - total.incident(), total.k)


def solve_spec(spec: WaveguideSpec, residual_tol: float = RESIDUAL_TOL,
               pivot_tol: float = PIVOT_TOL) -> Tuple[ComplexField, AssembledSystem]:
    """Mesh, assemble and solve one configuration."""
    mesh = generate_mesh(spec)
    basis = ModalBasis(spec.k, spec.dtn_terms)
    system = assemble(mesh, basis)
    field = solve(system, residual_tol, pivot_tol)
    logger.info("solved k=%.6g with %d chimneys: %d dofs, h_used=%.4g",
                spec.k, len(spec.chimneys), system.n_dofs, mesh.h_used)
    return field, system


def field_at_stations(field: ComplexField, xs) -> List[np.ndarray]:
    """Nodal values on each vertex line x in xs (strip part, sorted by y)."""
    out = []
    for x in xs:
        trace = line_trace(field.mesh, x)
        out.append(field.values[trace.nodes])
    return out


def write_field(field: ComplexField, nodes_path: str, elements_path: str = None,
                header: str = '') -> List[str]:
    """Node records `index x y re im abs`, element records `index n0..n5 region`."""
    prefix = ''.join(f"# {line}\n" for line in header.splitlines()) if header else ''
    written = []
    os.makedirs(os.path.dirname(os.path.abspath(nodes_path)), exist_ok=True)
    with open(nodes_path, 'w') as fh:
        fh.write(prefix + "# index x y re im abs\n")
        for i, ((x, y), u) in enumerate(zip(field.mesh.nodes, field.values)):
            fh.write(f"{i} {x:.17g} {y:.17g} {u.real:.17g} {u.imag:.17g} {abs(u):.17g}\n")
    written.append(nodes_path)
    if elements_path:
        with open(elements_path, 'w') as fh:
            fh.write(prefix + "# index n0 n1 n2 n3 n4 n5 region\n")
            for i, (row, region) in enumerate(zip(field.mesh.elements, field.mesh.regions)):
                fh.write(f"{i} {' '.join(str(int(n)) for n in row)} {int(region)}\n")
        written.append(elements_path)
    return written
