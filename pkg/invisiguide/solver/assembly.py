"""
Assembly of the P2 Helmholtz system with DtN coupling on both ends.

    A = K - k^2 M - sum_{ends} sum_n i beta_n c_n c_n^T

is complex symmetric (the form is bilinear, not sesquilinear). The incident
piston wave enters only through the right-hand side on sigma_minus; on
sigma_plus it is outgoing and its data cancel.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
import scipy.sparse as sp

from ..errors import ConfigError
from ..geometry.mesher import Mesh, SIGMA_MINUS, SIGMA_PLUS
from ..modal.dtn import EndTrace, end_trace, trace_projections
from ..modal.modes import ModalBasis

logger = logging.getLogger(__name__)

# six-point rule of degree 4 on the reference triangle, weights sum to one
_A, _WA = 0.445948490915965, 0.223381589678011
_B, _WB = 0.091576213509771, 0.109951743655322
QUAD_BARYCENTRIC = np.array([
    [1 - 2 * _A, _A, _A], [_A, 1 - 2 * _A, _A], [_A, _A, 1 - 2 * _A],
    [1 - 2 * _B, _B, _B], [_B, 1 - 2 * _B, _B], [_B, _B, 1 - 2 * _B],
])
QUAD_WEIGHTS = np.array([_WA, _WA, _WA, _WB, _WB, _WB])


def p2_shapes(lam: np.ndarray) -> np.ndarray:
    """P2 shape functions from barycentric coordinates (..., 3) -> (..., 6)."""
    l1, l2, l3 = lam[..., 0], lam[..., 1], lam[..., 2]
    return np.stack([l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), l3 * (2 * l3 - 1),
                     4 * l1 * l2, 4 * l2 * l3, 4 * l3 * l1], axis=-1)


def p2_shape_derivatives(lam: np.ndarray) -> np.ndarray:
    """dN_i / d lambda_c, shape (..., 6, 3)."""
    l1, l2, l3 = lam[..., 0], lam[..., 1], lam[..., 2]
    zero = np.zeros_like(l1)
    rows = [
        [4 * l1 - 1, zero, zero],
        [zero, 4 * l2 - 1, zero],
        [zero, zero, 4 * l3 - 1],
        [4 * l2, 4 * l1, zero],
        [zero, 4 * l3, 4 * l2],
        [4 * l3, zero, 4 * l1],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def barycentric_gradients(mesh: Mesh) -> Tuple[np.ndarray, np.ndarray]:
    """Constant gradients of the barycentric coordinates (n_el, 3, 2) and areas."""
    corners = mesh.vertex_coordinates()
    e1 = corners[:, 1] - corners[:, 0]
    e2 = corners[:, 2] - corners[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    # rows of the inverse Jacobian are grad(lambda_2) and grad(lambda_3)
    g2 = np.column_stack([e2[:, 1], -e2[:, 0]]) / det[:, None]
    g3 = np.column_stack([-e1[:, 1], e1[:, 0]]) / det[:, None]
    g1 = -(g2 + g3)
    return np.stack([g1, g2, g3], axis=1), 0.5 * np.abs(det)


def _scatter(elements: np.ndarray, local: np.ndarray, n: int) -> sp.csr_matrix:
    rows = np.repeat(elements, 6, axis=1).ravel()
    cols = np.tile(elements, (1, 6)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_volume(mesh: Mesh) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
    """Real stiffness and mass matrices of the P2 space."""
    grad_lam, area = barycentric_gradients(mesh)
    shapes = p2_shapes(QUAD_BARYCENTRIC)                      # (q, 6)
    dshape = p2_shape_derivatives(QUAD_BARYCENTRIC)           # (q, 6, 3)
    grads = np.einsum('qic,ecd->eqid', dshape, grad_lam)      # (e, q, 6, 2)

    k_local = np.einsum('q,eqid,eqjd->eij', QUAD_WEIGHTS, grads, grads) * area[:, None, None]
    m_ref = np.einsum('q,qi,qj->ij', QUAD_WEIGHTS, shapes, shapes)
    m_local = area[:, None, None] * m_ref[None, :, :]

    stiffness = _scatter(mesh.elements, k_local, mesh.n_nodes)
    mass = _scatter(mesh.elements, m_local, mesh.n_nodes)
    return stiffness, mass


@dataclass
class DtNBlock:
    trace: EndTrace
    overlap: np.ndarray    # (N, n_trace)
    betas: np.ndarray

    def dense(self) -> np.ndarray:
        return self.overlap.T @ ((1j * self.betas)[:, None] * self.overlap)


@dataclass(eq=False)
class AssembledSystem:
    matrix: sp.csc_matrix
    rhs: np.ndarray
    mesh: Mesh
    basis: ModalBasis
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    dtn: Dict[int, DtNBlock] = field(default_factory=dict)

    @property
    def n_dofs(self) -> int:
        return int(self.rhs.shape[0])

    def symmetry_defect(self) -> float:
        diff = self.matrix - self.matrix.T
        scale = abs(self.matrix).max()
        return float(abs(diff).max() / scale) if diff.nnz else 0.0


def incident_forcing(basis: ModalBasis, x_left: float) -> complex:
    """d_nu w+ - T w+ on sigma_minus: -2ik (2k)^{-1/2} e^{ikx}."""
    k = basis.k
    return -2j * k * complex(np.exp(1j * k * x_left)) / math.sqrt(2.0 * k)


def assemble(mesh: Mesh, basis: ModalBasis) -> AssembledSystem:
    """Build A and f for the total field with outgoing DtN conditions at x = +/-L."""
    if mesh.k is not None and not math.isclose(mesh.k, basis.k, rel_tol=1e-14, abs_tol=0.0):
        raise ConfigError(f"mesh was generated for k = {mesh.k!r} but the basis uses k = {basis.k!r}",
                          reason="inconsistent-k")

    stiffness, mass = assemble_volume(mesh)
    matrix = (stiffness - basis.k ** 2 * mass).astype(complex).tocoo()
    rows, cols, vals = [matrix.row], [matrix.col], [matrix.data]

    blocks: Dict[int, DtNBlock] = {}
    for tag in (SIGMA_MINUS, SIGMA_PLUS):
        trace = end_trace(mesh, tag)
        block = DtNBlock(trace, trace_projections(basis, trace), basis.betas)
        dense = block.dense()
        r, c = np.meshgrid(trace.nodes, trace.nodes, indexing='ij')
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(-dense.ravel())
        blocks[tag] = block

    n = mesh.n_nodes
    system_matrix = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                  shape=(n, n)).tocsc()

    rhs = np.zeros(n, dtype=complex)
    left = blocks[SIGMA_MINUS]
    rhs[left.trace.nodes] = incident_forcing(basis, left.trace.x) * left.overlap[0]

    logger.debug("assembled %d dofs, %d nonzeros, DtN traces %d/%d nodes",
                 n, system_matrix.nnz, blocks[SIGMA_MINUS].trace.size, blocks[SIGMA_PLUS].trace.size)
    return AssembledSystem(system_matrix, rhs, mesh, basis, stiffness, mass, blocks)
