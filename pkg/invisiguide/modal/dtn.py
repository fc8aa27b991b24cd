"""
Truncated Dirichlet-to-Neumann operators on vertical sections of the strip.

A section is the P2 trace of the mesh on one line x = const, 0 <= y <= 1.
The operator  v -> sum_{n<N} i beta_n (v, phi_n) phi_n  enters the weak form
as the rank-N bilinear block  sum_n i beta_n c_n c_n^T  with
c_n[j] = (phi_n, psi_j), the overlaps of the modes with the trace shape
functions, integrated by Gauss-Legendre on every trace edge.
"""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from ..errors import GeometryError
from ..geometry.chimney_layout import STRIP_HEIGHT
from ..geometry.mesher import Mesh
from .modes import ModalBasis

logger = logging.getLogger(__name__)

_ON_LINE = 1e-10


@dataclass(eq=False)
class EndTrace:
    x: float
    nodes: np.ndarray   # global ids, sorted by y
    y: np.ndarray       # ordinates of the trace nodes
    edges: np.ndarray   # (n_edges, 3) local [a, b, mid]

    @property
    def size(self) -> int:
        return int(len(self.nodes))


def _edge_shapes(s: np.ndarray) -> np.ndarray:
    """1D P2 shape functions of [a, b, mid] at parameters s in [0, 1]."""
    return np.stack([(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0), 4.0 * s * (1.0 - s)], axis=1)


def edge_quadrature(n_points: int):
    """Gauss-Legendre nodes and weights mapped to [0, 1]."""
    t, w = leggauss(n_points)
    return 0.5 * (t + 1.0), 0.5 * w


def end_trace(mesh: Mesh, tag: int) -> EndTrace:
    """Trace of all boundary edges carrying one tag (sigma_minus or sigma_plus)."""
    rows = mesh.boundary_edges[mesh.edge_tags == tag]
    if len(rows) == 0:
        raise GeometryError(f"mesh has no boundary edge tagged {tag}", reason="untagged-ends")
    ids = np.unique(rows.ravel())
    ids = ids[np.argsort(mesh.nodes[ids, 1], kind='stable')]
    local = {int(g): i for i, g in enumerate(ids)}
    edges = np.vectorize(local.__getitem__, otypes=[np.int64])(rows)
    return EndTrace(x=float(mesh.nodes[ids[0], 0]), nodes=ids, y=mesh.nodes[ids, 1], edges=edges)


def line_trace(mesh: Mesh, x: float) -> EndTrace:
    """Trace on an interior vertex line x = const restricted to the strip."""
    if not mesh.has_x_line(x):
        raise GeometryError(f"station x = {x!r} is not a vertex line of the mesh",
                            reason="station-not-aligned")
    on_line = (np.abs(mesh.nodes[:, 0] - x) <= _ON_LINE) & (mesh.nodes[:, 1] <= STRIP_HEIGHT + _ON_LINE)
    ids = np.flatnonzero(on_line)
    ids = ids[np.argsort(mesh.nodes[ids, 1], kind='stable')]
    if len(ids) < 3 or len(ids) % 2 == 0:
        raise GeometryError(f"station x = {x!r} does not carry a complete P2 trace",
                            reason="station-not-aligned")
    j = np.arange(0, len(ids) - 1, 2)
    edges = np.column_stack([j, j + 2, j + 1])
    return EndTrace(x=float(x), nodes=ids, y=mesh.nodes[ids, 1], edges=edges)


def _quadrature_table(trace: EndTrace, n_points: int):
    """Physical ordinates, weights and shape values at every edge Gauss point."""
    s, w = edge_quadrature(n_points)
    ya = trace.y[trace.edges[:, 0]]
    yb = trace.y[trace.edges[:, 1]]
    ys = ya[:, None] + np.outer(yb - ya, s)
    weights = np.abs(yb - ya)[:, None] * w[None, :]
    return ys, weights, _edge_shapes(s)


def trace_projections(basis: ModalBasis, trace: EndTrace, values: np.ndarray = None) -> np.ndarray:
    """Overlap matrix C[n, j] = (phi_n, psi_j), or the projections (v, phi_n) when values are given."""
    n_points = max(basis.n_terms + 3, 6)
    ys, weights, shapes = _quadrature_table(trace, n_points)
    modes = basis.modes(ys.ravel()).reshape(basis.n_terms, *ys.shape)
    contrib = np.einsum('neq,eq,qa->nea', modes, weights, shapes)
    overlap = np.zeros((basis.n_terms, trace.size))
    for slot in range(3):
        np.add.at(overlap.T, trace.edges[:, slot], contrib[:, :, slot].T)
    if values is None:
        return overlap
    return overlap @ np.asarray(values)


def trace_mass_matrix(trace: EndTrace) -> np.ndarray:
    """Dense 1D P2 mass matrix of the trace."""
    _, weights, shapes = _quadrature_table(trace, 4)
    local = np.einsum('eq,qa,qb->eab', weights, shapes, shapes)
    mass = np.zeros((trace.size, trace.size))
    for a in range(3):
        for b in range(3):
            np.add.at(mass, (trace.edges[:, a], trace.edges[:, b]), local[:, a, b])
    return mass


def dtn_matrix(basis: ModalBasis, trace: EndTrace) -> np.ndarray:
    """Galerkin block <T v, psi_i> = sum_n i beta_n c_n c_n^T (complex symmetric)."""
    overlap = trace_projections(basis, trace)
    return overlap.T @ ((1j * basis.betas)[:, None] * overlap)


def dtn_apply(basis: ModalBasis, trace: EndTrace, values: np.ndarray) -> np.ndarray:
    """Nodal values of T v in the trace space."""
    rhs = dtn_matrix(basis, trace) @ np.asarray(values, dtype=complex)
    return np.linalg.solve(trace_mass_matrix(trace), rhs)


def trace_integrals(trace: EndTrace) -> np.ndarray:
    """int psi_j over the trace, one entry per trace node."""
    _, weights, shapes = _quadrature_table(trace, 3)
    contrib = weights @ shapes
    out = np.zeros(trace.size)
    for slot in range(3):
        np.add.at(out, trace.edges[:, slot], contrib[:, slot])
    return out
