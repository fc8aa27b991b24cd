"""
Finite-difference cross-check of the scattering solver.

Nodes sit on a uniform grid of spacing delta covering the strip and the
chimneys. The operator is the box-scheme form of the 5-point Laplacian:
every node owns the quarter cells around it that lie inside the domain,
and each grid segment carries a conductance of half the number of domain
cells touching it. On straight walls this is the ghost-node Neumann
stencil; at re-entrant corners it stays symmetric. The truncated DtN map
acts on the end columns through trapezoid weights, for which the sampled
cosines are exactly orthogonal.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..errors import GeometryError, SolverError
from ..geometry.chimney_layout import Chimney, STRIP_HEIGHT, WaveguideSpec
from ..geometry.validation import SpecValidator
from ..modal.modes import ModalBasis
from ..scattering.coefficients import ScatteringResult, fem_coefficients
from ..scattering.energy import energy_identity_defects

logger = logging.getLogger(__name__)

MIN_CELLS_ACROSS = 4
FD_ORDER = 2.0
FEM_ORDER = 2.0


@dataclass(eq=False)
class FDGrid:
    delta: float
    half_length: float
    chimneys: Tuple[Chimney, ...]
    cells: np.ndarray                 # (NX, NY) True where the cell is in the domain
    index: np.ndarray                 # (NX + 1, NY + 1) node number or -1
    snaps: Dict[str, float] = field(default_factory=dict)
    source: WaveguideSpec = None

    @property
    def n_nodes(self) -> int:
        return int((self.index >= 0).sum())

    @property
    def strip_rows(self) -> int:
        return int(round(STRIP_HEIGHT / self.delta))

    @property
    def max_snap(self) -> float:
        return max((abs(v) for v in self.snaps.values()), default=0.0)

    @property
    def snapped_spec(self) -> WaveguideSpec:
        """The spec whose geometry this grid discretizes exactly."""
        return WaveguideSpec(
            k=self.source.k, chimneys=self.chimneys, trunc_half_length=self.half_length,
            dtn_terms=self.source.dtn_terms, mesh_target_h=self.source.mesh_target_h,
            min_cells_across_chimney=self.source.min_cells_across_chimney,
            grade_junctions=self.source.grade_junctions, max_nodes=self.source.max_nodes)

    def x(self, i) -> np.ndarray:
        return -self.half_length + np.asarray(i) * self.delta

    def y(self, j) -> np.ndarray:
        return np.asarray(j) * self.delta

    def end_column(self, side: int) -> np.ndarray:
        """Node numbers of the strip column at x = -L (side -1) or x = +L (side +1)."""
        i = 0 if side < 0 else self.index.shape[0] - 1
        return self.index[i, :self.strip_rows + 1]


def _snap(value: float, delta: float) -> float:
    return round(value / delta) * delta


def build_grid(spec: WaveguideSpec, delta: float, snap_tol: float = None) -> FDGrid:
    """Snap the layout to a grid with 1 / delta cells across the strip."""
    validator = SpecValidator()
    validator.detect_errors(spec)
    if validator.has_errors():
        raise GeometryError("invalid spec: " + "; ".join(
            d.message for d in validator.errors if d.severity == 'error'))

    rows = max(1, int(round(STRIP_HEIGHT / delta)))
    delta = STRIP_HEIGHT / rows
    snap_tol = 0.5 * delta * (1.0 + 1e-9) if snap_tol is None else snap_tol

    snaps: Dict[str, float] = {}
    half_length = _snap(spec.trunc_half_length, delta)
    snaps['L'] = half_length - spec.trunc_half_length
    chimneys = []
    for m, chimney in enumerate(spec.chimneys):
        left, right = _snap(chimney.left, delta), _snap(chimney.right, delta)
        height = max(delta, _snap(chimney.height, delta))
        snaps[f'left_{m}'] = left - chimney.left
        snaps[f'right_{m}'] = right - chimney.right
        snaps[f'height_{m}'] = height - chimney.height
        if (right - left) / delta < MIN_CELLS_ACROSS - 1e-9:
            raise GeometryError(f"delta = {delta:.4g} puts fewer than {MIN_CELLS_ACROSS} cells "
                                f"across chimney {m}", reason="grid-too-coarse")
        chimneys.append(Chimney(0.5 * (left + right), height, right - left))

    worst = max(abs(v) for v in snaps.values())
    if worst > snap_tol:
        raise GeometryError(f"grid snapping moved the geometry by {worst:.3e} > {snap_tol:.3e}",
                            reason="snap-tolerance")
    if worst > 1e-12:
        logger.warning("FD grid snapped the geometry by up to %.3e", worst)

    nx = int(round(2.0 * half_length / delta))
    top = max((int(round(c.height / delta)) for c in chimneys), default=0)
    cells = np.zeros((nx, rows + top), dtype=bool)
    cells[:, :rows] = True
    for chimney in chimneys:
        i0 = int(round((chimney.left + half_length) / delta))
        i1 = int(round((chimney.right + half_length) / delta))
        cells[i0:i1, rows:rows + int(round(chimney.height / delta))] = True

    padded = np.pad(cells, 1)
    owned = padded[:-1, :-1].astype(int) + padded[1:, :-1] + padded[:-1, 1:] + padded[1:, 1:]
    index = np.full(owned.shape, -1, dtype=np.int64)
    inside = owned > 0
    index[inside] = np.arange(int(inside.sum()))

    return FDGrid(delta=delta, half_length=half_length, chimneys=tuple(chimneys), cells=cells,
                  index=index, snaps=snaps, source=spec)


def _laplacian_and_areas(grid: FDGrid):
    """Box-scheme conductance matrix and nodal areas."""
    padded = np.pad(grid.cells, 1).astype(float)
    n = grid.n_nodes
    index = grid.index

    # segment (i, j)-(i+1, j): cells (i, j-1) and (i, j)
    horizontal = padded[1:-1, :-1] + padded[1:-1, 1:]
    # segment (i, j)-(i, j+1): cells (i-1, j) and (i, j)
    vertical = padded[:-1, 1:-1] + padded[1:, 1:-1]

    rows, cols, vals = [], [], []
    for weights, a, b in ((horizontal, index[:-1, :], index[1:, :]),
                          (vertical, index[:, :-1], index[:, 1:])):
        mask = weights > 0
        p, q, c = a[mask], b[mask], 0.5 * weights[mask]
        rows += [p, q, p, q]
        cols += [p, q, q, p]
        vals += [c, c, -c, -c]
    laplacian = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(n, n)).tocsr()

    owned = padded[:-1, :-1] + padded[1:, :-1] + padded[:-1, 1:] + padded[1:, 1:]
    areas = np.zeros(n)
    inside = index >= 0
    areas[index[inside]] = 0.25 * grid.delta ** 2 * owned[inside]
    return laplacian, areas


def _end_weights(grid: FDGrid) -> np.ndarray:
    """Trapezoid weights on an end column."""
    w = np.full(grid.strip_rows + 1, grid.delta)
    w[0] = w[-1] = 0.5 * grid.delta
    return w


def fd_field(grid: FDGrid, basis: ModalBasis) -> np.ndarray:
    """Total field at the grid nodes."""
    laplacian, areas = _laplacian_and_areas(grid)
    n = grid.n_nodes
    k = basis.k
    matrix = (laplacian - k * k * sp.diags(areas)).astype(complex).tocoo()
    rows, cols, vals = [matrix.row], [matrix.col], [matrix.data]

    weights = _end_weights(grid)
    y = grid.y(np.arange(grid.strip_rows + 1))
    overlap = basis.modes(y) * weights[None, :]
    block = overlap.T @ ((1j * basis.betas)[:, None] * overlap)
    for side in (-1, 1):
        nodes = grid.end_column(side)
        r, c = np.meshgrid(nodes, nodes, indexing='ij')
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(-block.ravel())
    system = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(n, n)).tocsc()

    rhs = np.zeros(n, dtype=complex)
    g = -2j * k * np.exp(-1j * k * grid.half_length) / math.sqrt(2.0 * k)
    rhs[grid.end_column(-1)] = g * weights

    try:
        u = splu(system).solve(rhs)
    except RuntimeError as exc:
        raise SolverError(f"FD solve failed: near-singular ({exc})", reason="near-singular", pivot=0.0)
    if not np.all(np.isfinite(u)):
        raise SolverError("FD solve produced non-finite values", reason="near-singular")
    return u


def fd_solve(spec: WaveguideSpec, delta: float, snap_tol: float = None) -> ScatteringResult:
    """Scattering coefficients of the finite-difference model by the overlap formula."""
    grid = build_grid(spec, delta, snap_tol)
    basis = ModalBasis(spec.k, spec.dtn_terms)
    u = fd_field(grid, basis)

    k = spec.k
    weights = _end_weights(grid)
    coefficients = []
    for side in (-1, 1):
        x = side * grid.half_length
        u_s = u[grid.end_column(side)] - np.exp(1j * k * x) / math.sqrt(2.0 * k)
        coefficients.append(complex(math.sqrt(2.0 * k) * np.exp(-1j * k * grid.half_length)
                                    * np.sum(weights * u_s)))

    result = ScatteringResult(coefficients[0], coefficients[1])
    result.energy_defect, result.optical_defect = energy_identity_defects(result)
    result.extras = {'delta': grid.delta, 'fd_nodes': grid.n_nodes, 'max_snap': grid.max_snap}
    logger.info("FD delta=%.4g (%d nodes): |s-|=%.3e |s+|=%.3e", grid.delta, grid.n_nodes,
                abs(result.s_minus), abs(result.s_plus))
    return result


def plane_wave_residual(grid: FDGrid, k: float) -> float:
    """Max over fully interior nodes of |(-Delta_h - k^2) e^{ikx}|."""
    laplacian, areas = _laplacian_and_areas(grid)
    inside = grid.index >= 0
    i = np.nonzero(inside)[0]
    u = np.zeros(grid.n_nodes, dtype=complex)
    u[grid.index[inside]] = np.exp(1j * k * grid.x(i))
    applied = (laplacian @ u) / areas - k * k * u
    interior = np.isclose(areas, grid.delta ** 2)
    return float(np.abs(applied[interior]).max())


def richardson(coarse: complex, fine: complex, ratio: float = 2.0, order: float = 2.0) -> Tuple[complex, float]:
    """Extrapolated limit of a two-level sequence and its error estimate."""
    factor = ratio ** order
    limit = (factor * fine - coarse) / (factor - 1.0)
    return limit, float(abs(limit - fine))


def _extrapolate(coarse: ScatteringResult, fine: ScatteringResult,
                 order: float) -> Tuple[complex, complex, float]:
    s_minus, err_minus = richardson(coarse.s_minus, fine.s_minus, order=order)
    s_plus, err_plus = richardson(coarse.s_plus, fine.s_plus, order=order)
    return s_minus, s_plus, max(err_minus, err_plus)


def compare_with_fem(spec: WaveguideSpec, delta: float, fem_h: float = None) -> Dict[str, object]:
    """Richardson limits of FD and FEM coefficients on the same snapped geometry.

    FD runs at delta and delta/2, FEM at fem_h and fem_h/2. The limits agree
    when their gap stays inside the summed error estimates.
    """
    grid = build_grid(spec, delta)
    snapped = grid.snapped_spec
    fem_h = snapped.mesh_target_h if fem_h is None else fem_h

    fd = [fd_solve(snapped, grid.delta / level) for level in (1, 2)]
    fem = [fem_coefficients(replace(snapped, mesh_target_h=fem_h / level)) for level in (1, 2)]
    fd_minus, fd_plus, fd_error = _extrapolate(*fd, order=FD_ORDER)
    fem_minus, fem_plus, fem_error = _extrapolate(*fem, order=FEM_ORDER)

    gap = max(abs(fd_minus - fem_minus), abs(fd_plus - fem_plus))
    error_bar = fd_error + fem_error
    logger.info("oracle gap %.3e against error bar %.3e (FD %.3e, FEM %.3e)",
                gap, error_bar, fd_error, fem_error)
    return {
        'delta': grid.delta,
        'fem_h': fem_h,
        'max_snap': grid.max_snap,
        'fd_levels': [(r.s_minus, r.s_plus) for r in fd],
        'fem_levels': [(r.s_minus, r.s_plus) for r in fem],
        'fd_s_minus': fd_minus,
        'fd_s_plus': fd_plus,
        'fem_s_minus': fem_minus,
        'fem_s_plus': fem_plus,
        'fd_error': fd_error,
        'fem_error': fem_error,
        'diff_s_minus': abs(fd_minus - fem_minus),
        'diff_s_plus': abs(fd_plus - fem_plus),
        'gap': gap,
        'error_bar': error_bar,
        'within_error_bars': gap <= error_bar,
        'fd_energy_defect': fd[-1].energy_defect,
        'fem_energy_defect': fem[-1].energy_defect,
    }
