"""
Structured second-order triangulation of a strip with chimneys.

The domain ([x_min, x_max] x [0, 1]) plus every chimney rectangle is covered
by tensor grids whose x-lines run through the chimney footprints, so the
chimney blocks share their bottom row of nodes with the strip. Each grid cell
is split along its SW-NE diagonal into two 6-node triangles with local order
[v1, v2, v3, m12, m23, m31].
"""

import logging
import math
import os
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import GeometryError
from .chimney_layout import Chimney, STRIP_HEIGHT, WaveguideSpec
from .validation import SpecValidator

logger = logging.getLogger(__name__)

WALL = 0
SIGMA_MINUS = 1
SIGMA_PLUS = 2
TAG_NAMES = {WALL: 'wall', SIGMA_MINUS: 'sigma_minus', SIGMA_PLUS: 'sigma_plus'}

STRIP_REGION = 0

# vertex pairs of the three local edges, midpoint slot in the local order
LOCAL_EDGES = ((0, 1, 3), (1, 2, 4), (2, 0, 5))

_X_TOL = 1e-12


@dataclass(eq=False)
class Mesh:
    nodes: np.ndarray            # (n_nodes, 2)
    elements: np.ndarray         # (n_elements, 6)
    regions: np.ndarray          # (n_elements,) 0 strip, m + 1 chimney m
    boundary_edges: np.ndarray   # (n_edges, 3) [a, b, mid] in element order
    edge_tags: np.ndarray        # (n_edges,)
    edge_elements: np.ndarray    # owning element of each boundary edge
    edge_local: np.ndarray       # local edge number 0..2 in the owner
    x_lines: np.ndarray          # sorted vertex abscissae of the strip grid
    x_min: float
    x_max: float
    h_used: float
    chimneys: Tuple[Chimney, ...] = field(default_factory=tuple)
    chimney_cells: Tuple[int, ...] = field(default_factory=tuple)
    k: Optional[float] = None

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def n_elements(self) -> int:
        return int(self.elements.shape[0])

    def vertex_coordinates(self) -> np.ndarray:
        """(n_elements, 3, 2) corner coordinates."""
        return self.nodes[self.elements[:, :3]]

    def jacobians(self) -> np.ndarray:
        corners = self.vertex_coordinates()
        e1 = corners[:, 1] - corners[:, 0]
        e2 = corners[:, 2] - corners[:, 0]
        return e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]

    def element_areas(self) -> np.ndarray:
        return 0.5 * np.abs(self.jacobians())

    def edges_with_tag(self, tag: int) -> np.ndarray:
        return np.flatnonzero(self.edge_tags == tag)

    def nodes_with_tag(self, tag: int) -> np.ndarray:
        """Global node ids on edges of one tag, sorted by y."""
        ids = np.unique(self.boundary_edges[self.edges_with_tag(tag)].ravel())
        return ids[np.argsort(self.nodes[ids, 1], kind='stable')]

    def has_x_line(self, x: float) -> bool:
        return bool(np.any(np.abs(self.x_lines - x) <= _X_TOL * max(1.0, abs(x))))

    def with_k(self, k: float) -> "Mesh":
        return replace(self, k=float(k))


@dataclass
class _Block:
    """Tensor grid of one rectangle, refined for P2 (2n + 1 nodes per axis)."""
    xs: np.ndarray
    ys: np.ndarray
    ids: np.ndarray = None

    @property
    def nx(self) -> int:
        return len(self.xs) - 1

    @property
    def ny(self) -> int:
        return len(self.ys) - 1


def _refine(coarse: np.ndarray) -> np.ndarray:
    fine = np.empty(2 * len(coarse) - 1)
    fine[0::2] = coarse
    fine[1::2] = 0.5 * (coarse[:-1] + coarse[1:])
    return fine


def _subdivide(a: float, b: float, cells: int) -> List[float]:
    return list(np.linspace(a, b, cells + 1)[:-1])


def _cells_for(length: float, target_h: float) -> int:
    return max(1, int(math.ceil(length / target_h - 1e-9)))


def _cells_across(chimney: Chimney, target_h: float, min_cells: int) -> int:
    return max(min_cells, int(math.ceil(chimney.width / target_h - 1e-9)))


def _graded_lines(start: float, stop: float, target_h: float, grading: float,
                  at_start: bool) -> np.ndarray:
    """Grid lines on [start, stop] with an optional thin layer at one end."""
    length = stop - start
    if grading > 0.0 and length > 3.0 * grading:
        if at_start:
            lines = [start] + _subdivide(start + grading, stop,
                                         _cells_for(length - grading, target_h)) + [stop]
        else:
            lines = _subdivide(start, stop - grading,
                               _cells_for(length - grading, target_h)) + [stop - grading, stop]
        return np.asarray(lines)
    return np.linspace(start, stop, _cells_for(length, target_h) + 1)


def _x_breakpoints(x_min: float, x_max: float, chimneys: Sequence[Chimney],
                   across: Sequence[int], grade: bool) -> List[float]:
    points = [x_min, x_max]
    for chimney in chimneys:
        points += [chimney.left, chimney.right]
    if grade:
        for chimney, n in zip(chimneys, across):
            g = chimney.width / n
            for candidate in (chimney.left - g, chimney.right + g):
                if all(abs(candidate - p) >= 2.0 * g for p in points):
                    points.append(candidate)
    return sorted(points)


def _strip_x_lines(x_min: float, x_max: float, chimneys: Sequence[Chimney],
                   target_h: float, across: Sequence[int], grade: bool):
    """Vertex x-lines of the strip and the coarse column range of each chimney."""
    breakpoints = _x_breakpoints(x_min, x_max, chimneys, across, grade)
    lines: List[float] = []
    spans: Dict[int, Tuple[int, int]] = {}
    for a, b in zip(breakpoints, breakpoints[1:]):
        owner = next((m for m, c in enumerate(chimneys)
                      if abs(a - c.left) <= _X_TOL and abs(b - c.right) <= _X_TOL), None)
        if owner is not None:
            start = len(lines)
            lines += _subdivide(a, b, across[owner])
            spans[owner] = (start, start + across[owner])
        else:
            lines += _subdivide(a, b, _cells_for(b - a, target_h))
    lines.append(breakpoints[-1])
    return np.asarray(lines), spans


def _cell_elements(ids: np.ndarray) -> np.ndarray:
    """Two P2 triangles per coarse cell, ordered 2 * (i * ny + j) + {0, 1}."""
    nx = (ids.shape[0] - 1) // 2
    ny = (ids.shape[1] - 1) // 2
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing='ij')
    i = i.ravel()
    j = j.ravel()
    sw = ids[2 * i, 2 * j]
    se = ids[2 * i + 2, 2 * j]
    ne = ids[2 * i + 2, 2 * j + 2]
    nw = ids[2 * i, 2 * j + 2]
    south = ids[2 * i + 1, 2 * j]
    east = ids[2 * i + 2, 2 * j + 1]
    north = ids[2 * i + 1, 2 * j + 2]
    west = ids[2 * i, 2 * j + 1]
    centre = ids[2 * i + 1, 2 * j + 1]
    lower = np.stack([sw, se, ne, south, east, centre], axis=1)
    upper = np.stack([sw, ne, nw, centre, north, west], axis=1)
    out = np.empty((2 * len(i), 6), dtype=np.int64)
    out[0::2] = lower
    out[1::2] = upper
    return out


def estimate_nodes(x_min: float, x_max: float, chimneys: Sequence[Chimney],
                   target_h: float, min_cells: int = 4, grade: bool = True) -> int:
    """P2 node count the mesher would produce, without building anything."""
    across = [_cells_across(c, target_h, min_cells) for c in chimneys]
    xs, _ = _strip_x_lines(x_min, x_max, chimneys, target_h, across, grade)
    g_strip = min((c.width / n for c, n in zip(chimneys, across)), default=0.0)
    ys = _graded_lines(0.0, STRIP_HEIGHT, target_h, g_strip if grade else 0.0, at_start=False)
    total = (2 * (len(xs) - 1) + 1) * (2 * (len(ys) - 1) + 1)
    for chimney, n in zip(chimneys, across):
        g = chimney.width / n
        yc = _graded_lines(STRIP_HEIGHT, chimney.top, target_h, g if grade else 0.0, at_start=True)
        total += (2 * n + 1) * 2 * (len(yc) - 1)
    return total


def build_mesh(x_min: float, x_max: float, chimneys: Sequence[Chimney], target_h: float,
               min_cells: int = 4, grade: bool = True, max_nodes: int = 2_000_000) -> Mesh:
    """Mesh ([x_min, x_max] x [0, 1]) united with the chimney rectangles."""
    chimneys = tuple(sorted(chimneys, key=lambda c: c.x_center))
    if not x_min < x_max:
        raise GeometryError(f"empty x-range [{x_min}, {x_max}]")
    for chimney in chimneys:
        if not (x_min < chimney.left and chimney.right < x_max):
            raise GeometryError(
                f"chimney at x = {chimney.x_center:.6g} does not fit inside ({x_min:.6g}, {x_max:.6g})")

    estimate = estimate_nodes(x_min, x_max, chimneys, target_h, min_cells, grade)
    if estimate > max_nodes:
        raise GeometryError(
            f"mesh with h = {target_h:.4g} needs about {estimate} nodes, above the budget of {max_nodes}",
            reason="node-budget")

    across = [_cells_across(c, target_h, min_cells) for c in chimneys]
    xs, spans = _strip_x_lines(x_min, x_max, chimneys, target_h, across, grade)
    g_strip = min((c.width / n for c, n in zip(chimneys, across)), default=0.0)
    ys = _graded_lines(0.0, STRIP_HEIGHT, target_h, g_strip if grade else 0.0, at_start=False)

    strip = _Block(xs, ys)
    fx, fy = _refine(strip.xs), _refine(strip.ys)
    strip.ids = np.arange(len(fx) * len(fy)).reshape(len(fx), len(fy))
    coords = [np.column_stack([np.repeat(fx, len(fy)), np.tile(fy, len(fx))])]
    next_id = strip.ids.size

    blocks = [strip]
    for m, chimney in enumerate(chimneys):
        i0, i1 = spans[m]
        g = chimney.width / across[m]
        yc = _graded_lines(STRIP_HEIGHT, chimney.top, target_h, g if grade else 0.0, at_start=True)
        block = _Block(xs[i0:i1 + 1], yc)
        bx, by = _refine(block.xs), _refine(block.ys)
        ids = np.empty((len(bx), len(by)), dtype=np.int64)
        ids[:, 0] = strip.ids[2 * i0:2 * i1 + 1, -1]
        fresh = len(bx) * (len(by) - 1)
        ids[:, 1:] = next_id + np.arange(fresh).reshape(len(bx), len(by) - 1)
        next_id += fresh
        coords.append(np.column_stack([np.repeat(bx, len(by) - 1), np.tile(by[1:], len(bx))]))
        block.ids = ids
        blocks.append(block)

    nodes = np.vstack(coords)
    element_parts, region_parts = [], []
    edge_rows, edge_tags, edge_owner, edge_local = [], [], [], []
    base = 0
    for region, block in enumerate(blocks):
        elems = _cell_elements(block.ids)
        element_parts.append(elems)
        region_parts.append(np.full(len(elems), region, dtype=np.int64))
        nx, ny = block.nx, block.ny

        def emit(i: int, j: int, upper: bool, local: int, tag: int):
            e = base + 2 * (i * ny + j) + (1 if upper else 0)
            a, b, mid = LOCAL_EDGES[local]
            row = elems[e - base]
            edge_rows.append((row[a], row[b], row[mid]))
            edge_tags.append(tag)
            edge_owner.append(e)
            edge_local.append(local)

        is_strip = region == STRIP_REGION
        covered = np.zeros(nx, dtype=bool)
        if is_strip:
            for i0, i1 in spans.values():
                covered[i0:i1] = True
        for j in range(ny):
            emit(0, j, True, 2, SIGMA_MINUS if is_strip else WALL)
            emit(nx - 1, j, False, 1, SIGMA_PLUS if is_strip else WALL)
        for i in range(nx):
            if is_strip:
                emit(i, 0, False, 0, WALL)
                if not covered[i]:
                    emit(i, ny - 1, True, 1, WALL)
            else:
                emit(i, ny - 1, True, 1, WALL)
        base += len(elems)

    elements = np.vstack(element_parts)
    mesh = Mesh(
        nodes=nodes,
        elements=elements,
        regions=np.concatenate(region_parts),
        boundary_edges=np.asarray(edge_rows, dtype=np.int64),
        edge_tags=np.asarray(edge_tags, dtype=np.int64),
        edge_elements=np.asarray(edge_owner, dtype=np.int64),
        edge_local=np.asarray(edge_local, dtype=np.int64),
        x_lines=xs,
        x_min=float(x_min),
        x_max=float(x_max),
        h_used=_max_side(nodes, elements),
        chimneys=chimneys,
        chimney_cells=tuple(across),
    )

    jac = mesh.jacobians()
    if np.any(jac <= 0.0):
        raise GeometryError(f"{int(np.sum(jac <= 0.0))} elements have non-positive Jacobian")

    logger.debug("mesh: %d nodes, %d elements, %d boundary edges, h_used=%.4g",
                 mesh.n_nodes, mesh.n_elements, len(mesh.edge_tags), mesh.h_used)
    return mesh


def _max_side(nodes: np.ndarray, elements: np.ndarray) -> float:
    corners = nodes[elements[:, :3]]
    sides = corners - np.roll(corners, -1, axis=1)
    return float(np.sqrt((sides ** 2).sum(axis=2)).max())


def generate_mesh(spec: WaveguideSpec) -> Mesh:
    """Mesh the truncated domain |x| <= L of a validated spec."""
    validator = SpecValidator()
    validator.detect_errors(spec)
    if validator.has_errors():
        problems = "; ".join(d.message for d in validator.errors if d.severity == 'error')
        raise GeometryError(f"invalid spec: {problems}")

    mesh = build_mesh(-spec.trunc_half_length, spec.trunc_half_length, spec.chimneys,
                      spec.mesh_target_h, spec.min_cells_across_chimney,
                      spec.grade_junctions, spec.max_nodes)
    return mesh.with_k(spec.k)


def write_mesh(mesh: Mesh, directory: str, header: str = '') -> List[str]:
    """Write mesh_vertices.txt, mesh_elements.txt and mesh_edges.txt.

    vertices: index x y
    elements: index n0 n1 n2 n3 n4 n5 region   (corners first, then mid-sides)
    edges:    index a b mid tag                 (tag is wall/sigma_minus/sigma_plus)
    """
    os.makedirs(directory, exist_ok=True)
    prefix = ''.join(f"# {line}\n" for line in header.splitlines()) if header else ''
    paths = [os.path.join(directory, name)
             for name in ('mesh_vertices.txt', 'mesh_elements.txt', 'mesh_edges.txt')]

    with open(paths[0], 'w') as fh:
        fh.write(prefix + "# index x y\n")
        for i, (x, y) in enumerate(mesh.nodes):
            fh.write(f"{i} {x:.17g} {y:.17g}\n")
    with open(paths[1], 'w') as fh:
        fh.write(prefix + "# index n0 n1 n2 n3 n4 n5 region\n")
        for i, (row, region) in enumerate(zip(mesh.elements, mesh.regions)):
            fh.write(f"{i} {' '.join(str(int(n)) for n in row)} {int(region)}\n")
    with open(paths[2], 'w') as fh:
        fh.write(prefix + "# index a b mid tag\n")
        for i, (row, tag) in enumerate(zip(mesh.boundary_edges, mesh.edge_tags)):
            fh.write(f"{i} {row[0]} {row[1]} {row[2]} {TAG_NAMES[int(tag)]}\n")
    return paths
