"""
Chimney and waveguide layout types.

The perturbed waveguide is the unit strip (0, 1) in y, open in x, with thin
vertical rectangles ("chimneys") attached to its upper wall.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Sequence, Tuple

import numpy as np

STRIP_HEIGHT = 1.0
RESONANCE_BAND = 1e-3


@dataclass(frozen=True)
class Chimney:
    x_center: float
    height: float
    width: float

    @property
    def left(self) -> float:
        return self.x_center - 0.5 * self.width

    @property
    def right(self) -> float:
        return self.x_center + 0.5 * self.width

    @property
    def top(self) -> float:
        return STRIP_HEIGHT + self.height

    def mirrored(self) -> "Chimney":
        return replace(self, x_center=-self.x_center)


@dataclass(frozen=True)
class WaveguideSpec:
    k: float
    chimneys: Tuple[Chimney, ...] = field(default_factory=tuple)
    trunc_half_length: float = 5.0
    dtn_terms: int = 20
    mesh_target_h: float = 0.1
    min_cells_across_chimney: int = 4
    grade_junctions: bool = True
    max_nodes: int = 2_000_000

    def __post_init__(self):
        object.__setattr__(self, 'chimneys', tuple(self.chimneys))

    @property
    def margin(self) -> float:
        """Clearance between chimneys and x = ±L: one wavelength."""
        return 2.0 * math.pi / self.k

    @property
    def positions(self) -> Tuple[float, ...]:
        return tuple(c.x_center for c in self.chimneys)

    @property
    def heights(self) -> Tuple[float, ...]:
        return tuple(c.height for c in self.chimneys)

    def with_heights(self, heights: Sequence[float]) -> "WaveguideSpec":
        """Return a copy whose chimneys carry the given heights."""
        if len(heights) != len(self.chimneys):
            raise ValueError(f"expected {len(self.chimneys)} heights, got {len(heights)}")
        chimneys = tuple(replace(c, height=float(h)) for c, h in zip(self.chimneys, heights))
        return replace(self, chimneys=chimneys)


def three_chimney_spec(k: float, eps: float, positions: Sequence[float],
                       heights: Sequence[float] = None, **options) -> WaveguideSpec:
    """Build the spec of the design problem: three chimneys of width eps."""
    if heights is None:
        heights = [math.pi / k] * len(positions)
    chimneys = tuple(Chimney(float(x), float(h), float(eps)) for x, h in zip(positions, heights))
    return WaveguideSpec(k=float(k), chimneys=chimneys, **options)


def reflect_spec(spec: WaveguideSpec) -> WaveguideSpec:
    """Mirror image of a spec under x -> -x (chimney order reversed)."""
    return replace(spec, chimneys=tuple(c.mirrored() for c in reversed(spec.chimneys)))


def resonant_heights(k: float, up_to: float) -> Tuple[float, ...]:
    """Heights (2p+1)pi/(2k) not exceeding `up_to`."""
    quarter = math.pi / (2.0 * k)
    values = []
    p = 0
    while (2 * p + 1) * quarter <= up_to:
        values.append((2 * p + 1) * quarter)
        p += 1
    return tuple(values)


def resonance_distance(k: float, height: float) -> float:
    """Distance from `height` to the nearest resonant height (2p+1)pi/(2k)."""
    quarter = math.pi / (2.0 * k)
    p = max(0, round((height / quarter - 1.0) / 2.0))
    return abs(height - (2 * p + 1) * quarter)


def is_near_resonant(k: float, height: float, band: float = RESONANCE_BAND) -> bool:
    return resonance_distance(k, height) < band * math.pi / (2.0 * k)


def random_spec(rng, k_range: Tuple[float, float] = (0.3 * math.pi, 0.9 * math.pi),
                max_chimneys: int = 3, widths: Sequence[float] = (0.2, 0.3),
                **options) -> WaveguideSpec:
    """Draw a non-resonant layout with 1..max_chimneys chimneys and a long enough L."""
    k = float(rng.uniform(*k_range))
    count = int(rng.integers(1, max_chimneys + 1))
    width = float(rng.choice(widths))
    slots = np.arange(-1.5, 1.5 + 1e-9, 0.75)
    centres = np.sort(rng.choice(slots, size=count, replace=False))
    chimneys = []
    for x in centres:
        while True:
            h = float(rng.uniform(0.3, 1.5))
            if resonance_distance(k, h) > 0.05 * math.pi / (2.0 * k):
                break
        chimneys.append(Chimney(float(x), h, width))
    reach = max(max(abs(c.left), abs(c.right)) for c in chimneys)
    half_length = 0.5 * math.ceil(2.0 * (reach + 2.0 * math.pi / k + 0.5))
    options.setdefault('trunc_half_length', half_length)
    return WaveguideSpec(k=k, chimneys=tuple(chimneys), **options)
