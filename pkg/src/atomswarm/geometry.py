"""Planar geometry for robot configurations.

Positions compare by exact coordinate equality: motion in the engine is rigid
(a mover adopts its target's exact coordinates), so co-location is
representable without tolerances. Multiplicity counting, Voronoi-cell
membership and in-cell sampling all build on that convention.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

__all__ = [
    "Point",
    "OccupancyMap",
    "multiplicities",
    "max_multiplicity_positions",
    "voronoi_cell_contains",
    "default_sampling_radius",
    "sample_point_in_cell",
    "barycenter",
]

# Attempts per radius before the in-cell sampler halves the radius.
DEFAULT_SAMPLE_ATTEMPTS = 1000

# Radius below which a cell is reported as degenerate.
MIN_SAMPLE_RADIUS = 1e-12


@dataclass(frozen=True, order=True)
class Point:
    """A point in the plane. Ordering is lexicographic on (x, y)."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"coordinates must be finite, got ({self.x!r}, {self.y!r})")

    def distance_to(self, other: "Point") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def squared_distance_to(self, other: "Point") -> float:
        dx = self.x - other.x
        dy = self.y - other.y
        return dx * dx + dy * dy


OccupancyMap = dict[Point, int]


def multiplicities(positions: Iterable[Point]) -> OccupancyMap:
    """Count robots per distinct position (exact coordinate equality)."""
    return dict(Counter(positions))


def max_multiplicity_positions(occupancy: OccupancyMap) -> set[Point]:
    """The positions whose count equals the maximum count in the map."""
    if not occupancy:
        raise ValueError("no robots")
    top = max(occupancy.values())
    return {p for p, count in occupancy.items() if count == top}


def voronoi_cell_contains(site: Point, sites: Iterable[Point], q: Point) -> bool:
    """True iff q lies strictly closer to ``site`` than to every other site.

    Cells are open: a point equidistant to two or more sites belongs to no
    cell. A lone site owns the whole plane (minus itself being a valid
    member; the site point itself IS in its own cell by this test, callers
    that need q != site must check separately).
    """
    site_set = set(sites)
    if site not in site_set:
        raise ValueError("site must be one of the given sites")
    d_own = q.squared_distance_to(site)
    return all(d_own < q.squared_distance_to(s) for s in site_set if s != site)


def default_sampling_radius(site: Point, sites: Iterable[Point]) -> float:
    """Half the distance to the nearest other site; 1.0 when the site is alone.

    Every point within this radius of the site lies strictly inside its cell,
    so sampling at this radius never rejects.
    """
    others = [s for s in set(sites) if s != site]
    if not others:
        return 1.0
    return min(site.distance_to(s) for s in others) / 2.0


def sample_point_in_cell(
    site: Point,
    sites: Iterable[Point],
    radius: float,
    rng,
    max_attempts: int = DEFAULT_SAMPLE_ATTEMPTS,
) -> Point:
    """Uniform sample from the open Voronoi cell of ``site``, near the site.

    Draws uniformly from the disk of the given radius centred on the site and
    keeps the first draw that lands strictly inside the cell and is not the
    site itself. If ``max_attempts`` draws in a row reject, the radius is
    halved and sampling restarts; below ``MIN_SAMPLE_RADIUS`` the cell is
    reported as degenerate.

    ``rng`` needs a ``uniform(low, high)`` method (``random.Random`` works).
    """
    site_set = set(sites)
    if site not in site_set:
        raise ValueError("site must be one of the given sites")
    if radius <= 0:
        raise ValueError("radius must be positive")
    while radius >= MIN_SAMPLE_RADIUS:
        for _ in range(max_attempts):
            r = radius * math.sqrt(rng.uniform(0.0, 1.0))
            theta = rng.uniform(0.0, 2.0 * math.pi)
            candidate = Point(site.x + r * math.cos(theta), site.y + r * math.sin(theta))
            if candidate != site and voronoi_cell_contains(site, site_set, candidate):
                return candidate
        radius /= 2.0
    raise ValueError("degenerate cell")


def barycenter(positions: Sequence[Point]) -> Point:
    """Component-wise arithmetic mean of the given positions."""
    if not positions:
        raise ValueError("barycenter of an empty position set")
    n = len(positions)
    return Point(sum(p.x for p in positions) / n, sum(p.y for p in positions) / n)
