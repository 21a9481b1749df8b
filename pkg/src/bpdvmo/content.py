"""Lower Hausdorff content estimates for finite unions of disks.

Contents are reported as intervals ``[lower, upper]``:

* ``lower`` comes from monotonicity and the closed form ``M(B) = r**d`` of a
  single disk, so it is at least the largest ``r**d`` among the disks; for
  ``d = 1`` it is raised to half the longest orthogonal projection of the
  union, which agrees with the closed form on a single disk;
* ``upper`` is the cost ``sum h(side)`` of the cheapest dyadic square cover with
  ``h(t) = t**d`` found by a quadtree search.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, ResourceError
from .geometry import DEFAULT_SQUARE_CAP, Disk, DyadicSquare, dyadic_cover

DEFAULT_SEARCH_DEPTH = 10


def _check_dimension(d: float) -> float:
    d = float(d)
    if not (d == 1.0 or 1.0 < d < 2.0):
        raise DomainError(f"content dimension must be 1 or lie in (1, 2), got {d}")
    return d


@dataclass(frozen=True)
class MeasureFunction:
    """Increasing ``h`` with ``h(0+) = 0``, tagged with its dimension."""

    h: Callable[[float], float]
    dimension: float = 1.0

    def __call__(self, t: float) -> float:
        return self.h(t)

    def check_admissible(self, grid: Optional[Sequence[float]] = None) -> bool:
        """Sampled check of the measure-function conditions.

        For dimension 1 also requires ``h(t) <= t`` and ``h(t)/t`` tending to 0,
        the latter judged by ``h(t)/t`` shrinking along the grid toward 0.
        """
        ts = np.logspace(-12, 0, 61) if grid is None else np.sort(np.asarray(grid, float))
        vals = np.array([self.h(float(t)) for t in ts])
        if np.any(np.diff(vals) < 0) or not np.all(np.isfinite(vals)):
            return False
        if vals[0] > 1e-6 * max(vals[-1], 1.0):
            return False
        if self.dimension == 1.0:
            if np.any(vals > ts * (1 + 1e-12)):
                return False
            ratio = vals / ts
            return bool(ratio[0] < 0.5 * ratio[-1] or ratio[-1] == 0)
        return True

    @classmethod
    def power(cls, d: float) -> "MeasureFunction":
        d = _check_dimension(d)
        return cls(lambda t: t ** d, d)


class ContentMethod(str, enum.Enum):
    CLOSED_FORM_DISK = "ClosedFormDisk"
    COVER_SEARCH = "CoverSearch"
    EMPTY = "Empty"


@dataclass(frozen=True)
class ContentEstimate:
    lower: float
    upper: float
    dimension: float
    method: ContentMethod
    # log2 of the closed-form value; keeps deep rule terms exact after underflow
    log2_value: Optional[float] = None

    def __post_init__(self):
        if not (0.0 <= self.lower <= self.upper):
            raise DomainError(f"content interval must satisfy 0 <= lower <= upper, got [{self.lower}, {self.upper}]")
        if self.method is ContentMethod.EMPTY and self.upper != 0.0:
            raise DomainError("empty content must be zero")

    @property
    def log2_lower(self) -> float:
        if self.log2_value is not None:
            return self.log2_value
        return math.log2(self.lower) if self.lower > 0 else -math.inf

    @property
    def log2_upper(self) -> float:
        if self.log2_value is not None:
            return self.log2_value
        return math.log2(self.upper) if self.upper > 0 else -math.inf

    def to_json(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "dimension": self.dimension,
                "method": self.method.value}


EMPTY_CONTENT = ContentEstimate(0.0, 0.0, 1.0, ContentMethod.EMPTY)


def content_of_disk(radius: float, dimension: float = 1.0) -> ContentEstimate:
    """Closed form ``M(B) = radius**dimension`` for a closed disk."""
    radius = float(radius)
    if not radius > 0:
        raise DomainError(f"disk radius must be positive, got {radius}")
    d = _check_dimension(dimension)
    v = radius if d == 1.0 else radius ** d
    return ContentEstimate(v, v, d, ContentMethod.CLOSED_FORM_DISK, log2_value=d * math.log2(radius))


def content_from_log2_radius(log2_radius: float, dimension: float = 1.0) -> ContentEstimate:
    d = _check_dimension(dimension)
    lv = d * log2_radius
    v = 2.0 ** lv
    return ContentEstimate(v, v, d, ContentMethod.CLOSED_FORM_DISK, log2_value=lv)


def cover_cost(squares: Sequence[DyadicSquare], h: Callable[[float], float]) -> float:
    return math.fsum(h(q.side) for q in squares)


def _reduce_nested(disks: Sequence[Disk]) -> list[Disk]:
    # drop disks contained in another one (ties keep the first)
    keep = []
    for i, d in enumerate(disks):
        inside = False
        for j, e in enumerate(disks):
            if i != j and e.contains_disk(d) and (not d.contains_disk(e) or j < i):
                inside = True
                break
        if not inside:
            keep.append(d)
    return keep


def projection_lower_bound(disks: Sequence[Disk], n_directions: int = 180) -> float:
    """``max over directions of |projection of the union| / 2``.

    Covering sets of radius ``r_j`` project to intervals of length ``2 r_j``,
    so every cover pays at least half the projected length. Directions are a
    uniform fan plus every line through two centres.
    """
    centers = np.array([x.center for x in disks])
    radii = np.array([x.radius for x in disks])
    angles = list(np.linspace(0.0, np.pi, n_directions, endpoint=False))
    for a in range(len(disks)):
        for b in range(a + 1, len(disks)):
            dz = centers[b] - centers[a]
            if dz != 0:
                angles.append(float(np.angle(dz)))
    best = 0.0
    for theta in angles:
        u = np.cos(theta) * centers.real + np.sin(theta) * centers.imag
        order = np.argsort(u)
        lo, hi = u[order] - radii[order], u[order] + radii[order]
        total, cur_lo, cur_hi = 0.0, lo[0], hi[0]
        for a, b in zip(lo[1:], hi[1:]):
            if a > cur_hi:
                total += cur_hi - cur_lo
                cur_lo, cur_hi = a, b
            else:
                cur_hi = max(cur_hi, b)
        total += cur_hi - cur_lo
        best = max(best, 0.5 * total)
    return best


def optimal_dyadic_cover(disks: Sequence[Disk], h: Callable[[float], float], depth: int,
                         cap: int = DEFAULT_SQUARE_CAP) -> tuple[float, list[DyadicSquare]]:
    """Cheapest cover by nonoverlapping dyadic squares of level ``<= depth``.

    Quadtree recursion from the level-0 squares meeting the union: each square
    either pays ``h(side)`` or is replaced by the best covers of its children
    that meet the union. A square inside a single disk is never split, since
    for ``h(t) = t**d`` with ``d <= 2`` splitting it cannot lower the cost.
    """
    visited = 0

    def best(q, near):
        nonlocal visited
        visited += 1
        if visited > cap:
            raise ResourceError(f"cover search visited more than {cap} squares")
        own = h(q.side)
        if q.level >= depth or any(q.inside_disk(x) for x in near):
            return own, [q]
        total, chosen = 0.0, []
        for child in q.children():
            hit = [x for x in near if child.intersects_disk(x)]
            if hit:
                c_cost, c_sq = best(child, hit)
                total += c_cost
                chosen.extend(c_sq)
                if total >= own:
                    return own, [q]
        return total, chosen

    squares = []
    for q in dyadic_cover(disks, 0, cap):
        _, sq = best(q, [x for x in disks if q.intersects_disk(x)])
        squares.extend(sq)
    return math.fsum(h(q.side) for q in squares), squares


def content_interval(disks: Sequence[Disk], dimension: float = 1.0,
                     search_depth: Optional[int] = None) -> ContentEstimate:
    """Certified interval for the lower ``d``-dimensional content of a union of disks.

    ``search_depth`` is the finest dyadic level explored; by default it is
    chosen so the smallest disk is resolved a few levels below its own size.
    A union that reduces to one disk (after dropping nested disks) uses the
    closed form.
    """
    d = _check_dimension(dimension)
    if not disks:
        return ContentEstimate(0.0, 0.0, d, ContentMethod.EMPTY)
    disks = _reduce_nested(list(disks))
    if len(disks) == 1:
        return content_of_disk(disks[0].radius, d)
    if search_depth is None:
        rmin = min(x.radius for x in disks)
        search_depth = max(DEFAULT_SEARCH_DEPTH, math.ceil(-math.log2(rmin)) + 4)
    if search_depth < 1:
        raise DomainError("search_depth must be >= 1")
    lower = max(x.radius ** d for x in disks)
    if d == 1.0:
        lower = max(lower, projection_lower_bound(disks))
    upper, _ = optimal_dyadic_cover(disks, lambda t: t ** d, search_depth)
    return ContentEstimate(lower, upper, d, ContentMethod.COVER_SEARCH)
