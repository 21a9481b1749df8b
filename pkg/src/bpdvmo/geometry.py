"""Planar set model: disks, dyadic annuli, dyadic squares and roadrunner regions.

Points are plain Python ``complex`` numbers. Annuli are indexed around a base
point ``x0``::

    A_n = {2**-(n+1) <= |z - x0| <= 2**-n},   n >= 1

A :class:`RegionSpec` describes ``X = D \\ (union of removed closed disks)``
where ``D`` is the unit disk about ``x0`` and every removed disk is assigned to
exactly one annulus, either explicitly or through a :class:`RadiusRule`.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple, Optional, Sequence

from .errors import DomainError, GeometryError, ResourceError

#: Explicit disks smaller than this are rejected; rule disks below it are
#: kept symbolically only.
MIN_RADIUS = 2.0 ** -60
DEFAULT_N_MAX = 64
DEFAULT_SQUARE_CAP = 2_000_000

# relative slack for containment checks on decimal (JSON) input
_CONTAIN_RTOL = 1e-12


def _check_point(z, what="point") -> complex:
    z = complex(z)
    if not cmath.isfinite(z):
        raise DomainError(f"{what} must be finite, got {z!r}")
    return z


@dataclass(frozen=True)
class Disk:
    center: complex
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _check_point(self.center, "disk center"))
        r = float(self.radius)
        if not (r > 0 and math.isfinite(r)):
            raise DomainError(f"disk radius must be positive and finite, got {self.radius!r}")
        object.__setattr__(self, "radius", r)

    def contains_point(self, z: complex) -> bool:
        return abs(z - self.center) <= self.radius

    def contains_disk(self, other: "Disk") -> bool:
        return abs(other.center - self.center) + other.radius <= self.radius

    def to_json(self) -> dict:
        return {"center": [self.center.real, self.center.imag], "radius": self.radius}


@dataclass(frozen=True)
class Annulus:
    base_point: complex
    index: int

    def __post_init__(self):
        if int(self.index) != self.index or self.index < 1:
            raise DomainError(f"annulus index must be an integer >= 1, got {self.index!r}")

    @property
    def outer(self) -> float:
        return 2.0 ** -self.index

    @property
    def inner(self) -> float:
        return 2.0 ** -(self.index + 1)

    @property
    def midline(self) -> float:
        return 0.5 * (self.inner + self.outer)

    def contains_point(self, z: complex) -> bool:
        rho = abs(z - self.base_point)
        return self.inner <= rho <= self.outer

    def contains_disk(self, disk: Disk, rtol: float = 0.0) -> bool:
        dist = abs(disk.center - self.base_point)
        slack = rtol * self.outer
        return dist - disk.radius >= self.inner - slack and dist + disk.radius <= self.outer + slack


def annulus_of(z: complex, x0: complex = 0j) -> Optional[int]:
    """Index ``n >= 1`` of the dyadic annulus containing ``z``, or ``None``.

    Points on a shared boundary circle go to the smaller index. Uses the binary
    exponent of ``|z - x0|`` so powers of two are classified exactly.
    """
    rho = abs(complex(z) - complex(x0))
    if rho == 0.0 or rho > 0.5:
        return None
    _, e = math.frexp(rho)
    return max(1, -e)


class DyadicSquare(NamedTuple):
    level: int
    i: int
    j: int

    @property
    def side(self) -> float:
        return 2.0 ** -self.level

    @property
    def bounds(self):
        s = self.side
        return self.i * s, self.j * s, (self.i + 1) * s, (self.j + 1) * s

    @property
    def center(self) -> complex:
        s = self.side
        return complex((self.i + 0.5) * s, (self.j + 0.5) * s)

    def children(self):
        k, i, j = self.level + 1, 2 * self.i, 2 * self.j
        return (DyadicSquare(k, i, j), DyadicSquare(k, i + 1, j),
                DyadicSquare(k, i, j + 1), DyadicSquare(k, i + 1, j + 1))

    def intersects_disk(self, disk: Disk) -> bool:
        x0, y0, x1, y1 = self.bounds
        cx, cy = disk.center.real, disk.center.imag
        dx = max(x0 - cx, 0.0, cx - x1)
        dy = max(y0 - cy, 0.0, cy - y1)
        # open overlap: squares touching the disk at one point are not needed in a cover
        dist = math.hypot(dx, dy)
        if abs(dist - disk.radius) > 1e-12 * disk.radius:
            return dist < disk.radius
        # near tangency decide exactly; float inputs are exact rationals
        fx, fy = Fraction(cx), Fraction(cy)
        ex = max(Fraction(x0) - fx, Fraction(0), fx - Fraction(x1))
        ey = max(Fraction(y0) - fy, Fraction(0), fy - Fraction(y1))
        return ex * ex + ey * ey < Fraction(disk.radius) ** 2

    def inside_disk(self, disk: Disk) -> bool:
        x0, y0, x1, y1 = self.bounds
        c = disk.center
        return all(abs(complex(x, y) - c) <= disk.radius for x in (x0, x1) for y in (y0, y1))


def dyadic_cover(disks: Sequence[Disk], level: int, cap: int = DEFAULT_SQUARE_CAP) -> list[DyadicSquare]:
    """All level-``k`` dyadic squares whose interior meets one of the disks.

    Result is sorted by ``(i, j)``. Raises :class:`ResourceError` when the
    candidate count would exceed ``cap``.
    """
    if level < 0 or int(level) != level:
        raise DomainError(f"level must be a nonnegative integer, got {level!r}")
    if not disks:
        raise DomainError("dyadic_cover needs at least one disk")
    s = 2.0 ** -level
    boxes = []
    total = 0
    for d in disks:
        # one square of padding; the overlap test decides the borders
        i0 = math.floor((d.center.real - d.radius) / s) - 1
        i1 = math.floor((d.center.real + d.radius) / s) + 1
        j0 = math.floor((d.center.imag - d.radius) / s) - 1
        j1 = math.floor((d.center.imag + d.radius) / s) + 1
        boxes.append((d, i0, i1, j0, j1))
        total += (i1 - i0 + 1) * (j1 - j0 + 1)
        if total > cap:
            raise ResourceError(
                f"dyadic cover at level {level} needs more than {cap} candidate squares")
    found = set()
    for d, i0, i1, j0, j1 in boxes:
        for i in range(i0, i1 + 1):
            for j in range(j0, j1 + 1):
                q = DyadicSquare(level, i, j)
                if q not in found and q.intersects_disk(d):
                    found.add(q)
    return sorted(found, key=lambda q: (q.i, q.j))


@dataclass(frozen=True)
class RadiusRule:
    """``r_n = c * 2**(-beta*n) * n**(-s)``.

    ``n0`` is the first annulus from which the rule disk must fit inside
    ``A_n`` (``r_n < 2**-(n+2)``); when omitted it is the smallest index from
    which the rule fits for good. Annuli below ``n0`` carry "head" disks that
    are exempt from the containment check (see :meth:`RegionSpec.rule_disk`).
    """

    c: float
    beta: float
    s: float
    n0: Optional[int] = None

    def __post_init__(self):
        for name in ("c", "beta", "s"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise DomainError(f"radius rule {name} must be finite")
            object.__setattr__(self, name, v)
        if self.c <= 0 or self.beta <= 0:
            raise DomainError("radius rule needs c > 0 and beta > 0")
        last = self._check_horizon()
        bad = [n for n in range(1, last + 1) if not self.fits(n)]
        if self.n0 is None:
            n0 = bad[-1] + 1 if bad else 1
        else:
            n0 = int(self.n0)
            if n0 < 1:
                raise DomainError("radius rule n0 must be >= 1")
            late = [n for n in bad if n >= n0]
            if late:
                raise GeometryError(
                    f"rule radius {self.radius(late[0]):.6g} does not fit (needs < {2.0 ** -(late[0] + 2):.6g})",
                    annulus=late[0])
        object.__setattr__(self, "n0", n0)

    def _check_horizon(self) -> int:
        # past the returned index the fit margin is monotone, so a finite scan decides
        if self.beta > 1:
            turn = 0.0 if self.s >= 0 else -self.s / ((self.beta - 1) * math.log(2))
            return max(4096, min(10 ** 6, math.ceil(turn) + 1))
        if self.beta == 1 and self.s >= 0:
            return 4096
        raise GeometryError("rule disks eventually outgrow their annuli (need beta > 1, or beta == 1 and s >= 0)")

    def log2_radius(self, n: int) -> float:
        return math.log2(self.c) - self.beta * n - self.s * math.log2(n)

    def radius(self, n: int) -> float:
        return 2.0 ** self.log2_radius(n)

    def fits(self, n: int) -> bool:
        return self.log2_radius(n) < -(n + 2)

    def to_json(self) -> dict:
        return {"c": self.c, "beta": self.beta, "s": self.s, "n0": self.n0}


@dataclass(frozen=True)
class RegionSpec:
    """Unit disk about ``x0`` minus closed disks assigned to dyadic annuli.

    ``annuli`` holds explicitly listed ``(n, disks)`` pairs; a ``rule`` adds one
    disk to every other annulus. Rule disks are centred on the ray from ``x0``
    at angle ``rule_angle``, on the annulus midline for ``n >= rule.n0`` and
    tangent to the inner circle for head annuli ``n < rule.n0``.
    """

    x0: complex = 0j
    annuli: tuple = ()
    rule: Optional[RadiusRule] = None
    rule_angle: float = 0.0
    n_max: int = DEFAULT_N_MAX
    _explicit: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "x0", _check_point(self.x0, "base point"))
        if self.n_max < 1:
            raise DomainError("n_max must be >= 1")
        explicit = {}
        norm = []
        for n, disks in self.annuli:
            if int(n) != n or n < 1:
                raise GeometryError("annulus index must be a positive integer", annulus=n)
            n = int(n)
            if n in explicit:
                raise GeometryError("duplicate annulus index", annulus=n)
            if n > self.n_max:
                raise GeometryError(f"index exceeds materialization cap n_max={self.n_max}", annulus=n)
            disks = tuple(d if isinstance(d, Disk) else Disk(*d) for d in disks)
            ann = Annulus(self.x0, n)
            for d in disks:
                if d.radius < MIN_RADIUS:
                    raise GeometryError(f"disk radius {d.radius:.3g} below 2^-60", annulus=n)
                if not ann.contains_disk(d, rtol=_CONTAIN_RTOL):
                    raise GeometryError(
                        f"disk at {d.center} radius {d.radius:.6g} not contained in the annulus", annulus=n)
            explicit[n] = disks
            norm.append((n, disks))
        object.__setattr__(self, "annuli", tuple(sorted(norm)))
        object.__setattr__(self, "_explicit", explicit)
        if self.rule is not None:
            for n in range(1, self.rule.n0):
                if n in explicit:
                    continue
                r = self.rule.radius(n)
                if Annulus(self.x0, n).inner + 2 * r > 1.0:
                    raise GeometryError(f"head rule disk radius {r:.6g} leaves the unit disk", annulus=n)

    @property
    def explicit_indices(self) -> list[int]:
        return list(self._explicit)

    def is_explicit(self, n: int) -> bool:
        return n in self._explicit

    def rule_disk(self, n: int) -> Disk:
        """The (unmaterialized) rule disk assigned to annulus ``n``."""
        if self.rule is None:
            raise DomainError("region has no radius rule")
        r = self.rule.radius(n)
        ann = Annulus(self.x0, n)
        dist = ann.midline if n >= self.rule.n0 else ann.inner + r
        return Disk(self.x0 + dist * cmath.exp(1j * self.rule_angle), r)

    @property
    def materialization_limit(self) -> int:
        """Largest annulus index whose disks can be materialized."""
        last = max(self._explicit, default=0)
        if self.rule is not None:
            n = 1
            while n <= self.n_max and self.rule.log2_radius(n) >= -60:
                n += 1
            last = max(last, n - 1)
        return min(last, self.n_max)

    def to_json(self) -> dict:
        return {
            "x0": [self.x0.real, self.x0.imag],
            "annuli": [{"n": n, "disks": [d.to_json() for d in disks]} for n, disks in self.annuli],
            "rule": None if self.rule is None else self.rule.to_json(),
            "rule_angle": self.rule_angle,
            "n_max": self.n_max,
        }

    @classmethod
    def from_json(cls, data: dict) -> "RegionSpec":
        """Build from the region JSON schema; errors name the offending annulus."""
        if not isinstance(data, dict):
            raise DomainError("region JSON must be an object")
        try:
            x0 = complex(*data.get("x0", [0.0, 0.0]))
        except TypeError as exc:
            raise DomainError(f"x0 must be [re, im]: {exc}") from None
        annuli = []
        for entry in data.get("annuli", []) or []:
            n = entry.get("n")
            try:
                disks = [Disk(complex(*d["center"]), d["radius"]) for d in entry.get("disks", [])]
            except (KeyError, TypeError, DomainError) as exc:
                raise GeometryError(f"malformed disk: {exc}", annulus=n) from None
            annuli.append((n, disks))
        rule = data.get("rule")
        if rule is not None:
            try:
                rule = RadiusRule(rule["c"], rule["beta"], rule["s"], rule.get("n0"))
            except KeyError as exc:
                raise DomainError(f"rule needs key {exc}") from None
        return cls(x0=x0, annuli=tuple(annuli), rule=rule,
                   rule_angle=float(data.get("rule_angle", 0.0)),
                   n_max=int(data.get("n_max", DEFAULT_N_MAX)))


def complement_in_annulus(region: RegionSpec, n: int) -> list[Disk]:
    """Removed disks assigned to annulus ``n`` (empty when ``A_n \\ X`` is empty)."""
    if int(n) != n or n < 1:
        raise DomainError(f"annulus index must be >= 1, got {n!r}")
    if region.is_explicit(n):
        return list(region._explicit[n])
    if region.rule is None:
        return []
    if n > region.n_max:
        raise ResourceError(f"annulus {n} beyond materialization cap n_max={region.n_max}")
    if region.rule.log2_radius(n) < -60:
        raise ResourceError(f"rule disk of annulus {n} is below the 2^-60 radius floor")
    return [region.rule_disk(n)]


def removed_disks(region: RegionSpec, upto: Optional[int] = None) -> list[tuple[int, Disk]]:
    """All materializable ``(n, disk)`` pairs with ``n <= upto``."""
    last = region.materialization_limit if upto is None else min(upto, region.materialization_limit)
    out = []
    for n in range(1, last + 1):
        for d in complement_in_annulus(region, n):
            out.append((n, d))
    return out


def point_in_region(z: complex, region: RegionSpec, disks: Optional[Iterable[Disk]] = None) -> bool:
    if abs(z - region.x0) >= 1.0:
        return False
    if disks is None:
        disks = [d for _, d in removed_disks(region)]
    return not any(d.contains_point(z) for d in disks)
