"""Mean oscillation on squares, BMO seminorm probes and the BMO(X) norm.

All integrals use an ``m x m`` midpoint tensor rule on axis-aligned squares
("cubes"). A square's scale ``delta`` is its side length.

The BMO(X) norm proper is an infimum over extensions and is not computable;
everything here works on a given representative, so probe maxima are lower
estimates of that representative's seminorm.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, QuadratureError
from .geometry import Disk, RegionSpec, removed_disks

DEFAULT_SCALES = tuple(2.0 ** -j for j in range(9))
DEFAULT_NODES = 16
DEFAULT_GRID = 16
POLE_REFINEMENT = 4


@dataclass(frozen=True)
class SampledFunction:
    """A vectorized evaluation rule ``f(z)`` on complex ndarrays.

    ``poles`` lists isolated singular points; squares within two side lengths
    of one are integrated with ``POLE_REFINEMENT`` times as many nodes per axis.
    """

    func: Callable[[np.ndarray], np.ndarray]
    domain: str = "plane"
    smoothness: str = "generic"
    poles: tuple = ()

    def __call__(self, z):
        return np.asarray(self.func(np.asarray(z, dtype=complex)), dtype=complex)


def as_sampled(f) -> SampledFunction:
    return f if isinstance(f, SampledFunction) else SampledFunction(f)


@dataclass(frozen=True)
class Cube:
    center: complex
    side: float

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        if not (self.side > 0 and math.isfinite(self.side)):
            raise DomainError(f"cube side must be positive, got {self.side!r}")

    @property
    def area(self) -> float:
        return self.side * self.side

    @property
    def radius(self) -> float:
        return 0.5 * self.side

    @property
    def corners(self):
        h = 0.5 * self.side
        c = self.center
        return (c + complex(-h, -h), c + complex(h, -h), c + complex(h, h), c + complex(-h, h))

    def distance_to(self, z: complex) -> float:
        h = 0.5 * self.side
        dx = max(abs(z.real - self.center.real) - h, 0.0)
        dy = max(abs(z.imag - self.center.imag) - h, 0.0)
        return math.hypot(dx, dy)

    def nodes(self, m: int) -> np.ndarray:
        offs = (np.arange(m) + 0.5) / m - 0.5
        x = self.center.real + self.side * offs
        y = self.center.imag + self.side * offs
        return (x[None, :] + 1j * y[:, None]).ravel()

    def to_json(self) -> dict:
        return {"center": [self.center.real, self.center.imag], "side": self.side}


def _node_count(f: SampledFunction, Q: Cube, m: int) -> int:
    if f.poles and min(Q.distance_to(p) for p in f.poles) <= 2 * Q.side:
        return POLE_REFINEMENT * m
    return m


def _values(f: SampledFunction, Q: Cube, m: int) -> np.ndarray:
    if m < 2:
        raise DomainError(f"need at least 2 nodes per axis, got {m}")
    z = Q.nodes(_node_count(f, Q, m))
    v = f(z)
    bad = ~np.isfinite(v)
    if bad.any():
        node = complex(z[np.argmax(bad)])
        raise QuadratureError(f"non-finite value at quadrature node {node}", node=node, cube=Q)
    return v


def mean_value(f, Q: Cube, nodes: int = 64) -> complex:
    """Midpoint-rule approximation of ``(1/|Q|) * integral of f over Q``."""
    return complex(_values(as_sampled(f), Q, nodes).mean())


def _oscillation(v: np.ndarray) -> float:
    return float(np.abs(v - v.mean()).mean())


def mean_oscillation(f, Q: Cube, nodes: int = 64) -> float:
    """Midpoint-rule approximation of ``(1/|Q|) * integral of |f - f_Q|``."""
    return _oscillation(_values(as_sampled(f), Q, nodes))


@dataclass
class OscillationReport:
    bmo_seminorm_estimate: float
    modulus_samples: list              # (delta, sup of Omega over probed sides <= delta)
    per_scale_max: list                # (delta, max Omega over squares of side delta)
    vmo_consistent: bool
    cubes_examined: int
    nodes: int
    argmax: Optional[Cube] = None

    def to_json(self) -> dict:
        return {
            "bmo_seminorm_estimate": self.bmo_seminorm_estimate,
            "modulus": [{"delta": d, "omega": w} for d, w in self.modulus_samples],
            "per_scale_max": [{"delta": d, "omega": w} for d, w in self.per_scale_max],
            "vmo_consistent": self.vmo_consistent,
            "cubes_examined": self.cubes_examined,
            "nodes": self.nodes,
            "argmax": None if self.argmax is None else self.argmax.to_json(),
        }

    def modulus_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["delta", "omega"])
        for d, v in self.modulus_samples:
            w.writerow([repr(d), repr(v)])
        return buf.getvalue()


def _positions(lo: float, hi: float, delta: float, grid: int) -> list[float]:
    # left edges of aligned squares in [lo, hi], thinned to at most `grid`, plus half shifts
    count = int(math.floor((hi - lo) / delta * (1 + 1e-12)))
    if count < 1:
        return []
    if count <= grid:
        aligned = [lo + k * delta for k in range(count)]
    else:
        step = (count - 1) / (grid - 1) if grid > 1 else 0
        aligned = [lo + round(k * step) * delta for k in range(grid)]
    shifted = [x + 0.5 * delta for x in aligned if x + 1.5 * delta <= hi + 1e-12 * delta]
    return aligned + shifted


def probe_cubes(window: Cube, delta: float, grid: int) -> list[Cube]:
    """Squares of side ``delta`` tiling ``window`` with half-side shifted copies."""
    x0 = window.center.real - window.radius
    y0 = window.center.imag - window.radius
    xs = _positions(x0, x0 + window.side, delta, grid)
    ys = _positions(y0, y0 + window.side, delta, grid)
    h = 0.5 * delta
    return [Cube(complex(x + h, y + h), delta) for y in ys for x in xs]


def _vmo_flag(modulus: list, estimate: float, tail: int, ratio: float) -> bool:
    if estimate == 0.0:
        return True
    vals = [w for _, w in modulus[-tail:]]
    # modulus is sorted by decreasing delta
    if any(b > a * (1 + 1e-9) for a, b in zip(vals, vals[1:])):
        return False
    return vals[-1] <= ratio * estimate * (1 + 1e-9)


def bmo_seminorm(f, window: Cube, scales: Sequence[float] = DEFAULT_SCALES,
                 per_scale_grid: int = DEFAULT_GRID, nodes: int = DEFAULT_NODES,
                 admissible: Optional[Callable[[Cube], bool]] = None,
                 vmo_tail: int = 3, vmo_ratio: float = 0.25) -> OscillationReport:
    """Probe ``Omega(f, Q)`` over a multi-scale family of squares in ``window``.

    For each side ``delta`` the window is tiled by squares (thinned to
    ``per_scale_grid`` positions per axis, plus half-side shifts). ``admissible``
    can exclude squares, e.g. those leaving a region. The modulus
    ``Omega_f(delta)`` is the running supremum over probed sides ``<= delta``.
    ``vmo_consistent`` requires the last ``vmo_tail`` modulus samples to be
    nonincreasing and the smallest to be at most ``vmo_ratio`` times the
    estimate.
    """
    f = as_sampled(f)
    scales = [float(s) for s in scales]
    if not scales or any(s <= 0 for s in scales):
        raise DomainError("scales must be positive")
    if any(b >= a for a, b in zip(scales, scales[1:])):
        raise DomainError("scales must be strictly descending")
    per_scale, examined, best, arg = [], 0, 0.0, None
    for delta in scales:
        top = 0.0
        for Q in probe_cubes(window, delta, per_scale_grid):
            if admissible is not None and not admissible(Q):
                continue
            try:
                w = mean_oscillation(f, Q, nodes)
            except QuadratureError as exc:
                exc.cube = Q
                raise
            examined += 1
            if w > top:
                top = w
            if w > best:
                best, arg = w, Q
        per_scale.append((delta, top))
    modulus, run = [], 0.0
    for delta, top in reversed(per_scale):
        run = max(run, top)
        modulus.append((delta, run))
    modulus.reverse()
    return OscillationReport(best, modulus, per_scale, _vmo_flag(modulus, best, vmo_tail, vmo_ratio),
                             examined, nodes, arg)


def merge_reports(reports: Sequence[OscillationReport]) -> OscillationReport:
    """Combine probes of one function over several windows (supremum of each column)."""
    if not reports:
        raise DomainError("nothing to merge")
    best = max(reports, key=lambda r: r.bmo_seminorm_estimate)
    table: dict = {}
    for r in reports:
        for d, w in r.per_scale_max:
            table[d] = max(table.get(d, 0.0), w)
    per_scale = sorted(table.items(), reverse=True)
    modulus, run = [], 0.0
    for delta, top in reversed(per_scale):
        run = max(run, top)
        modulus.append((delta, run))
    modulus.reverse()
    return OscillationReport(best.bmo_seminorm_estimate, modulus, per_scale,
                             all(r.vmo_consistent for r in reports),
                             sum(r.cubes_examined for r in reports), best.nodes, best.argmax)


def cube_in_region(Q: Cube, region: RegionSpec, disks: Sequence[Disk], margin: float = 1e-9) -> bool:
    """Closed square inside the open unit disk about ``x0`` and off every removed disk.

    Squares within ``margin * radius`` of a disk count as touching it, so
    tangencies are not decided by rounding.
    """
    if any(abs(c - region.x0) >= 1.0 for c in Q.corners):
        return False
    return all(Q.distance_to(d.center) > d.radius * (1.0 + margin) for d in disks)


def region_area_and_integral(f, region: RegionSpec, grid: int = 1024) -> tuple[float, complex]:
    """Midpoint quadrature of ``area(X)`` and ``integral_X f dA``.

    Nodes of a ``grid x grid`` lattice on the square ``[-1, 1]^2 + x0`` are kept
    iff they lie in the open unit disk and in no removed closed disk.
    """
    f = as_sampled(f)
    h = 2.0 / grid
    offs = -1.0 + (np.arange(grid) + 0.5) * h
    disks = [d for _, d in removed_disks(region)]
    area = 0.0
    total = 0j
    # row blocks keep memory flat for fine grids
    for start in range(0, grid, 128):
        y = offs[start:start + 128]
        z = region.x0 + (offs[None, :] + 1j * y[:, None]).ravel()
        keep = np.abs(z - region.x0) < 1.0
        for d in disks:
            keep &= np.abs(z - d.center) > d.radius
        zk = z[keep]
        if zk.size:
            v = f(zk)
            if not np.all(np.isfinite(v)):
                node = complex(zk[np.argmax(~np.isfinite(v))])
                raise QuadratureError(f"non-finite value at quadrature node {node}", node=node)
            total += complex(v.sum())
        area += float(keep.sum())
    return area * h * h, total * h * h


@dataclass
class RegionNorm:
    seminorm: OscillationReport
    integral: complex
    area: float
    restricted: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def value(self) -> float:
        return self.seminorm.bmo_seminorm_estimate + abs(self.integral)

    def to_json(self) -> dict:
        return {"norm": self.value, "seminorm": self.seminorm.to_json(),
                "integral": [self.integral.real, self.integral.imag],
                "area": self.area, "restricted_to_region": self.restricted}


def bmo_region_norm(f, region: RegionSpec, scales: Sequence[float] = DEFAULT_SCALES,
                    per_scale_grid: int = DEFAULT_GRID, nodes: int = DEFAULT_NODES,
                    area_grid: int = 1024, restrict_to_region: bool = False) -> RegionNorm:
    """Seminorm over the window ``[-1, 1]^2 + x0`` plus ``|integral_X f dA|``.

    With ``restrict_to_region`` only squares inside ``X`` are probed, which is
    what functions with poles in the removed disks need.
    """
    f = as_sampled(f)
    window = Cube(region.x0, 2.0)
    admissible = None
    if restrict_to_region:
        disks = [d for _, d in removed_disks(region)]
        admissible = lambda Q: cube_in_region(Q, region, disks)  # noqa: E731
    rep = bmo_seminorm(f, window, scales, per_scale_grid, nodes, admissible)
    area, integral = region_area_and_integral(f, region, area_grid)
    return RegionNorm(rep, integral, area, restrict_to_region)
