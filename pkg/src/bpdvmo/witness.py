"""Witness functions for the divergent case and derivative/norm evidence tables.

For a region whose content series diverges, every annulus ``A_m`` carries a
discrete Frostman-type measure ``nu_m`` (equal atoms on the boundary circle of
its removed disk, total mass ``eps_m * M(A_m \\ X)``) and the weighted Cauchy
transform::

    f_m(z) = sum_j w_j * (zeta_j / |zeta_j|)**(t+1) / (zeta_j - z)

(coordinates relative to the base point), whose ``t``-th derivative at the
base point is ``t! * sum_j w_j / |zeta_j|**(t+1)``. Block sums
``g_n = f_n + ... + f_p`` are cut where the weighted content sum first reaches
1, so ``g_n^(t)(x0)`` stays bounded below while the oscillation of ``g_n``
shrinks with ``eps_n``.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (ConstructionError, ConsistencyError, DomainError, EvaluationError,
                     ResourceError, ValidationError)
from .geometry import Disk, RegionSpec, complement_in_annulus, removed_disks
from .oscillation import (DEFAULT_NODES, Cube, OscillationReport, SampledFunction, bmo_seminorm,
                          cube_in_region, merge_reports)
from .series import Verdict, annulus_content, classify_symbolic

DEFAULT_ATOMS = 256
GROWTH_SLACK = 0.10
DERIVATIVE_RTOL = 1e-6
CONTOUR_NODES = 256
# far-field expansion: |z - c| >= FAR_FACTOR * R, truncated after MULTIPOLE_TERMS terms
FAR_FACTOR = 4.0
MULTIPOLE_TERMS = 32
_CHUNK = 4096

WORKERS_ENV = "BPDVMO_WORKERS"


class NoWitnessError(ValidationError):
    """The criterion series converges, so there is nothing to witness."""


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _ordered_map(fn, items):
    items = list(items)
    n = _workers()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class LogDecay:
    """``eps_n = 1 / (1 + kappa * log(n + shift))``: decreasing, and for the
    harmonic roadrunner ``sum eps_n / n`` still diverges."""

    kappa: float = 0.2
    shift: float = 1.0

    def __post_init__(self):
        if self.kappa <= 0 or self.shift < 0:
            raise DomainError("LogDecay needs kappa > 0 and shift >= 0")

    def __call__(self, n: int) -> float:
        return 1.0 / (1.0 + self.kappa * math.log(n + self.shift))


@dataclass(frozen=True)
class GrowthCertificate:
    worst_ratio: float          # max over sampled balls of nu(B) / (eps * rho)
    worst_center: complex
    worst_radius: float
    balls: int

    def ok(self, slack: float = GROWTH_SLACK) -> bool:
        return self.worst_ratio <= 1.0 + slack


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    positions: np.ndarray
    weights: np.ndarray
    growth: float
    annulus: Optional[int] = None
    base_point: complex = 0j
    supports: tuple = ()            # disks whose boundary circles carry the atoms

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=complex).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if pos.shape != w.shape or pos.size == 0:
            raise DomainError("measure needs matching, nonempty positions and weights")
        if np.any(w < 0) or not np.all(np.isfinite(w)) or not np.all(np.isfinite(pos)):
            raise DomainError("measure weights must be finite and nonnegative")
        if not w.sum() > 0:
            raise DomainError("measure must have positive mass")
        pos.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)

    @property
    def min_spacing(self) -> float:
        p = self.positions
        if p.size < 2:
            return math.inf
        d = np.abs(p[:, None] - p[None, :])
        np.fill_diagonal(d, np.inf)
        return float(d.min())

    def sample_balls(self) -> tuple[np.ndarray, np.ndarray]:
        """Ball centres (atoms, atom midpoints, circle centres) and dyadic radii
        from the atom spacing up to four circle radii."""
        p = self.positions
        centers = [p, 0.5 * (p + np.roll(p, 1))]
        rmax = max((d.radius for d in self.supports), default=float(np.abs(p - p.mean()).max()) or 1.0)
        centers.append(np.array([d.center for d in self.supports] or [p.mean()]))
        spacing = self.min_spacing if p.size > 1 else rmax
        jmin = math.ceil(math.log2(spacing / rmax)) if spacing < math.inf else 0
        radii = rmax * 2.0 ** np.arange(jmin, 3)
        return np.concatenate(centers), radii

    def check_growth(self, centers=None, radii=None) -> GrowthCertificate:
        """Largest ``nu(B(z, rho)) / (eps rho)`` over a sample of closed balls."""
        if centers is None or radii is None:
            c0, r0 = self.sample_balls()
            centers = c0 if centers is None else np.asarray(centers, complex)
            radii = r0 if radii is None else np.asarray(radii, float)
        worst = (-1.0, 0j, 0.0)
        for chunk in range(0, len(centers), 512):
            cz = centers[chunk:chunk + 512]
            dist = np.abs(cz[:, None] - self.positions[None, :])
            for rho in radii:
                m = (self.weights[None, :] * (dist <= rho)).sum(axis=1)
                ratio = m / (self.growth * rho)
                k = int(np.argmax(ratio))
                if ratio[k] > worst[0]:
                    worst = (float(ratio[k]), complex(cz[k]), float(rho))
        return GrowthCertificate(worst[0], worst[1], worst[2], len(centers) * len(radii))


def frostman_on_circle(disk: Disk, epsilon: float, atom_count: int = DEFAULT_ATOMS,
                       annulus: Optional[int] = None, base_point: complex = 0j,
                       mass: Optional[float] = None, slack: float = GROWTH_SLACK) -> DiscreteMeasure:
    """Equal atoms on the boundary of ``disk`` with total mass ``epsilon * radius``.

    ``mass`` overrides the total (it may not exceed ``epsilon * radius``). The
    growth bound ``nu(B(z, rho)) <= epsilon * rho`` is checked on sampled balls
    before returning.
    """
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    if atom_count < 8:
        raise DomainError("need at least 8 atoms")
    total = epsilon * disk.radius if mass is None else float(mass)
    theta = 2.0 * np.pi * np.arange(atom_count) / atom_count
    pos = disk.center + disk.radius * np.exp(1j * theta)
    w = np.full(atom_count, total / atom_count)
    mu = DiscreteMeasure(pos, w, epsilon, annulus, complex(base_point), (disk,))
    cert = mu.check_growth()
    if not cert.ok(slack):
        raise ConstructionError(
            f"growth bound fails: ball at {cert.worst_center} radius {cert.worst_radius:.3g} "
            f"carries {cert.worst_ratio:.3f} x epsilon * radius")
    return mu


def combine(measures: Sequence[DiscreteMeasure]) -> DiscreteMeasure:
    first = measures[0]
    return DiscreteMeasure(np.concatenate([m.positions for m in measures]),
                           np.concatenate([m.weights for m in measures]),
                           max(m.growth for m in measures), first.annulus, first.base_point,
                           tuple(d for m in measures for d in m.supports))


class _Cluster:
    """Coefficients of one measure plus its truncated far-field expansion."""

    def __init__(self, zeta: np.ndarray, coef: np.ndarray):
        self.zeta = zeta
        self.coef = coef
        self.center = complex(zeta.mean())
        self.R = float(np.abs(zeta - self.center).max()) or abs(self.center) * 1e-300 or 1e-300
        u = (zeta - self.center) / self.R
        mom = np.empty(MULTIPOLE_TERMS, dtype=complex)
        p = coef.astype(complex)
        for q in range(MULTIPOLE_TERMS):
            mom[q] = p.sum()
            p = p * u
        self.moments = mom

    def __call__(self, z: np.ndarray) -> np.ndarray:
        out = np.empty(z.shape, dtype=complex)
        dz = z - self.center
        far = np.abs(dz) >= FAR_FACTOR * self.R
        if far.any():
            d = dz[far]
            u = self.R / d
            acc = np.full(d.shape, self.moments[-1])
            for q in range(MULTIPOLE_TERMS - 2, -1, -1):
                acc = acc * u + self.moments[q]
            out[far] = -acc / d
        near = np.flatnonzero(~far)
        for s in range(0, near.size, _CHUNK):
            idx = near[s:s + _CHUNK]
            out[idx] = (self.coef[None, :] / (self.zeta[None, :] - z[idx, None])).sum(axis=1)
        return out


class CauchyTransform:
    """Vectorized ``z -> sum over measures of sum_j w_j phase_j / (zeta_j - z)``.

    ``phase_j = ((zeta_j - x0) / |zeta_j - x0|)**(t+1)``. Each measure is one
    cluster: points far from it (``|z - c| >= 4 R``) use a 32-term multipole
    series whose truncation error is below double precision; near points sum
    the atoms directly. No guard distance is enforced here.
    """

    def __init__(self, measures: Sequence[DiscreteMeasure], t: int, base_point: Optional[complex] = None):
        if not measures:
            raise DomainError("need at least one measure")
        self.t = int(t)
        self.base_point = measures[0].base_point if base_point is None else complex(base_point)
        self.measures = tuple(measures)
        self._clusters = []
        for mu in measures:
            rel = mu.positions - self.base_point
            phase = (rel / np.abs(rel)) ** (self.t + 1)
            self._clusters.append(_Cluster(mu.positions, mu.weights * phase))

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        out = np.zeros(flat.shape, dtype=complex)
        for cl in self._clusters:
            out += cl(flat)
        return out.reshape(z.shape)

    def sampled(self) -> SampledFunction:
        return SampledFunction(self, domain="plane minus atoms", smoothness="analytic-away-from-poles")


def cauchy_transform(measure: DiscreteMeasure, t: int, z: complex, guard: Optional[float] = None) -> complex:
    """Pointwise transform; refuses points within ``guard`` of an atom
    (default: half the minimum atom spacing)."""
    z = complex(z)
    if guard is None:
        s = measure.min_spacing
        guard = 0.5 * s if math.isfinite(s) else 0.0
    dist = float(np.abs(measure.positions - z).min())
    if dist < guard or dist == 0.0:
        raise EvaluationError(f"point {z} lies within {dist:.3g} of an atom (guard {guard:.3g})")
    rel = measure.positions - measure.base_point
    phase = (rel / np.abs(rel)) ** (t + 1)
    return complex(np.sum(measure.weights * phase / (measure.positions - z)))


def derivative_at_base(measure: DiscreteMeasure, t: int) -> float:
    """Closed form ``t! * sum w / |zeta - x0|**(t+1)`` of ``f^(t)(x0)``."""
    r = np.abs(measure.positions - measure.base_point)
    if np.any(r == 0):
        raise DomainError("measure has an atom at the base point")
    return math.factorial(t) * math.fsum(measure.weights / r ** (t + 1))


def numeric_derivative(f: Callable, z0: complex, t: int, contour_radius: float,
                       nodes: int = CONTOUR_NODES) -> complex:
    """``f^(t)(z0)`` by the trapezoidal rule on the Cauchy integral over a circle.

    ``f`` should accept an ndarray of points; scalar-only callables are
    evaluated point by point.
    """
    if nodes < 16:
        raise DomainError("need at least 16 contour nodes")
    if not contour_radius > 0:
        raise DomainError("contour radius must be positive")
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    e = np.exp(1j * theta)
    zs = complex(z0) + contour_radius * e
    try:
        vals = np.asarray(f(zs), dtype=complex)
        if vals.shape != zs.shape:
            raise TypeError
    except (TypeError, ValueError):
        vals = np.array([complex(f(complex(z))) for z in zs])
    if not np.all(np.isfinite(vals)):
        raise EvaluationError("non-finite value on the derivative contour")
    return complex(math.factorial(t) * np.mean(vals * e ** (-t)) / contour_radius ** t)


# ---------------------------------------------------------------------------
# blocks


def _annulus_measure(region: RegionSpec, m: int, eps: float, content_lower: float,
                     atom_count: int) -> DiscreteMeasure:
    disks = complement_in_annulus(region, m)
    total_r = math.fsum(d.radius for d in disks)
    scale = content_lower / total_r
    parts = [frostman_on_circle(d, eps, atom_count, m, region.x0, mass=eps * d.radius * scale)
             for d in disks]
    mu = combine(parts) if len(parts) > 1 else parts[0]
    if len(parts) > 1:
        cert = mu.check_growth()
        if not cert.ok():
            raise ConstructionError(f"growth bound fails on annulus {m} (ratio {cert.worst_ratio:.3f})")
    return mu


@dataclass
class Block:
    start: int
    p: int
    t: int
    epsilons: list
    terms: list                 # 2^((t+1)m) eps_m M(A_m \ X)
    measures: list
    g: CauchyTransform
    deriv_formula: float
    deriv_contour: complex
    contour_radius: float
    atom_count: int

    @property
    def block_sum(self) -> float:
        return math.fsum(self.terms)

    @property
    def disks(self) -> list:
        return [d for mu in self.measures for d in mu.supports]


def _require_divergent(region: RegionSpec, t: int) -> None:
    if region.rule is None or classify_symbolic(region.rule, t, 1.0).verdict is not Verdict.DIVERGES:
        raise NoWitnessError("criterion converges; no witness exists")


def build_block(region: RegionSpec, t: int, start_n: int, epsilon: Optional[Callable] = None,
                atom_count: int = DEFAULT_ATOMS, max_doublings: int = 3) -> Block:
    """Witness block ``g = f_n + ... + f_p`` starting at annulus ``start_n``.

    ``p`` is the first index with ``sum_{m=n}^p 2^((t+1)m) eps_m M(A_m \\ X) >= 1``;
    every term is at most 1, so the sum stays at most 2. Raises
    :class:`ResourceError` when the materializable annuli run out first.
    """
    _require_divergent(region, t)
    eps_rule = LogDecay() if epsilon is None else epsilon
    if start_n < 1:
        raise DomainError("start_n must be >= 1")
    limit = region.materialization_limit
    eps, terms, contents = [], [], []
    m = start_n
    while True:
        if m > limit:
            raise ResourceError(
                f"divergence too slow for cap: block from n={start_n} sums to "
                f"{math.fsum(terms):.4f} < 1 by annulus {limit}")
        e = float(eps_rule(m))
        if eps and not e < eps[-1]:
            raise ConstructionError(f"epsilon sequence not strictly decreasing at m={m}")
        c = annulus_content(region, m, 1.0).lower
        term = 2.0 ** ((t + 1) * m) * e * c
        if term > 1.0 + 1e-12:
            raise ConstructionError(f"weighted term {term:.4g} > 1 at m={m}; choose smaller epsilons")
        eps.append(e)
        contents.append(c)
        terms.append(term)
        if math.fsum(terms) >= 1.0:
            break
        m += 1
    p = m
    n_atoms = atom_count
    for _ in range(max_doublings + 1):
        measures = [_annulus_measure(region, k, eps[k - start_n], contents[k - start_n], n_atoms)
                    for k in range(start_n, p + 1)]
        g = CauchyTransform(measures, t, region.x0)
        formula = math.fsum(derivative_at_base(mu, t) for mu in measures)
        dist = min(float(np.abs(mu.positions - region.x0).min()) for mu in measures)
        rho = 0.25 * dist
        contour = numeric_derivative(g, region.x0, t, rho)
        if abs(contour - formula) <= DERIVATIVE_RTOL * formula:
            return Block(start_n, p, t, eps, terms, measures, g, formula, contour, rho, n_atoms)
        n_atoms *= 2
    raise ConsistencyError(
        f"derivative cross-check failed for block n={start_n}: formula {formula!r}, contour {contour!r}")


# ---------------------------------------------------------------------------
# seminorm probes


@dataclass(frozen=True)
class ProbeSettings:
    """Square families used to estimate seminorms of witnesses and test functions.

    Each removed disk of radius ``r`` gets a local window of side
    ``local_window * r`` probed at sides ``r * local_scales``; a global window
    ``[-1, 1]^2 + x0`` is probed at ``global_scales``. Only squares inside ``X``
    count.
    """

    nodes: int = DEFAULT_NODES
    local_window: float = 8.0
    local_scales: tuple = (4.0, 2.0, 1.0, 0.5, 0.25)
    local_grid: int = 8
    global_scales: tuple = tuple(2.0 ** -j for j in range(9))
    global_grid: int = 8
    # witness blocks: local windows only around this many leading disks
    focus_disks: int = 4

    def __post_init__(self):
        if self.nodes < 2 or self.local_grid < 1 or self.global_grid < 1 or self.focus_disks < 1:
            raise DomainError("probe settings must be positive")


def region_seminorm(f, region: RegionSpec, focus: Sequence[Disk],
                    settings: ProbeSettings = ProbeSettings()) -> OscillationReport:
    """Seminorm estimate of ``f`` over squares inside ``X``, concentrated near ``focus`` disks."""
    disks = [d for _, d in removed_disks(region)]
    admissible = lambda Q: cube_in_region(Q, region, disks)  # noqa: E731
    jobs = [(Cube(region.x0, 2.0), settings.global_scales, settings.global_grid)]
    for d in focus:
        jobs.append((Cube(d.center, settings.local_window * d.radius),
                     tuple(s * d.radius for s in settings.local_scales), settings.local_grid))
    reports = _ordered_map(
        lambda job: bmo_seminorm(f, job[0], job[1], job[2], settings.nodes, admissible), jobs)
    return merge_reports(reports)


# ---------------------------------------------------------------------------
# tables


@dataclass
class WitnessRow:
    n: int
    p: int
    block_sum: float
    deriv_formula: float
    deriv_contour: float
    bmo_seminorm: float

    def as_list(self):
        return [self.n, self.p, self.block_sum, self.deriv_formula, self.deriv_contour, self.bmo_seminorm]


WITNESS_COLUMNS = ["n", "p", "block_sum", "deriv_formula", "deriv_contour", "bmo_seminorm"]
RATIO_COLUMNS = ["n", "deriv", "bmo_seminorm", "ratio"]


def witness_report(region: RegionSpec, t: int, starts: Sequence[int], epsilon: Optional[Callable] = None,
                   atom_count: int = DEFAULT_ATOMS, settings: ProbeSettings = ProbeSettings()) -> list[WitnessRow]:
    """One row per start index: block end, block sum, both derivative values and
    the seminorm estimate of the block sum."""
    _require_divergent(region, t)

    def row(n):
        b = build_block(region, t, n, epsilon, atom_count)
        rep = region_seminorm(b.g.sampled(), region, b.disks[:settings.focus_disks], settings)
        return WitnessRow(n, b.p, b.block_sum, b.deriv_formula, b.deriv_contour.real,
                          rep.bmo_seminorm_estimate)

    return [row(n) for n in starts]


@dataclass
class RatioRow:
    n: int
    deriv: float
    bmo_seminorm: float

    @property
    def ratio(self) -> float:
        return self.deriv / self.bmo_seminorm if self.bmo_seminorm > 0 else math.inf

    def as_list(self):
        return [self.n, self.deriv, self.bmo_seminorm, self.ratio]


@dataclass(frozen=True)
class PoleSum:
    """``F(z) = sum_k r_k u_k / (z - c_k)`` over removed disks ``(c_k, r_k)``,
    with unimodular ``u_k = ((c_k - x0)/|c_k - x0|)**(t+1)`` aligning the
    ``t``-th derivatives at ``x0``. ``|F|`` stays below the number of poles on
    ``X`` while each pole adds ``t! r_k / |c_k - x0|**(t+1)`` to ``|F^(t)(x0)|``."""

    disks: tuple
    t: int
    base_point: complex = 0j

    def _terms(self):
        for d in self.disks:
            rel = d.center - self.base_point
            yield d, (rel / abs(rel)) ** (self.t + 1)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for d, u in self._terms():
            out += d.radius * u / (z - d.center)
        return out

    def derivative_at_base(self) -> complex:
        # d^t/dz^t (z - c)^-1 = (-1)^t t! (z - c)^-(t+1)
        t = self.t
        s = 0j
        for d, u in self._terms():
            s += d.radius * u * (-1) ** t * math.factorial(t) / (self.base_point - d.center) ** (t + 1)
        return s

    def sampled(self) -> SampledFunction:
        return SampledFunction(self, smoothness="analytic-away-from-poles",
                               poles=tuple(d.center for d in self.disks))


@dataclass(frozen=True)
class ScaledPole:
    """``f(z) = (r / (z - c))**(t+1)`` for one removed disk ``(c, r)``."""

    disk: Disk
    t: int
    base_point: complex = 0j

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return (self.disk.radius / (z - self.disk.center)) ** (self.t + 1)

    def derivative_at_base(self) -> complex:
        # d^t/dz^t (z - c)^-(t+1) = (-1)^t (2t)!/t! (z - c)^-(2t+1)
        t = self.t
        k = (-1) ** t * math.factorial(2 * t) / math.factorial(t)
        return self.disk.radius ** (t + 1) * k / (self.base_point - self.disk.center) ** (2 * t + 1)

    def sampled(self) -> SampledFunction:
        return SampledFunction(self, smoothness="analytic-away-from-poles", poles=(self.disk.center,))


RATIO_FAMILIES = ("pole-sum", "single-pole")


def ratio_table(region: RegionSpec, t: int, depths: Sequence[int],
                settings: ProbeSettings = ProbeSettings(), family: str = "pole-sum") -> list[RatioRow]:
    """``|f_n^(t)(x0)| / seminorm(f_n)`` across depths ``n``.

    ``family="pole-sum"`` uses :class:`PoleSum` over the disks of annuli
    ``1..n``; ``"single-pole"`` uses :class:`ScaledPole` at the disk of annulus
    ``n`` alone. Growth without bound across depths is evidence against a
    bounded point derivation; bounded ratios are consistent with one.
    """
    if family not in RATIO_FAMILIES:
        raise DomainError(f"unknown ratio family {family!r}; choose from {RATIO_FAMILIES}")

    def row(n):
        if family == "pole-sum":
            disks = tuple(d for _, d in removed_disks(region, upto=n))
            F = PoleSum(disks, t, region.x0) if disks else None
        else:
            disks = tuple(complement_in_annulus(region, n))[:1]
            F = ScaledPole(disks[0], t, region.x0) if disks else None
        if F is None:
            return RatioRow(n, 0.0, 0.0)
        rep = region_seminorm(F.sampled(), region, disks, settings)
        return RatioRow(n, abs(F.derivative_at_base()), rep.bmo_seminorm_estimate)

    return _ordered_map(row, depths)


def rows_to_csv(columns: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r.as_list()])
    return buf.getvalue()
