"""The content series ``sum_n 2**((t+1) n) M_d(A_n \\ X)`` and its verdicts.

``d = 1`` gives the criterion for analytic VMO functions, ``d = 1 + alpha``
the one for little-Lipschitz analytic functions. A bounded point derivation
of order ``t`` exists exactly when the series converges.

Two routes are provided. :func:`classify_symbolic` decides convergence for a
parametric :class:`~bpdvmo.geometry.RadiusRule` by comparing exponents;
:func:`evaluate_numeric` sums content intervals annulus by annulus and attaches
a tail bound when one can be proved. :func:`bpd_verdict` runs both and
cross-checks them.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

from .content import ContentEstimate, content_from_log2_radius, content_interval
from .errors import ConsistencyError, DomainError, NumericError
from .geometry import RadiusRule, RegionSpec, complement_in_annulus

# |t + 1 - beta d| below this counts as the boundary case
_EXPONENT_TOL = 1e-12
_AGREEMENT_RTOL = 1e-9


class Verdict(str, enum.Enum):
    CONVERGES = "Converges"
    DIVERGES = "Diverges"
    INCONCLUSIVE = "Inconclusive"


class VerdictSource(str, enum.Enum):
    SYMBOLIC = "Symbolic"
    NUMERIC_WITH_TAIL = "NumericWithTail"
    NUMERIC_TREND_ONLY = "NumericTrendOnly"


def _check_query_values(t, d, horizon=1):
    if int(t) != t or t < 0:
        raise DomainError(f"derivation order t must be an integer >= 0, got {t!r}")
    d = float(d)
    if not (d == 1.0 or 1.0 < d < 2.0):
        raise DomainError(f"dimension must be 1 or in (1, 2), got {d}")
    if int(horizon) != horizon or horizon < 1:
        raise DomainError(f"horizon must be an integer >= 1, got {horizon!r}")
    return int(t), d, int(horizon)


@dataclass(frozen=True)
class CriterionQuery:
    region: RegionSpec
    t: int = 1
    d: float = 1.0
    horizon: int = 20

    def __post_init__(self):
        t, d, horizon = _check_query_values(self.t, self.d, self.horizon)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "horizon", horizon)


def _pow2(log2_value: float) -> float:
    if log2_value == -math.inf:
        return 0.0
    try:
        return 2.0 ** log2_value
    except OverflowError:
        raise NumericError(f"series term 2^{log2_value:.1f} overflows double precision") from None


def series_term(n: int, t: int, content: ContentEstimate) -> tuple[float, float]:
    """``(2**((t+1) n) * lower, 2**((t+1) n) * upper)``, formed in log space."""
    if n < 1 or t < 0:
        raise DomainError("series_term needs n >= 1 and t >= 0")
    shift = (t + 1) * n
    return _pow2(shift + content.log2_lower), _pow2(shift + content.log2_upper)


@dataclass(frozen=True)
class SymbolicCertificate:
    verdict: Verdict
    exponent: float          # t + 1 - beta d: geometric rate of the terms
    log_power: float         # s d: terms carry n**(-s d)
    coefficient: float       # c**d
    reason: str

    def to_json(self) -> dict:
        return {"verdict": self.verdict.value, "exponent": self.exponent,
                "log_power": self.log_power, "coefficient": self.coefficient,
                "reason": self.reason}


def classify_symbolic(rule: RadiusRule, t: int, d: float = 1.0) -> SymbolicCertificate:
    """Exact classification of ``sum c**d 2**((t+1-beta d) n) n**(-s d)``."""
    t, d, _ = _check_query_values(t, d)
    g = (t + 1) - rule.beta * d
    sd = rule.s * d
    cd = rule.c ** d
    if abs(g) <= _EXPONENT_TOL:
        g = 0.0
    if g < 0:
        verdict, reason = Verdict.CONVERGES, f"geometric decay: exponent {g:g} < 0"
    elif g > 0:
        verdict, reason = Verdict.DIVERGES, f"geometric growth: exponent {g:g} > 0"
    elif sd > 1:
        verdict, reason = Verdict.CONVERGES, f"exponent 0 and p-series power s*d = {sd:g} > 1"
    else:
        verdict, reason = Verdict.DIVERGES, f"exponent 0 and p-series power s*d = {sd:g} <= 1"
    return SymbolicCertificate(verdict, g, sd, cd, reason)


def rule_log2_term(rule: RadiusRule, n: int, t: int, d: float) -> float:
    return (t + 1) * n + d * rule.log2_radius(n)


def rule_tail_bound(rule: RadiusRule, t: int, d: float, horizon: int) -> float:
    """Upper bound on ``sum_{n > N}`` of the rule terms; ``inf`` when divergent.

    Exponent gap ``g = beta d - (t+1) > 0``: ratio test past ``N`` with
    ``q = 2**-g * max(1, ((N+2)/(N+1))**(-s d))``, giving ``a_{N+1} / (1 - q)``
    (at most ``c**d N**(-s d) 2**(-g N) / (1 - 2**-g)`` when ``s d >= 0``).
    Gap zero and ``s d > 1``: integral test ``c**d N**(1 - s d) / (s d - 1)``.
    """
    cert = classify_symbolic(rule, t, d)
    if cert.verdict is not Verdict.CONVERGES:
        return math.inf
    N = horizon
    sd = cert.log_power
    if cert.exponent < 0:
        g = -cert.exponent

        def ratio(m):
            return 2.0 ** -g * max(1.0, ((m + 2) / (m + 1)) ** (-sd))

        # with s d < 0 the ratio only drops below 1 past some index; sum up to it
        M, head = N, []
        while ratio(M) >= 1:
            M += 1
            head.append(_pow2(rule_log2_term(rule, M, t, d)))
        return math.fsum(head) + _pow2(rule_log2_term(rule, M + 1, t, d)) / (1.0 - ratio(M))
    return cert.coefficient * float(N) ** (1.0 - sd) / (sd - 1.0)


@dataclass
class SeriesReport:
    t: int
    d: float
    horizon: int
    terms_lower: list
    terms_upper: list
    partial_sum_lower: float
    partial_sum_upper: float
    tail_bound: Optional[float]
    verdict: Verdict
    verdict_source: VerdictSource
    contents: list = field(default_factory=list)
    first_nonzero: Optional[int] = None
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "t": self.t, "d": self.d, "horizon": self.horizon,
            "terms_lower": self.terms_lower, "terms_upper": self.terms_upper,
            "partial_sum_lower": self.partial_sum_lower,
            "partial_sum_upper": self.partial_sum_upper,
            "tail_bound": None if self.tail_bound is None or math.isinf(self.tail_bound) else self.tail_bound,
            "verdict": self.verdict.value, "verdict_source": self.verdict_source.value,
            "first_nonzero_term": self.first_nonzero,
            "notes": list(self.notes),
        }


def annulus_content(region: RegionSpec, n: int, d: float,
                    search_depth: Optional[int] = None) -> ContentEstimate:
    """Content of ``A_n \\ X``; rule annuli use the closed form without materializing."""
    if region.is_explicit(n) or region.rule is None:
        return content_interval(complement_in_annulus(region, n), d, search_depth)
    return content_from_log2_radius(region.rule.log2_radius(n), d)


def _explicit_tail(region: RegionSpec, t: int, d: float, horizon: int) -> float:
    return math.fsum(series_term(n, t, annulus_content(region, n, d))[1]
                     for n in region.explicit_indices if n > horizon)


def evaluate_numeric(query: CriterionQuery, search_depth: Optional[int] = None) -> SeriesReport:
    """Partial sums for ``n = 1..N`` with a tail bound where one is provable.

    Without a radius rule only finitely many annuli are touched, so the tail is
    the exact (upper) sum of the remaining explicit terms. With a rule the tail
    comes from :func:`rule_tail_bound`; a divergent rule leaves the tail
    unknown and the verdict Inconclusive, because no finite partial sum proves
    divergence.
    """
    region, t, d, N = query.region, query.t, query.d, query.horizon
    lows, ups, contents, notes = [], [], [], []
    for n in range(1, N + 1):
        c = annulus_content(region, n, d, search_depth)
        lo, up = series_term(n, t, c)
        lows.append(lo)
        ups.append(up)
        contents.append(c)
    rule = region.rule
    if rule is not None:
        for n in range(1, min(rule.n0, N + 1)):
            if not region.is_explicit(n):
                notes.append(f"n={n}: rule radius {rule.radius(n):.6g} exceeds the annulus width; "
                             "disk placed tangent to the inner circle, content from the closed form")
    first = next((i + 1 for i, v in enumerate(lows) if v > 0), None)
    if rule is None:
        tail = _explicit_tail(region, t, d, N)
        verdict, source = Verdict.CONVERGES, VerdictSource.NUMERIC_WITH_TAIL
    else:
        tail = rule_tail_bound(rule, t, d, N)
        if math.isfinite(tail):
            tail += _explicit_tail(region, t, d, N)
            verdict, source = Verdict.CONVERGES, VerdictSource.NUMERIC_WITH_TAIL
        else:
            verdict, source = Verdict.INCONCLUSIVE, VerdictSource.NUMERIC_TREND_ONLY
    return SeriesReport(t, d, N, lows, ups, math.fsum(lows), math.fsum(ups),
                        tail, verdict, source, contents, first, notes)


@dataclass
class BPDVerdict:
    t: int
    d: float
    admits: Optional[bool]
    symbolic: Optional[SymbolicCertificate]
    numeric: SeriesReport

    @property
    def label(self) -> str:
        return {True: "admits", False: "not_admits", None: "inconclusive"}[self.admits]

    def to_json(self) -> dict:
        n = self.numeric
        return {
            "t": self.t, "d": self.d, "verdict": self.label,
            "partial_sums": {
                "horizon": n.horizon, "lower": n.partial_sum_lower, "upper": n.partial_sum_upper,
                "tail_bound": n.to_json()["tail_bound"],
                "terms_lower": n.terms_lower, "terms_upper": n.terms_upper,
                "first_nonzero_term": n.first_nonzero,
                "numeric_verdict": n.verdict.value, "numeric_source": n.verdict_source.value,
            },
            "certificate": None if self.symbolic is None else self.symbolic.to_json(),
            "notes": list(n.notes),
        }


def bpd_verdict(query: CriterionQuery, search_depth: Optional[int] = None) -> BPDVerdict:
    """Combine symbolic and numeric routes; ``admits`` iff the series converges.

    When a rule is present the two routes must agree: on convergence the
    numeric lower partial sum over rule annuli may not exceed the symbolic
    total (closed-form partial sum plus tail) by more than 1e-9 relative.
    """
    report = evaluate_numeric(query, search_depth)
    rule = query.region.rule
    cert = None
    if rule is None:
        admits = True if report.verdict is Verdict.CONVERGES else None
    else:
        cert = classify_symbolic(rule, query.t, query.d)
        if cert.verdict is Verdict.CONVERGES:
            if report.verdict is not Verdict.CONVERGES:
                raise ConsistencyError("symbolic route converges but no numeric tail bound was found")
            _check_agreement(query, report, rule)
            admits = True
        else:
            admits = False
    return BPDVerdict(query.t, query.d, admits, cert, report)


def _check_agreement(query: CriterionQuery, report: SeriesReport, rule: RadiusRule) -> None:
    t, d, N = query.t, query.d, query.horizon
    rule_ns = [n for n in range(1, N + 1) if not query.region.is_explicit(n)]
    numeric = math.fsum(report.terms_lower[n - 1] for n in rule_ns)
    symbolic = math.fsum(_pow2(rule_log2_term(rule, n, t, d)) for n in rule_ns)
    symbolic += rule_tail_bound(rule, t, d, N)
    if numeric > symbolic * (1 + _AGREEMENT_RTOL):
        raise ConsistencyError(
            f"numeric partial sum {numeric!r} exceeds symbolic total {symbolic!r}")
