"""Acceptance criteria, one test each.

Every check returns ``(passed, detail, report_bytes)``; the report is the JSON a
user would save, so the determinism check can rerun each criterion and compare
bytes. A line per criterion is printed in the pytest terminal summary.
Run alone with ``pytest tests/test_acceptance.py -v``.
"""
from __future__ import annotations

import json
import math
import statistics
import time
from fractions import Fraction

import numpy as np
import pytest

from bpdvmo.cli import preset
from bpdvmo.content import content_interval, content_of_disk
from bpdvmo.geometry import Annulus, Disk, DyadicSquare, dyadic_cover
from bpdvmo.oscillation import Cube, mean_oscillation
from bpdvmo.series import CriterionQuery, Verdict, bpd_verdict, classify_symbolic
from bpdvmo.witness import (cauchy_transform, derivative_at_base, frostman_on_circle,
                            numeric_derivative, ratio_table, witness_report)

from conftest import ACCEPTANCE

SEED = 20240611


def _dump(obj) -> bytes:
    return json.dumps(obj, indent=2, sort_keys=True).encode()


def _record(k, ok, detail):
    ACCEPTANCE[k] = (bool(ok), detail)


def criterion_1():
    start = time.perf_counter()
    region = preset("roadrunner-harmonic")
    cert = classify_symbolic(region.rule, 1, 1.0)
    v = bpd_verdict(CriterionQuery(region, 1, 1.0, 10))
    elapsed = time.perf_counter() - start
    h10 = float(sum(Fraction(1, n) for n in range(1, 11)))
    err = max(abs(v.numeric.partial_sum_lower - h10), abs(v.numeric.partial_sum_upper - h10))
    ok = cert.verdict is Verdict.DIVERGES and err <= 1e-9 and v.label == "not_admits" and elapsed < 1.0
    detail = f"symbolic {cert.verdict.value}, |S10 - H10| = {err:.1e}, verdict {v.label}, {elapsed:.3f}s"
    return ok, detail, _dump(v.to_json())


def criterion_2():
    region = preset("roadrunner-square")
    v = bpd_verdict(CriterionQuery(region, 1, 1.0, 20))
    oracle = math.fsum(1 / n ** 2 for n in range(1, 21))
    err = abs(v.numeric.partial_sum_lower - oracle)
    tail = v.numeric.tail_bound
    ok = (v.symbolic.verdict is Verdict.CONVERGES and err <= 1e-4 and tail <= 1 / 20
          and v.label == "admits")
    return ok, f"|S20 - oracle| = {err:.1e}, tail bound {tail:.4g}, verdict {v.label}", _dump(v.to_json())


def criterion_3():
    region = preset("roadrunner-harmonic")
    out, ok = [], True
    for a in (0.25, 0.5, 0.75):
        v = bpd_verdict(CriterionQuery(region, 1, 1 + a, 20))
        c = v.symbolic
        expect = 2 - 2 * (1 + a)
        ok &= (c.verdict is Verdict.CONVERGES and abs(c.exponent - expect) <= 1e-12 and c.exponent < 0
               and v.label == "admits")
        out.append(v.to_json())
    exps = ", ".join(f"{o['certificate']['exponent']:g}" for o in out)
    return ok, f"exponents {exps}; all admit: {all(o['verdict'] == 'admits' for o in out)}", _dump(out)


def _brute_best_cover(disks, depth):
    # bottom-up optimum over nonoverlapping dyadic squares of level <= depth, h(t) = t
    cost = {q: q.side for q in dyadic_cover(disks, depth)}
    for level in range(depth - 1, -1, -1):
        parents = {}
        for q, c in cost.items():
            p = DyadicSquare(level, q.i >> 1, q.j >> 1)
            parents[p] = parents.get(p, 0.0) + c
        cost = {p: min(p.side, c) for p, c in parents.items()}
    return math.fsum(cost.values())


def criterion_4():
    rng = np.random.default_rng(SEED)
    radii = rng.uniform(1e-6, 1.0, 20)
    exact = all(content_of_disk(float(r), 1).lower == float(r) for r in radii)
    rows, ok, worst = [], exact, 0.0
    for _ in range(25):
        while True:
            c = rng.uniform(-0.6, 0.6, 4)
            r = rng.uniform(0.02, 0.2, 2)
            a, b = Disk(complex(c[0], c[1]), r[0]), Disk(complex(c[2], c[3]), r[1])
            if abs(a.center - b.center) > a.radius + b.radius:
                break
        est = content_interval([a, b], 1, search_depth=8)
        brute = _brute_best_cover([a, b], 8)
        ratio = est.upper / est.lower
        worst = max(worst, ratio)
        ok &= est.lower <= brute * (1 + 1e-12) and brute <= est.upper * (1 + 1e-12) and ratio <= 8
        rows.append([est.lower, brute, est.upper])
    return ok, f"closed form exact: {exact}; 25 two-disk unions, max upper/lower {worst:.3f}", _dump(rows)


def criterion_5():
    rng = np.random.default_rng(SEED + 5)
    start = time.perf_counter()
    rows, worst = [], 0.0
    for _ in range(24):
        n = int(rng.integers(1, 9))
        ann = Annulus(0j, n)
        r = rng.uniform(0.05, 0.2) * ann.outer
        center = ann.midline * np.exp(1j * rng.uniform(0, 2 * np.pi))
        eps = float(rng.uniform(0.05, 1.0))
        t = int(rng.integers(0, 3))
        mu = frostman_on_circle(Disk(complex(center), float(r)), eps, 256, n)
        formula = derivative_at_base(mu, t)
        rho = 0.25 * float(np.abs(mu.positions).min())
        # independent path: guarded pointwise direct summation on the contour
        contour = numeric_derivative(lambda z: cauchy_transform(mu, t, z), 0j, t, rho, 256)
        rel = abs(contour - formula) / formula
        worst = max(worst, rel)
        rows.append([n, t, eps, formula, contour.real, contour.imag])
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 10.0
    return ok, f"24 measures, max relative gap {worst:.1e}, {elapsed:.2f}s", _dump(rows)


def criterion_6():
    rows = witness_report(preset("roadrunner-harmonic"), 1, range(1, 7))
    sums = [r.block_sum for r in rows]
    derivs = [r.deriv_formula for r in rows]
    norms = [r.bmo_seminorm for r in rows]
    ok = (all(1 <= s <= 2 for s in sums) and min(derivs) >= 0.5
          and all(b < a for a, b in zip(norms, norms[1:])))
    detail = (f"block sums in [{min(sums):.3f}, {max(sums):.3f}], min derivative {min(derivs):.3f}, "
              f"seminorms {', '.join(f'{x:.4f}' for x in norms)}")
    return ok, detail, _dump([r.as_list() for r in rows])


def criterion_7():
    re_z = lambda z: z.real + 0j  # noqa: E731
    unit = Cube(0.5 + 0.5j, 1.0)
    w = mean_oscillation(re_z, unit, 128)
    const = mean_oscillation(lambda z: np.full(z.shape, 2.5 - 1j), unit, 64)
    rng = np.random.default_rng(SEED + 7)
    f = lambda z: z ** 3 + 1j * np.sin(z)  # noqa: E731
    worst = 0.0
    for _ in range(100):
        c = complex(*rng.uniform(-1, 1, 2))
        side = float(rng.uniform(0.05, 1.0))
        lam = float(rng.uniform(0.2, 5.0))
        b = complex(*rng.uniform(-2, 2, 2))
        base = mean_oscillation(f, Cube(c, side), 16)
        moved = mean_oscillation(lambda z: f(z - b), Cube(c + b, side), 16)
        scaled = mean_oscillation(lambda z: f(z / lam), Cube(c * lam, side * lam), 16)
        worst = max(worst, abs(moved - base) / base, abs(scaled - base) / base)
    ok = abs(w - 0.25) <= 1e-3 and const == 0.0 and worst <= 1e-12
    return ok, f"Omega(Re z) = {w:.6f}, Omega(const) = {const}, invariance gap {worst:.1e}", \
        _dump([w, const, worst])


def criterion_8():
    start = time.perf_counter()
    harm = ratio_table(preset("roadrunner-harmonic"), 1, range(2, 9))
    sq = ratio_table(preset("roadrunner-square"), 1, range(2, 9))
    elapsed = time.perf_counter() - start
    hr = [r.ratio for r in harm if r.n >= 4]
    sr = [r.ratio for r in sq]
    spread = max(sr) / statistics.median(sr)
    ok = all(b > a for a, b in zip(hr, hr[1:])) and spread < 10 and elapsed < 60
    detail = (f"harmonic ratios from depth 4: {', '.join(f'{x:.2f}' for x in hr)}; "
              f"square max/median {spread:.3f}; {elapsed:.1f}s")
    return ok, detail, _dump({"harmonic": [r.as_list() for r in harm], "square": [r.as_list() for r in sq]})


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8}
_FIRST_RUN: dict = {}


def _run(k, tmp_path=None):
    ok, detail, report = CRITERIA[k]()
    _FIRST_RUN.setdefault(k, report)
    if tmp_path is not None:
        (tmp_path / f"criterion_{k}.json").write_bytes(report)
    _record(k, ok, detail)
    return ok, detail


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_acceptance(k, tmp_path):
    ok, detail = _run(k, tmp_path)
    assert ok, detail


def test_acceptance_9_determinism(tmp_path):
    mismatched = []
    for k in sorted(CRITERIA):
        if k not in _FIRST_RUN:
            _FIRST_RUN[k] = CRITERIA[k]()[2]
        (tmp_path / f"a_{k}.json").write_bytes(_FIRST_RUN[k])
        (tmp_path / f"b_{k}.json").write_bytes(CRITERIA[k]()[2])
        if (tmp_path / f"a_{k}.json").read_bytes() != (tmp_path / f"b_{k}.json").read_bytes():
            mismatched.append(k)
    ok = not mismatched
    _record(9, ok, "reruns byte-identical for criteria 1-8" if ok else f"reports differ for {mismatched}")
    assert ok, mismatched
