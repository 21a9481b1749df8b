from __future__ import annotations

import itertools
import math

import pytest
from hypothesis import given, settings, strategies as st

from bpdvmo.errors import DomainError, GeometryError, ResourceError, ValidationError
from bpdvmo.geometry import (Annulus, Disk, DyadicSquare, RadiusRule, RegionSpec, annulus_of,
                             complement_in_annulus, dyadic_cover, point_in_region, removed_disks)

HARMONIC = RadiusRule(1, 2, 1)
SQUARE = RadiusRule(1, 2, 2)


def test_annulus_of_examples():
    assert annulus_of(0.2) == 2
    assert annulus_of(0.6) is None
    assert annulus_of(0j) is None
    assert annulus_of(0.5) == 1
    # shared boundary circle |z| = 1/4 goes to the smaller index
    assert annulus_of(0.25) == 1
    assert annulus_of(0.3 + 0.1j, x0=0.1 + 0.1j) == 2


@given(st.floats(1e-12, 0.5), st.floats(0, 2 * math.pi))
def test_annulus_of_membership(rho, theta):
    z = rho * complex(math.cos(theta), math.sin(theta))
    n = annulus_of(z)
    a = Annulus(0j, n)
    assert a.contains_point(z)
    # no smaller index contains it
    if n > 1:
        assert not Annulus(0j, n - 1).contains_point(z) or abs(z) == pytest.approx(a.outer)


def test_annulus_radii():
    a = Annulus(0j, 3)
    assert a.outer == 0.125 and a.inner == 0.0625
    assert a.midline == pytest.approx(0.09375)


def test_disk_validation():
    with pytest.raises(DomainError):
        Disk(0j, 0.0)
    with pytest.raises(DomainError):
        Disk(complex("nan"), 1.0)


def test_roadrunner_rule_disk_n3():
    reg = RegionSpec(rule=HARMONIC)
    (d,) = complement_in_annulus(reg, 3)
    assert d.radius == pytest.approx(1 / 192, rel=1e-15)
    assert d.center == pytest.approx(0.09375)


def test_roadrunner_head_disk_fits():
    # 4^-1 / 1 is wider than half of A_1, so the disk sits tangent to the inner circle
    reg = RegionSpec(rule=HARMONIC)
    (d,) = complement_in_annulus(reg, 1)
    assert d.radius == 0.25 and d.center == 0.5
    assert not Annulus(0j, 1).contains_disk(d)
    assert abs(d.center) - d.radius == Annulus(0j, 1).inner
    assert abs(d.center) + d.radius < 1.0
    assert HARMONIC.n0 == 2 and SQUARE.n0 == 2
    assert Annulus(0j, 2).contains_disk(complement_in_annulus(reg, 2)[0])


@pytest.mark.parametrize("rule", [HARMONIC, SQUARE, RadiusRule(0.5, 1.5, 0)])
def test_rule_disks_inside_annuli_and_disjoint(rule):
    reg = RegionSpec(rule=rule)
    pairs = removed_disks(reg, upto=30)
    for n, d in pairs:
        dist = abs(d.center)
        assert dist + d.radius < 1.0
        if n < rule.n0:
            continue
        assert dist - d.radius >= 2.0 ** -(n + 1) * (1 - 1e-12)
        assert dist + d.radius <= 2.0 ** -n * (1 + 1e-12)
    for (_, a), (_, b) in itertools.combinations(pairs, 2):
        # closed disks may touch (a head disk tangent to its neighbour) but never overlap
        assert abs(a.center - b.center) >= (a.radius + b.radius) * (1 - 1e-12)


def test_empty_region_has_no_disks():
    reg = RegionSpec()
    assert all(complement_in_annulus(reg, n) == [] for n in range(1, 20))


def test_explicit_annulus_passthrough():
    d1 = Disk(0.19, 0.02)
    d2 = Disk(-0.19j, 0.03)
    reg = RegionSpec(annuli=((2, (d1, d2)),))
    assert complement_in_annulus(reg, 2) == [d1, d2]
    assert complement_in_annulus(reg, 3) == []


def test_explicit_disk_outside_annulus_names_index():
    with pytest.raises(GeometryError, match="n=2"):
        RegionSpec(annuli=((2, (Disk(0.3, 0.01),)),))


def test_duplicate_or_bad_indices():
    d = Disk(0.19, 0.02)
    with pytest.raises(ValidationError):
        RegionSpec(annuli=((2, (d,)), (2, (d,))))
    with pytest.raises(ValidationError):
        RegionSpec(annuli=((0, (d,)),))


def test_rule_validation():
    with pytest.raises(ValidationError):
        RadiusRule(1, 0.5, 0)           # radii shrink slower than the annuli
    with pytest.raises(GeometryError, match="n=1"):
        RadiusRule(1, 2, 1, n0=1)       # declared start where the disk does not fit


def test_region_json_roundtrip():
    reg = RegionSpec(x0=0.1 - 0.2j, annuli=((3, (Disk(0.1 - 0.1j, 0.01),)),), rule=HARMONIC)
    again = RegionSpec.from_json(reg.to_json())
    assert again.to_json() == reg.to_json()
    assert complement_in_annulus(again, 3) == complement_in_annulus(reg, 3)


def test_region_json_errors_name_annulus():
    bad = {"x0": [0, 0], "annuli": [{"n": 4, "disks": [{"center": [0.05, 0], "radius": -1}]}], "rule": None}
    with pytest.raises(GeometryError, match="n=4"):
        RegionSpec.from_json(bad)


def test_materialization_cap():
    reg = RegionSpec(rule=HARMONIC)
    lim = reg.materialization_limit
    assert 2.0 ** -(2 * lim) / lim >= 2.0 ** -60 > 2.0 ** -(2 * (lim + 1)) / (lim + 1)
    with pytest.raises(ResourceError):
        complement_in_annulus(reg, lim + 1)


def test_point_in_region():
    reg = RegionSpec(rule=HARMONIC)
    assert not point_in_region(0.5, reg)
    assert point_in_region(0.5j, reg)
    assert not point_in_region(1.5, reg)


def _brute_cover(disk, level):
    # every square in a padded bounding box whose interior meets the disk
    s = 2.0 ** -level
    out = []
    lo_i = math.floor((disk.center.real - disk.radius) / s) - 1
    hi_i = math.floor((disk.center.real + disk.radius) / s) + 1
    lo_j = math.floor((disk.center.imag - disk.radius) / s) - 1
    hi_j = math.floor((disk.center.imag + disk.radius) / s) + 1
    for i in range(lo_i, hi_i + 1):
        for j in range(lo_j, hi_j + 1):
            # nearest point of the closed square to the centre
            x = min(max(disk.center.real, i * s), (i + 1) * s)
            y = min(max(disk.center.imag, j * s), (j + 1) * s)
            if math.hypot(x - disk.center.real, y - disk.center.imag) < disk.radius:
                out.append(DyadicSquare(level, i, j))
    return sorted(out, key=lambda q: (q.i, q.j))


def test_dyadic_cover_matches_brute_force():
    d = Disk(0.1875, 0.03125)
    assert dyadic_cover([d], 5) == _brute_cover(d, 5)


def test_dyadic_cover_level0_origin():
    got = {(q.i, q.j) for q in dyadic_cover([Disk(0j, 0.6)], 0)}
    assert got == {(-1, -1), (-1, 0), (0, -1), (0, 0)}


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8), st.floats(0.01, 0.3), st.integers(2, 6))
def test_dyadic_cover_levels_comparable(x, y, r, k):
    d = Disk(complex(x, y), r)
    a = dyadic_cover([d], k)
    b = dyadic_cover([d], k + 1)
    assert a == _brute_cover(d, k)
    len_a = sum(q.side for q in a)
    len_b = sum(q.side for q in b)
    assert 0.5 * len_a <= len_b <= 2.0 * len_a


def test_dyadic_cover_cap():
    with pytest.raises(ResourceError):
        dyadic_cover([Disk(0j, 0.5)], 12, cap=1000)
