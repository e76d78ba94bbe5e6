"""Tests for the characteristic functionals.

Oracles: a midpoint-Riemann evaluator written independently of the package's
cell arithmetic, disjoint-support closed forms, and the exact plane integral
of the two-tailed kernel around a square (square + edge strips + corner
quadrants in polar coordinates).
"""

import math
from types import SimpleNamespace

import numpy as np
import pytest

from weightsep.characteristics import (
    CharacteristicReport,
    full_dyadic_family,
    full_testing_bound,
    offset_ap_functional,
    quadratic_ap_functional,
    rect_quadratic_functional,
    scalar_ap,
    two_tailed_ap_estimate,
    whitney_product_cells,
)
from weightsep.dyadic import DyadicInterval, StepWeight1D, unit_interval

SIG = StepWeight1D(2, [0.5, 1.0, 2.0, 4.0], periodic=True)
OM = StepWeight1D(2, [3.0, 1.0, 0.25, 2.0], periodic=True)
FLAT = StepWeight1D.constant(1.0, periodic=True)

# plane integral of [1/(1+dist(x,Q))]^m for a unit square:
# 1 + 4/(m-1) + 2*pi/((m-1)(m-2)); frozen at m = 8 and m = 8/3
KERNEL_INTEGRAL_8 = 1.721028221599514
KERNEL_INTEGRAL_83 = 9.0548667764616278
RAW_TWO_TAILED_FLAT_P4 = 5.9787245709153878


def tensor(w: StepWeight1D):
    return SimpleNamespace(horizontal=w)


# --------------------------------------------------------------- scalar


def test_scalar_constant_pair_is_one():
    r = scalar_ap(FLAT, FLAT, 4.0, full_dyadic_family(3))
    assert r.value == pytest.approx(1.0, abs=1e-14)
    assert r.kind == "exact-max"


def test_scalar_two_cell_example():
    """Maximum sits on the heavy cell: (E sigma)^(3/4) with E sigma = 3."""
    sig = StepWeight1D(1, [1.0, 3.0])
    om = StepWeight1D(1, [1.0, 1.0])
    r = scalar_ap(sig, om, 4.0, full_dyadic_family(1))
    assert r.value == pytest.approx(2.2795070569547776, rel=1e-14)


def test_scalar_rejects_bad_exponent_and_empty_family():
    with pytest.raises(ValueError):
        scalar_ap(SIG, OM, 1.0, full_dyadic_family(1))
    with pytest.raises(ValueError):
        scalar_ap(SIG, OM, 4.0, [])


# --------------------------------------------------------------- quadratic


def midpoint_ratio(sigma, omega, p, family, coeffs, grid_level=8):
    """Independent evaluation on midpoints of a fine uniform grid.

    Every integrand is piecewise constant above the common refinement, so
    sampling at strictly interior points is exact up to rounding.
    """
    n = 1 << grid_level
    xs = (np.arange(n) + 0.5) / n
    S_num = np.zeros(n)
    S_den = np.zeros(n)
    for J, c in zip(family, coeffs):
        inside = (xs >= float(J.left)) & (xs < float(J.right))
        e = sigma.mass(J) / float(J.length)
        S_num[inside] += c * c * e * e
        S_den[inside] += c * c
    wvals = np.array([omega.value_at(x) for x in xs])
    svals = np.array([sigma.value_at(x) for x in xs])
    num = float(np.mean(S_num ** (p / 2.0) * wvals)) ** (1.0 / p)
    den = float(np.mean(S_den ** (p / 2.0) * svals)) ** (1.0 / p)
    return num / den


def test_quadratic_constant_single_interval():
    r = quadratic_ap_functional(FLAT, FLAT, 4.0, [unit_interval()], [1.0])
    assert r.value == pytest.approx(1.0, abs=1e-14)


def test_quadratic_p2_single_interval_identity():
    # at p = 2 with one interval the ratio squares to (E sigma)^2 |I|_w / |I|_s
    I = DyadicInterval(1, 0)
    r = quadratic_ap_functional(SIG, OM, 2.0, [I], [1.0])
    e = SIG.average(I)
    expected = math.sqrt(e * e * OM.mass(I) / SIG.mass(I))
    assert r.value == pytest.approx(expected, rel=1e-14)


def test_quadratic_matches_midpoint_oracle():
    family = [
        unit_interval(),
        DyadicInterval(1, 0),
        DyadicInterval(2, 1),
        DyadicInterval(2, 3),
        DyadicInterval(3, 5),
    ]
    coeffs = [1.0, 0.6, -0.4, 0.9, 1.3]
    r = quadratic_ap_functional(SIG, OM, 4.0, family, coeffs)
    oracle = midpoint_ratio(SIG, OM, 4.0, family, coeffs)
    assert r.value == pytest.approx(oracle, rel=1e-12)


def test_quadratic_disjoint_supports_closed_form():
    """For disjoint intervals the square function collapses termwise:
    num^p = sum |a|^p (E sigma)^p w(J), den^p = sum |a|^p s(J)."""
    family = [DyadicInterval(2, 0), DyadicInterval(2, 2), DyadicInterval(2, 3)]
    coeffs = [1.0, 2.0, 0.5]
    p = 4.0
    num = sum(
        abs(c) ** p * SIG.average(J) ** p * OM.mass(J) for J, c in zip(family, coeffs)
    ) ** (1 / p)
    den = sum(abs(c) ** p * SIG.mass(J) for J, c in zip(family, coeffs)) ** (1 / p)
    r = quadratic_ap_functional(SIG, OM, p, family, coeffs)
    assert r.value == pytest.approx(num / den, rel=1e-13)


def test_quadratic_rejects_zero_coefficients_and_length_mismatch():
    with pytest.raises(ValueError):
        quadratic_ap_functional(SIG, OM, 4.0, [unit_interval()], [0.0])
    with pytest.raises(ValueError):
        quadratic_ap_functional(SIG, OM, 4.0, [unit_interval()], [1.0, 2.0])


def test_quadratic_accepts_mapping_coefficients():
    I = DyadicInterval(1, 1)
    r1 = quadratic_ap_functional(SIG, OM, 4.0, [I], {I: 2.0})
    r2 = quadratic_ap_functional(SIG, OM, 4.0, [I], [2.0])
    assert r1.value == pytest.approx(r2.value, rel=1e-15)


# --------------------------------------------------------------- offset


def test_offset_identity_pairs_reduce_to_quadratic():
    family = [DyadicInterval(2, 1), DyadicInterval(2, 3)]
    coeffs = [1.0, 0.7]
    r_off = offset_ap_functional(SIG, OM, 4.0, [(J, J) for J in family], coeffs)
    r_quad = quadratic_ap_functional(SIG, OM, 4.0, family, coeffs)
    assert r_off.value == pytest.approx(r_quad.value, rel=1e-14)


def test_offset_constant_pair_is_one_for_any_admissible_pairs():
    pairs = [(DyadicInterval(3, 1), DyadicInterval(3, 4))]
    r = offset_ap_functional(FLAT, FLAT, 4.0, pairs, [1.0])
    assert r.value == pytest.approx(1.0, abs=1e-14)


def test_offset_gates():
    far = [(DyadicInterval(3, 0), DyadicInterval(3, 5))]  # gap of 4 cells
    with pytest.raises(ValueError):
        offset_ap_functional(SIG, OM, 4.0, far, [1.0])
    mixed = [(DyadicInterval(3, 0), DyadicInterval(2, 1))]
    with pytest.raises(ValueError):
        offset_ap_functional(SIG, OM, 4.0, mixed, [1.0])


# --------------------------------------------------------------- two-tailed


def test_two_tailed_constant_pair_normalizes_to_one():
    fam = [DyadicInterval(0, 0), DyadicInterval(2, 1), DyadicInterval(3, 5)]
    r = two_tailed_ap_estimate(FLAT, FLAT, 4.0, fam)
    assert r.value == pytest.approx(1.0, abs=1e-12)
    for row in r.per_item:
        assert row["normalized_upper"] == pytest.approx(1.0, abs=1e-12)


def test_two_tailed_bracket_contains_exact_flat_value():
    """The raw bracket must contain the closed-form plane integral value."""
    fam = [DyadicInterval(0, 0), DyadicInterval(2, 1)]
    r = two_tailed_ap_estimate(FLAT, FLAT, 4.0, fam, L_annuli=14)
    for row in r.per_item:
        assert row["raw_lower"] <= RAW_TWO_TAILED_FLAT_P4 <= row["raw_upper"]


def test_two_tailed_flat_bracket_is_scale_invariant():
    fam = [DyadicInterval(0, 0), DyadicInterval(1, 1), DyadicInterval(4, 7)]
    r = two_tailed_ap_estimate(FLAT, FLAT, 4.0, fam)
    lowers = [row["raw_lower"] for row in r.per_item]
    uppers = [row["raw_upper"] for row in r.per_item]
    assert np.allclose(lowers, lowers[0], rtol=1e-12)
    # the tail's partial-period slack grows mildly for small cubes, so the
    # upper bound is only approximately scale invariant
    assert np.allclose(uppers, uppers[0], rtol=1e-3)


def test_two_tailed_reports_raw_extremes_and_orders_bracket():
    fam = [DyadicInterval(0, 0), DyadicInterval(2, 1)]
    r = two_tailed_ap_estimate(SIG, OM, 4.0, fam)
    assert r.params["raw_lower_max"] <= r.params["raw_upper_max"]
    for row in r.per_item:
        assert row["raw_lower"] <= row["raw_upper"]


def test_two_tailed_rejects_empty_family_and_bad_p():
    with pytest.raises(ValueError):
        two_tailed_ap_estimate(SIG, OM, 4.0, [])
    with pytest.raises(ValueError):
        two_tailed_ap_estimate(SIG, OM, 1.0, [DyadicInterval(0, 0)])


# --------------------------------------------------------------- rectangular


def test_rect_constant_tensor_is_one():
    fam = [unit_interval(), DyadicInterval(1, 1)]
    r = rect_quadratic_functional(tensor(FLAT), tensor(FLAT), 4, fam, [1.0, 2.0])
    assert r.value == pytest.approx(1.0, abs=1e-13)


def test_rect_single_interval_matches_one_dimensional_exactly():
    # one window only: the vertical extent cancels between the norms
    I = DyadicInterval(1, 0)
    r2d = rect_quadratic_functional(tensor(SIG), tensor(OM), 4, [I], [1.0])
    r1d = quadratic_ap_functional(SIG, OM, 4.0, [I], [1.0])
    assert r2d.value == pytest.approx(r1d.value, rel=1e-13)


def test_rect_multi_level_cross_check_recorded():
    fam = [unit_interval(), DyadicInterval(1, 0), DyadicInterval(2, 3)]
    r = rect_quadratic_functional(tensor(SIG), tensor(OM), 4, fam, [1.0, 0.7, 0.3])
    oned = r.params["one_dimensional_value"]
    assert r.value <= 4.0 * oned and oned <= 4.0 * r.value


def test_rect_gates():
    fam = [unit_interval()]
    with pytest.raises(ValueError):
        rect_quadratic_functional(tensor(SIG), tensor(OM), 3, fam, [1.0])
    with pytest.raises(ValueError):
        rect_quadratic_functional(tensor(SIG), tensor(OM), 2, fam, [1.0])
    with pytest.raises(ValueError):
        rect_quadratic_functional(SIG, OM, 4, fam, [1.0])
    with pytest.raises(ValueError):
        rect_quadratic_functional(tensor(SIG), tensor(OM), 4, fam, [0.0])


# --------------------------------------------------------------- Whitney


def test_whitney_depth_one_emits_three_pairs():
    pairs = whitney_product_cells(DyadicInterval(1, 0), DyadicInterval(1, 1), depth=1)
    got = {(a.index, b.index) for a, b in pairs}
    assert got == {(0, 2), (0, 3), (1, 3)}
    assert all(a.level == 2 and b.level == 2 for a, b in pairs)


def test_whitney_gap_bounds_and_disjoint_coverage():
    depth = 5
    pairs = whitney_product_cells(DyadicInterval(0, 0), DyadicInterval(0, 1), depth=depth)
    area = 0.0
    for a, b in pairs:
        lo, hi = sorted((a.index, b.index))
        g = hi - lo - 1
        assert a.level == b.level
        assert 1 <= g <= 4
        area += float(a.length) * float(b.length)
    # tiles are pairwise disjoint, so areas add; residual is the corner square
    assert area == pytest.approx(1.0 - 4.0**-depth, rel=1e-12)
    boxes = [(float(a.left), float(a.right), float(b.left), float(b.right)) for a, b in pairs]
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            al, ar, bl, br = boxes[i]
            cl, cr, dl, dr = boxes[j]
            overlap_x = min(ar, cr) - max(al, cl)
            overlap_y = min(br, dr) - max(bl, dl)
            assert not (overlap_x > 1e-12 and overlap_y > 1e-12)


def test_whitney_input_gates():
    with pytest.raises(ValueError):
        whitney_product_cells(DyadicInterval(1, 0), DyadicInterval(1, 3))
    with pytest.raises(ValueError):
        whitney_product_cells(DyadicInterval(1, 0), DyadicInterval(2, 2))


# --------------------------------------------------------------- combination


def test_full_testing_bound_combination():
    tr = CharacteristicReport("triple_testing", 0.5, "upper-bound")
    tt = CharacteristicReport("two_tailed_ap", 1.5, "upper-bound")
    r = full_testing_bound(tr, tt, 4.0)
    assert r.params["constant"] == pytest.approx(2.0**9)
    assert r.value == pytest.approx(2.0**9 * 2.0)


def test_full_testing_bound_zero_inputs_give_zero():
    tr = CharacteristicReport("triple_testing", 0.0, "upper-bound")
    tt = CharacteristicReport("two_tailed_ap", 0.0, "upper-bound")
    assert full_testing_bound(tr, tt, 4.0).value == 0.0


def test_report_rejects_unknown_kind():
    with pytest.raises(ValueError):
        CharacteristicReport("x", 1.0, "certified")
