"""Muckenhoupt-type characteristics for step-weight pairs.

Scalar ratios are finite maxima over enumerated interval families and are
exact in cell arithmetic.  Quadratic, offset, and rectangular functionals are
supremum-type quantities; the functions here evaluate them at an explicit
coefficient family and report a certified lower bound.  The two-tailed
characteristic is bracketed per cube by annular kernel bounds plus a
geometric tail driven by the measured mass growth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dyadic import DyadicInterval, StepWeight1D, unit_interval

__all__ = [
    "CharacteristicReport",
    "scalar_ap",
    "quadratic_ap_functional",
    "offset_ap_functional",
    "two_tailed_ap_estimate",
    "rect_quadratic_functional",
    "whitney_product_cells",
    "full_testing_bound",
    "full_dyadic_family",
]

# offset cubes must satisfy dist(J, J*) <= C0 * side
OFFSET_C0 = 3.0
# combination constant for the full-testing bound at dimension n
PROP_COMBINE_N = 2


@dataclass
class CharacteristicReport:
    """A named characteristic value with its certification kind.

    kind is one of "exact-max" (finite enumerated supremum), "lower-bound",
    "upper-bound", "estimate".  params carries the inputs that produced the
    value; per_item optionally lists the per-cube/per-member values.
    """

    name: str
    value: float
    kind: str
    params: dict = field(default_factory=dict)
    per_item: list | None = None

    def __post_init__(self):
        if self.kind not in ("exact-max", "lower-bound", "upper-bound", "estimate"):
            raise ValueError(f"unknown report kind {self.kind!r}")

    def to_json_dict(self) -> dict:
        d = {"name": self.name, "value": self.value, "kind": self.kind, "params": self.params}
        if self.per_item is not None:
            d["per_item"] = self.per_item
        return d


# --------------------------------------------------------------- helpers


def full_dyadic_family(max_level: int) -> list[DyadicInterval]:
    """Every dyadic subinterval of [0,1) at levels 0..max_level."""
    fam: list[DyadicInterval] = []
    for lev in range(max_level + 1):
        fam.extend(unit_interval().subintervals(lev))
    return fam


def _avg(weight, I: DyadicInterval) -> float:
    # tensor weights (constant vertically) delegate to their horizontal part
    horizontal = getattr(weight, "horizontal", None)
    if horizontal is not None:
        return horizontal.average(I)
    return weight.average(I)


def _horizontal(weight) -> StepWeight1D:
    return getattr(weight, "horizontal", weight)


def _coeff_list(family: Sequence[DyadicInterval], a) -> list[float]:
    if isinstance(a, Mapping):
        return [float(a.get(J, 0.0)) for J in family]
    coeffs = [float(v) for v in a]
    if len(coeffs) != len(family):
        raise ValueError("coefficient list length must match the family")
    return coeffs


def _cell_span(J: DyadicInterval, level: int) -> tuple[int, int]:
    """Base-cell index range of J within [0,1) at the given resolution."""
    if not unit_interval().contains(J):
        raise ValueError("family member outside [0,1)")
    k = level - J.level
    if k < 0:
        raise ValueError("resolution coarser than a family member")
    return J.index << k, (J.index + 1) << k


# --------------------------------------------------------------- scalar


def scalar_ap(sigma, omega, p: float, family: Iterable[DyadicInterval]) -> CharacteristicReport:
    """max over the family of (E_I sigma)^(1/p') (E_I omega)^(1/p); exact.

    For dyadic step weights and the full dyadic family, enumerating levels
    down to the step size is exhaustive: deeper intervals repeat cell values.
    """
    if not 1.0 < p < math.inf:
        raise ValueError("p must lie in (1, infinity)")
    pp = p / (p - 1.0)
    best = None
    best_I = None
    for I in family:
        v = _avg(sigma, I) ** (1.0 / pp) * _avg(omega, I) ** (1.0 / p)
        if best is None or v > best:
            best, best_I = v, I
    if best is None:
        raise ValueError("empty interval family")
    return CharacteristicReport(
        name="scalar_ap",
        value=best,
        kind="exact-max",
        params={"p": p, "argmax": repr(best_I)},
    )


# --------------------------------------------------------------- quadratic


def _lp_norm_of_sqrt_sum(
    per_member_cellvals: Sequence[tuple[tuple[int, int], float]],
    measure: StepWeight1D,
    p: float,
    level: int,
) -> float:
    """|| (sum_J c_J 1_J)^{1/2} ||_{L^p(measure)} on the level grid.

    per_member_cellvals lists ((i0, i1), c_J) cell spans with the constant
    added on that span.  Integrals are exact cell sums.
    """
    n = 1 << level
    S = np.zeros(n, dtype=np.float64)
    for (i0, i1), c in per_member_cellvals:
        S[i0:i1] += c
    dens = _horizontal(measure).refine(level).values
    integral = float(np.sum(S ** (p / 2.0) * dens)) / n
    return integral ** (1.0 / p)


def quadratic_ap_functional(
    sigma,
    omega,
    p: float,
    family: Sequence[DyadicInterval],
    a,
) -> CharacteristicReport:
    """Ratio of L^p norms for the square-function pair at coefficients a.

    value = ||(sum a_J^2 (E_J sigma)^2 1_J)^{1/2}||_{L^p(omega)}
          / ||(sum a_J^2 1_J)^{1/2}||_{L^p(sigma)};
    a certified lower bound for the supremum characteristic.
    """
    family = list(family)
    coeffs = _coeff_list(family, a)
    if not any(c != 0.0 for c in coeffs):
        raise ValueError("coefficients identically zero")
    sig = _horizontal(sigma)
    om = _horizontal(omega)
    level = max(
        [sig.base_level, om.base_level] + [J.level for J in family]
    )
    num_terms = []
    den_terms = []
    for J, c in zip(family, coeffs):
        span = _cell_span(J, level)
        e = sig.average(J)
        num_terms.append((span, c * c * e * e))
        den_terms.append((span, c * c))
    num = _lp_norm_of_sqrt_sum(num_terms, om, p, level)
    den = _lp_norm_of_sqrt_sum(den_terms, sig, p, level)
    if den == 0.0:
        raise ValueError("zero denominator: coefficients invisible to sigma")
    return CharacteristicReport(
        name="quadratic_ap_functional",
        value=num / den,
        kind="lower-bound",
        params={"p": p, "family_size": len(family)},
    )


def offset_ap_functional(
    sigma,
    omega,
    p: float,
    pairs: Sequence[tuple[DyadicInterval, DyadicInterval]],
    a,
) -> CharacteristicReport:
    """Offset variant: numerator carries (E_{J*} sigma)^2 on 1_J, denominator 1_{J*}.

    Each pair (J, J*) must have equal lengths and gap at most OFFSET_C0
    times the length.
    """
    pairs = list(pairs)
    coeffs = _coeff_list([J for J, _ in pairs], a)
    if not any(c != 0.0 for c in coeffs):
        raise ValueError("coefficients identically zero")
    sig = _horizontal(sigma)
    om = _horizontal(omega)
    level = max(
        [sig.base_level, om.base_level]
        + [J.level for J, _ in pairs]
        + [Js.level for _, Js in pairs]
    )
    num_terms = []
    den_terms = []
    for (J, Jstar), c in zip(pairs, coeffs):
        if J.level != Jstar.level:
            raise ValueError("offset pair must have equal side lengths")
        gap_cells = max(0, max(J.index, Jstar.index) - min(J.index, Jstar.index) - 1)
        if gap_cells > OFFSET_C0:
            raise ValueError(
                f"offset pair too far apart: gap {gap_cells} cells > C0 = {OFFSET_C0}"
            )
        e = sig.average(Jstar)
        num_terms.append((_cell_span(J, level), c * c * e * e))
        den_terms.append((_cell_span(Jstar, level), c * c))
    num = _lp_norm_of_sqrt_sum(num_terms, om, p, level)
    den = _lp_norm_of_sqrt_sum(den_terms, sig, p, level)
    if den == 0.0:
        raise ValueError("zero denominator")
    return CharacteristicReport(
        name="offset_ap_functional",
        value=num / den,
        kind="lower-bound",
        params={"p": p, "pairs": len(pairs), "C0": OFFSET_C0},
    )


# --------------------------------------------------------------- two-tailed


def _annulus_kernel_bounds(ell: int, npow: float) -> tuple[float, float]:
    """Kernel [s/(s+dist)]^npow bracket on the annulus 2^{ell+1}Q minus 2^ell Q.

    ell = 0 denotes the core 2Q itself.  Bounds come from the sup-metric
    annulus geometry: dist is at least (2^{ell-1} - 1/2)s and at most
    sqrt(2) (2^ell - 1/2)s; on the core, dist ranges over [0, sqrt(2) s/2].
    """
    if ell == 0:
        lo_dist, hi_dist = 0.0, math.sqrt(2.0) * 0.5
    else:
        lo_dist = 2.0 ** (ell - 1) - 0.5
        hi_dist = math.sqrt(2.0) * (2.0**ell - 0.5)
    hi = (1.0 / (1.0 + lo_dist)) ** npow
    lo = (1.0 / (1.0 + hi_dist)) ** npow
    return lo, hi


def _dilate_mass_tensor(weight, I: DyadicInterval, ell: int) -> float:
    """Mass of the concentric dilate 2^{ell+1} Q of the square Q = I x [0, s).

    Tensor measures are constant vertically, so the mass factors into the
    horizontal step-weight mass (periodic extension when declared) times the
    vertical extent.  The dilate's horizontal endpoints are dyadic at level
    I.level + 1, so the mass is an exact prefix-sum difference.
    """
    w = _horizontal(weight)
    k = I.level
    res = max(k + 1, w.base_level)
    shift = res - (k + 1)
    i0 = (2 * I.index + 1 - (1 << (ell + 1))) << shift
    i1 = (2 * I.index + 1 + (1 << (ell + 1))) << shift
    n_fine = 1 << res
    prefix = np.concatenate(([0.0], np.cumsum(w.refine(res).values))) * 2.0**-res
    if w.periodic:
        full0, r0 = divmod(i0, n_fine)
        full1, r1 = divmod(i1, n_fine)
        horiz = (full1 - full0) * w.integral() + float(prefix[r1] - prefix[r0])
    else:
        a = min(max(i0, 0), n_fine)
        b = min(max(i1, 0), n_fine)
        horiz = float(prefix[b] - prefix[a]) if b > a else 0.0
    vert = 2.0 ** (ell + 1 - k)
    return horiz * vert


def _two_tailed_factor(
    weight,
    I: DyadicInterval,
    exponent: float,
    L_annuli: int,
) -> tuple[float, float]:
    """(lower, upper) bracket of ((1/|Q|) integral of the tail kernel)^{1/exponent}.

    The kernel power is n*exponent with n = 2, which must exceed 2 for the
    tail beyond the last computed annulus to converge.  That tail is bounded
    in closed form: horizontal mass over a centered range of T period
    lengths is at most (T + 1) full periods (and at most the total mass in
    the non-periodic case), while the vertical extent is exact, giving a
    dominated pair of geometric series.
    """
    npow = 2.0 * exponent
    if npow <= 2.0:
        raise ValueError("kernel power must exceed the dimension for a finite tail")
    k = I.level
    area_Q = 4.0**-k
    dil = [_dilate_mass_tensor(weight, I, ell) for ell in range(L_annuli + 1)]
    lo_sum = 0.0
    hi_sum = 0.0
    for ell in range(L_annuli + 1):
        lo_k, hi_k = _annulus_kernel_bounds(ell, npow)
        ann_mass = dil[ell] if ell == 0 else dil[ell] - dil[ell - 1]
        lo_sum += lo_k * ann_mass
        hi_sum += hi_k * ann_mass
    # tail over ell > L: kernel <= 2^npow 2^(-npow ell), dilate mass <=
    # (2^(2(ell+1-k)) + 2^(ell+1-k)) * total horizontal mass
    total_h = _horizontal(weight).integral()
    s2 = 2.0 ** ((2.0 - npow) * (L_annuli + 1)) / (1.0 - 2.0 ** (2.0 - npow))
    s1 = 2.0 ** ((1.0 - npow) * (L_annuli + 1)) / (1.0 - 2.0 ** (1.0 - npow))
    tail = 2.0**npow * total_h * (2.0 ** (2.0 * (1 - k)) * s2 + 2.0 ** (1 - k) * s1)
    lower = (lo_sum / area_Q) ** (1.0 / exponent)
    upper = ((hi_sum + tail) / area_Q) ** (1.0 / exponent)
    return lower, upper


def two_tailed_ap_estimate(
    sigma,
    omega,
    p: float,
    family: Iterable[DyadicInterval],
    L_annuli: int = 12,
) -> CharacteristicReport:
    """Two-tailed characteristic bracket over a family of squares Q = I x [0, s).

    Reports per cube the raw lower/upper bracket of the defining product and
    a *normalized* upper bound: the same annular upper bound divided by its
    value for planar Lebesgue measure on the identical cube, so constant
    weights report exactly 1.  The headline value is the max normalized
    upper bound; raw maxima ride along in params.
    """
    if not 1.0 < p < math.inf:
        raise ValueError("p must lie in (1, infinity)")
    pp = p / (p - 1.0)
    flat = StepWeight1D.constant(1.0, periodic=True)
    rows = []
    value = 0.0
    raw_lo_max = 0.0
    raw_hi_max = 0.0
    for I in family:
        w_lo, w_hi = _two_tailed_factor(omega, I, p, L_annuli)
        s_lo, s_hi = _two_tailed_factor(sigma, I, pp, L_annuli)
        ref_w = _two_tailed_factor(flat, I, p, L_annuli)[1]
        ref_s = _two_tailed_factor(flat, I, pp, L_annuli)[1]
        raw_lo = w_lo * s_lo
        raw_hi = w_hi * s_hi
        normalized = raw_hi / (ref_w * ref_s)
        rows.append({"cube": repr(I), "raw_lower": raw_lo, "raw_upper": raw_hi, "normalized_upper": normalized})
        value = max(value, normalized)
        raw_lo_max = max(raw_lo_max, raw_lo)
        raw_hi_max = max(raw_hi_max, raw_hi)
    if not rows:
        raise ValueError("empty cube family")
    return CharacteristicReport(
        name="two_tailed_ap",
        value=value,
        kind="upper-bound",
        params={
            "p": p,
            "L_annuli": L_annuli,
            "raw_lower_max": raw_lo_max,
            "raw_upper_max": raw_hi_max,
            "normalization": "lebesgue-reference",
        },
        per_item=rows,
    )


# --------------------------------------------------------------- rectangular


def _vertical_window(level: int) -> tuple[float, float]:
    """x2-window attached to a horizontal interval of side 2^-level."""
    s = 2.0**-level
    return 10.0 * s, 10.0 * s + 100.0


def rect_quadratic_functional(
    sigma,
    omega,
    p: int,
    family: Sequence[DyadicInterval],
    a,
    cross_check: bool = True,
) -> CharacteristicReport:
    """Rectangular quadratic functional on the plane for tensor weights.

    family lists the horizontal sides I1 (the squares are I1 x [0, s)); the
    indicator in both norms sits on the shifted window J(I) = I1 x
    [10s, 10s+100).  Exact evaluation exploits the tensor structure: the
    integrand is piecewise constant in x1 on the common refinement and
    piecewise constant in x2 between window breakpoints.

    For even p the value is cross-checked against the one-dimensional
    functional (the vertical windows share an intersection of length about
    100, making the two agree within a fixed factor); disagreement beyond a
    factor 4 raises.
    """
    if p % 2 != 0 or p < 4:
        raise ValueError("rectangular functional requires even p >= 4")
    sig_h = getattr(sigma, "horizontal", None)
    om_h = getattr(omega, "horizontal", None)
    if sig_h is None or om_h is None:
        raise ValueError("rectangular functional requires tensor weights")
    family = list(family)
    coeffs = _coeff_list(family, a)
    if not any(c != 0.0 for c in coeffs):
        raise ValueError("coefficients identically zero")

    level = max([sig_h.base_level, om_h.base_level] + [J.level for J in family])
    n = 1 << level
    levels_present = sorted({J.level for J in family})
    # per horizontal level, the cellwise coefficient fields
    num_field = {t: np.zeros(n) for t in levels_present}
    den_field = {t: np.zeros(n) for t in levels_present}
    for J, c in zip(family, coeffs):
        i0, i1 = _cell_span(J, level)
        e = sig_h.average(J)
        num_field[J.level][i0:i1] += c * c * e * e
        den_field[J.level][i0:i1] += c * c
    # vertical breakpoints of the overlapping windows
    edges = sorted({v for t in levels_present for v in _vertical_window(t)})
    sig_cells = sig_h.refine(level).values
    om_cells = om_h.refine(level).values

    def lp_pth(fields: dict[int, np.ndarray], dens: np.ndarray) -> float:
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            mid = 0.5 * (lo + hi)
            active = [t for t in levels_present if _vertical_window(t)[0] <= mid < _vertical_window(t)[1]]
            if not active:
                continue
            S = np.zeros(n)
            for t in active:
                S += fields[t]
            total += (hi - lo) * float(np.sum(S ** (p / 2.0) * dens)) / n
        return total

    num = lp_pth(num_field, om_cells) ** (1.0 / p)
    den = lp_pth(den_field, sig_cells) ** (1.0 / p)
    if den == 0.0:
        raise ValueError("zero denominator")
    value = num / den

    report = CharacteristicReport(
        name="rect_quadratic_functional",
        value=value,
        kind="lower-bound",
        params={"p": p, "family_size": len(family)},
    )
    if cross_check:
        oned = quadratic_ap_functional(sig_h, om_h, float(p), family, coeffs).value
        report.params["one_dimensional_value"] = oned
        if not (value <= 4.0 * oned and oned <= 4.0 * value):
            raise ValueError(
                f"tensor reduction mismatch: 2-D value {value:.6g} vs 1-D {oned:.6g}"
            )
    return report


# --------------------------------------------------------------- Whitney


def whitney_product_cells(
    J_star: DyadicInterval,
    J: DyadicInterval,
    depth: int = 8,
) -> list[tuple[DyadicInterval, DyadicInterval]]:
    """Whitney decomposition of the product J* x J for adjacent equal intervals.

    Returns pairs (K*, K) of equal-length subintervals with gap between 1 and
    4 side lengths; the products K* x K tile J* x J up to the residual corner
    square of side 2^-depth relative to the input.
    """
    if J_star.level != J.level:
        raise ValueError("inputs must have equal length")
    if J_star.right != J.left and J.right != J_star.left:
        raise ValueError("inputs must be adjacent")
    out: list[tuple[DyadicInterval, DyadicInterval]] = []

    def gap_in_lengths(A: DyadicInterval, B: DyadicInterval) -> float:
        lo = min(A.index, B.index)
        hi = max(A.index, B.index)
        return float(hi - lo - 1)

    def tile(A: DyadicInterval, B: DyadicInterval, budget: int) -> None:
        g = gap_in_lengths(A, B)
        if g >= 1.0:
            if g > 4.0:
                raise AssertionError("recursion produced a too-distant pair")
            out.append((A, B))
            return
        if budget == 0:
            return
        for Ac in A.children():
            for Bc in B.children():
                tile(Ac, Bc, budget - 1)

    tile(J_star, J, depth)
    return out


# --------------------------------------------------------------- combination


def full_testing_bound(
    triple_report: CharacteristicReport,
    two_tailed_report: CharacteristicReport,
    p: float,
) -> CharacteristicReport:
    """Upper bound for full testing: 2^(np+1) (two-tailed + triple), n = 2."""
    const = 2.0 ** (PROP_COMBINE_N * p + 1.0)
    value = const * (triple_report.value + two_tailed_report.value)
    return CharacteristicReport(
        name="full_testing_bound",
        value=value,
        kind="upper-bound",
        params={
            "p": p,
            "constant": const,
            "triple": triple_report.value,
            "two_tailed": two_tailed_report.value,
        },
    )
