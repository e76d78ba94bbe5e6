"""Tests for the seed weight pair.

Mass oracles are closed forms derived by hand: the singular density has
antiderivative -(1/alpha) ln(1/x)^(-alpha), and the regular density's mass
is an upper incomplete gamma function after the substitution u = ln(1/x).
The package integrates numerically; the tests never call its quadrature.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma, gammaincc

from weightsep.dyadic import DyadicInterval
from weightsep.seed import (
    SeedConfig,
    build_maximal_pair,
    build_seed_pair,
    density_regular,
    density_singular,
    truncated_density_weight,
)

ALPHA = 0.9


def singular_mass(s: float, alpha: float = ALPHA) -> float:
    """Exact mass of [0, s) for the unrescaled singular density."""
    return (1.0 / alpha) * math.log(1.0 / s) ** (-alpha)


def regular_mass(s: float, r: float, alpha: float = ALPHA) -> float:
    """Exact mass of [0, s): r^-(beta+1) * Gamma(beta+1, r ln(1/s))."""
    beta = alpha * (r - 1.0)
    x = r * math.log(1.0 / s)
    return r ** -(beta + 1.0) * gammaincc(beta + 1.0, x) * gamma(beta + 1.0)


def rescaled(massfn, s: float, *args) -> float:
    # the build rescales x -> x/2, doubling every mass
    return 2.0 * massfn(s / 2.0, *args)


# --------------------------------------------------------------- densities


def test_density_point_values():
    e1 = math.exp(-1.0)
    assert density_singular(e1, ALPHA) == pytest.approx(math.e, rel=1e-15)
    assert density_regular(e1, ALPHA, 4.0) == pytest.approx(e1**3, rel=1e-15)
    assert density_regular(e1, ALPHA, 4.0 / 3.0) == pytest.approx(
        math.exp(-1.0 / 3.0), rel=1e-14
    )


def test_density_support_and_domain():
    assert density_singular(0.5, ALPHA) == 0.0
    assert density_singular(0.7, ALPHA) == 0.0
    assert density_regular(0.5, ALPHA, 4.0) == 0.0
    with pytest.raises(ValueError):
        density_singular(0.0, ALPHA)
    with pytest.raises(ValueError):
        density_regular(-0.1, ALPHA, 4.0)


# --------------------------------------------------------------- truncations


def test_singular_truncation_against_closed_form():
    w = truncated_density_weight("singular", ALPHA, 6)
    for j in range(7):
        got = w.mass(DyadicInterval(j, 0))
        assert got == pytest.approx(rescaled(singular_mass, 2.0**-j), rel=1e-10)
    # frozen spot values
    assert w.integral() == pytest.approx(3.090612603257031, rel=1e-10)
    assert w.mass(DyadicInterval(3, 3)) == pytest.approx(
        0.2585211326030776, rel=1e-10
    )


@pytest.mark.parametrize(
    "r,total,offcell",
    [
        (4.0 / 3.0, 0.64972100093858673, 0.085322512265892125),
        (4.0, 0.031479329335538516, 0.0040390665599560204),
    ],
)
def test_regular_truncation_against_closed_form(r, total, offcell):
    w = truncated_density_weight("regular", ALPHA, 5, r=r)
    for j in range(5):
        got = w.mass(DyadicInterval(j, 0))
        assert got == pytest.approx(rescaled(regular_mass, 2.0**-j, r), rel=1e-9)
    assert w.integral() == pytest.approx(total, rel=1e-10)
    assert w.mass(DyadicInterval(3, 3)) == pytest.approx(offcell, rel=1e-10)


@given(
    kind=st.sampled_from(["singular", "regular"]),
    m_lo=st.integers(min_value=1, max_value=4),
    extra=st.integers(min_value=1, max_value=3),
)
@settings(max_examples=12, deadline=None)
def test_truncation_is_projection_compatible(kind, m_lo, extra):
    """Truncating at M then averaging down to m must equal truncating at m."""
    r = 4.0 / 3.0 if kind == "regular" else None
    fine = truncated_density_weight(kind, ALPHA, m_lo + extra, r=r)
    coarse = truncated_density_weight(kind, ALPHA, m_lo, r=r)
    proj = fine.martingale_project(m_lo)
    assert np.allclose(proj.values, coarse.values, rtol=1e-9)


def test_truncation_strictly_positive():
    w = truncated_density_weight("regular", ALPHA, 8, r=4.0)
    assert np.all(w.values > 0.0)


# --------------------------------------------------------------- config


def test_config_validation():
    with pytest.raises(ValueError):
        SeedConfig(p=3, alpha=ALPHA)
    with pytest.raises(ValueError):
        SeedConfig(p=2, alpha=ALPHA)
    with pytest.raises(ValueError):
        SeedConfig(p=4, alpha=1.0)
    with pytest.raises(ValueError):
        SeedConfig(p=4, alpha=ALPHA, eps=ALPHA)
    with pytest.raises(ValueError):
        SeedConfig(p=4, alpha=ALPHA, M_max=0)
    with pytest.raises(ValueError):
        SeedConfig(p=4, alpha=ALPHA, Gamma_target=-1.0)
    SeedConfig(p=4, alpha=ALPHA, Gamma_target=0.0)  # explicitly allowed


def test_config_derived_exponents():
    cfg = SeedConfig(p=4, alpha=ALPHA)
    assert cfg.q == pytest.approx(4.0 / 3.0)
    assert cfg.eps == pytest.approx(ALPHA / 10.0)
    assert cfg.eta == pytest.approx(0.1075, rel=1e-12)
    assert SeedConfig(p=4, alpha=ALPHA, eps=0.05).eta == pytest.approx(0.1375)


# --------------------------------------------------------------- build loop


def test_build_stops_at_first_sufficient_depth():
    res = build_seed_pair(SeedConfig(p=4, alpha=ALPHA, M_max=8, Gamma_target=0.0))
    assert res.success
    assert res.pair.M == 1
    assert list(res.functional_by_M) == [1]
    assert res.achieved > 0.0


def test_build_failure_keeps_best_depth():
    res = build_seed_pair(SeedConfig(p=4, alpha=ALPHA, M_max=2, Gamma_target=1e6))
    assert not res.success
    assert set(res.functional_by_M) == {1, 2}
    assert res.pair.M == max(res.functional_by_M, key=res.functional_by_M.get)
    assert res.achieved == max(res.functional_by_M.values())


def test_functional_grows_with_depth():
    res = build_seed_pair(SeedConfig(p=4, alpha=ALPHA, M_max=8, Gamma_target=1e6))
    vals = [res.functional_by_M[m] for m in sorted(res.functional_by_M)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_pair_swap_and_extremal_family():
    res = build_seed_pair(SeedConfig(p=4, alpha=ALPHA, M_max=3, Gamma_target=0.0))
    pair = res.pair
    sw = pair.swapped()
    assert sw.sigma is pair.omega and sw.omega is pair.sigma
    assert len(pair.a) == len(pair.I) == pair.M
    # extremal coefficients follow the k^eta profile
    assert pair.a[0] == pytest.approx(1.0)
    for k, (a_k, I_k) in enumerate(zip(pair.a, pair.I), start=1):
        assert a_k == pytest.approx(k**pair.eta, rel=1e-12)
        assert I_k == DyadicInterval(k, 0)


def test_maximal_pair_uses_principal_exponent():
    cfg = SeedConfig(p=4, alpha=ALPHA)
    sig, om = build_maximal_pair(cfg, M=4)
    expect_om = truncated_density_weight("regular", ALPHA, 4, r=4.0)
    expect_sig = truncated_density_weight("singular", ALPHA, 4)
    assert np.allclose(om.values, expect_om.values, rtol=1e-12)
    assert np.allclose(sig.values, expect_sig.values, rtol=1e-12)
