import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from outerbilliards import asymptotics as asy
from outerbilliards.errors import InsufficientRange, WrongRegion
from outerbilliards.geometry import (SEMIDISC, PolarPoint, Region, SectorShape,
                                     outer_billiard_step, to_plane, to_polar)

HALF_PI = math.pi / 2
UPPER_LOWER = (Region.I, Region.II, Region.III, Region.IV)
RG = 10.0 * 2.0 ** np.arange(5, 13)


def fit(region, order, variant="corrected"):
    ex, ap = asy.semidisc_pair(region, order, variant)
    return asy.order_fit(ex, ap, region, RG,
                         lambda r: asy.default_theta_grid(HALF_PI, region, r, 3))


def sector_fit(beta, region, order):
    ex, ap = asy.sector_pair(beta, region, order)
    return asy.order_fit(ex, ap, region, RG,
                         lambda r: asy.default_theta_grid(beta, region, r, 3), beta=beta)


# ---------------------------------------------------------------- examples

def test_region_one_leading_order():
    q = asy.f2_asym_semidisc(Region.I, PolarPoint(1000.0, 0.0), order=1)
    assert q.r == pytest.approx(998.0, abs=1e-12)
    assert q.theta == pytest.approx(0.002, abs=1e-15)


def test_region_five_leading_order_at_half_pi():
    # pi/2 lies just past the thin V band at r = 1000, so the band check is off
    q = asy.f2_asym_semidisc(Region.V, PolarPoint(1000.0, HALF_PI), order=1, check=False)
    assert q.r == pytest.approx(1000.0, abs=1e-12)
    assert q.theta == pytest.approx(HALF_PI + 0.004, abs=1e-15)


def test_semidisc_and_sector_forms_agree_at_half_pi():
    p = PolarPoint(1e4, 0.3)
    a = asy.f2_asym_semidisc(Region.I, p, order=2)
    b = asy.f2_asym_sector(HALF_PI, Region.I, p, order=2)
    assert abs(a.r - b.r) < 1e-12 * p.r
    assert abs(a.theta - b.theta) < 1e-12


def test_sector_region_five_is_a_pure_rotation():
    beta = math.pi / 3
    lo, hi = asy.region_band(beta, Region.V, 500.0)
    p = PolarPoint(500.0, 0.5 * (lo + hi))
    q = asy.f2_asym_sector(beta, Region.V, p, order=2)
    assert q.r == p.r
    assert q.theta == pytest.approx(p.theta + 4 / 500.0, abs=1e-15)


@pytest.mark.parametrize("beta", [math.pi / 6, math.pi / 4, math.pi / 3, HALF_PI])
def test_sector_region_two_endpoint(beta):
    co = asy.sector_coefficients(beta, Region.II)
    assert float(co.b(math.pi - beta)) == pytest.approx(4.0, abs=1e-12)


@pytest.mark.parametrize("beta, line, r, expected", [
    (HALF_PI, "l2", 100.0, HALF_PI - 0.01),
    (HALF_PI, "l3p", 100.0, HALF_PI - 0.03),
    (math.pi / 3, "l1", 200.0, -0.0025),
    (math.pi / 3, "l2p", 100.0, 2 * math.pi / 3 - 0.03),
])
def test_singular_line_examples(beta, line, r, expected):
    assert asy.singular_line_theta(beta, line, r) == pytest.approx(expected, abs=1e-15)


def test_unknown_line_rejected():
    with pytest.raises(ValueError):
        asy.singular_line(HALF_PI, "l9")


def test_wrong_region_raises():
    with pytest.raises(WrongRegion):
        asy.f2_asym_semidisc(Region.I, PolarPoint(1000.0, 1.6), order=1)
    with pytest.raises(WrongRegion):
        asy.f2_asym_semidisc(Region.III, PolarPoint(1000.0, 0.3, "upper"), order=1)


def test_order_fit_needs_four_radii():
    ex, ap = asy.semidisc_pair(Region.I, 2)
    with pytest.raises(InsufficientRange):
        asy.order_fit(ex, ap, Region.I, [100, 200, 400], [0.3])


def test_order_fit_writes_csv(tmp_path):
    ex, ap = asy.semidisc_pair(Region.I, 2)
    path = tmp_path / "fit.csv"
    asy.order_fit(ex, ap, Region.I, RG[:4], [0.3, 0.6], csv_path=path)
    lines = path.read_text().splitlines()
    assert lines[0] == "r,err_r,err_theta"
    assert len(lines) == 5


# ------------------------------------------------------- singular lines

@pytest.mark.parametrize("beta", [math.pi / 3, HALF_PI])
@pytest.mark.parametrize("line", ["l1", "l2", "l3", "l2p", "l3p", "l1p"])
def test_singular_line_model_is_second_order(beta, line):
    """The model line and the true line differ by O(r^-2): locate the true
    jump of the support kind of F^2 by bisection."""
    from outerbilliards.geometry import fast_step
    shape = SectorShape(beta)
    model = asy.singular_line(beta, line)
    half = "lower" if line in ("l3", "l3p") else "upper"

    def kinds(r, th):
        z = to_plane(PolarPoint(r, th, half))
        z1, k0 = fast_step(shape, z)
        return k0, fast_step(shape, z1)[1]

    gaps = []
    for r in (200.0, 400.0, 800.0):
        t0 = model.theta(r)
        lo, hi = t0 - 0.5 / r, t0 + 0.5 / r
        klo = kinds(r, lo)
        assert kinds(r, hi) != klo
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if kinds(r, mid) == klo:
                lo = mid
            else:
                hi = mid
        gaps.append(abs(0.5 * (lo + hi) - t0))
    assert gaps[-1] < 5.0 / 800.0**2
    assert gaps[0] / gaps[-1] > 3.0 or gaps[-1] < 1e-12


# ------------------------------------------------------------ error orders

def test_printed_order_four_remainders():
    f = fit(Region.I, 4)
    assert f.slope_r == pytest.approx(-4, abs=0.3)
    assert f.slope_theta == pytest.approx(-5, abs=0.3)


def test_sector_order_two_remainder():
    f = sector_fit(math.pi / 3, Region.I, 2)
    assert f.slope_r == pytest.approx(-2, abs=0.3)
    assert f.slope_theta == pytest.approx(-3, abs=0.3)


@pytest.mark.parametrize("region", UPPER_LOWER)
@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_semidisc_remainder_orders(region, order):
    f = fit(region, order)
    assert f.slope_r == pytest.approx(-order, abs=0.3)
    assert f.slope_theta == pytest.approx(-order - 1, abs=0.3)


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_semidisc_region_five_at_least_stated_order(order):
    # several coefficients vanish in the translation wedge, so the decay is
    # at least as fast as stated and sometimes one order faster
    f = fit(Region.V, order)
    assert f.slope_r <= -order + 0.3
    assert f.slope_theta <= -order - 1 + 0.3


@pytest.mark.parametrize("region", UPPER_LOWER)
def test_printed_b2_stalls_the_theta_order(region):
    """Frozen measurement: with the b2 as printed the order-3 theta
    remainder decays like r^-3, not r^-4."""
    f = fit(region, 3, "published")
    assert f.slope_r == pytest.approx(-3, abs=0.3)
    assert f.slope_theta == pytest.approx(-3, abs=0.3)


@pytest.mark.parametrize("beta", [math.pi / 6, math.pi / 4, math.pi / 3, HALF_PI])
@pytest.mark.parametrize("region", UPPER_LOWER)
@pytest.mark.parametrize("order", [1, 2])
def test_sector_remainder_orders(beta, region, order):
    f = sector_fit(beta, region, order)
    assert f.slope_r == pytest.approx(-order, abs=0.3)
    assert f.slope_theta == pytest.approx(-order - 1, abs=0.3)


@pytest.mark.parametrize("beta", [math.pi / 6, math.pi / 3])
def test_sector_tangent_wedges_preserve_radius(beta):
    for region in (Region.V, Region.VI):
        f = sector_fit(beta, region, 2)
        assert np.max(f.err_r) < 1e-40 * RG[-1]
        assert f.slope_theta == pytest.approx(-3, abs=0.3)


# -------------------------------------------------------------- invariants

@pytest.mark.parametrize("beta", [math.pi / 6, math.pi / 4, math.pi / 3, HALF_PI])
@pytest.mark.parametrize("region", list(Region))
def test_b_positive_on_band(beta, region):
    co = asy.sector_coefficients(beta, region)
    for r in (50.0, 500.0, 5000.0):
        lo, hi = asy.region_band(beta, region, r)
        th = np.linspace(lo, hi, 101)
        assert np.all(np.asarray(co.b(th), float) > 0)
    if beta == HALF_PI:
        semi = asy.semidisc_coefficients(region)
        lo, hi = asy.region_band(beta, region, 500.0)
        assert np.all(np.asarray(semi.b(np.linspace(lo, hi, 101)), float) > 0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, math.pi), st.sampled_from(UPPER_LOWER))
def test_semidisc_matches_sector_pointwise(theta, region):
    a = asy.semidisc_coefficients(region)
    b = asy.sector_coefficients(HALF_PI, region)
    for name in ("a", "b", "a1", "b1"):
        assert float(getattr(a, name)(theta)) == pytest.approx(
            float(getattr(b, name)(theta)), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, HALF_PI))
def test_region_one_identity_check(theta):
    # a = -2 sin(pi/2 - theta) = -2 cos(theta), b = 2(1 + sin theta)
    co = asy.sector_coefficients(HALF_PI, Region.I)
    assert float(co.a(theta)) == pytest.approx(-2 * math.cos(theta), abs=1e-12)
    assert float(co.b(theta)) == pytest.approx(2 * (1 + math.sin(theta)), abs=1e-12)


@pytest.mark.parametrize("region", list(Region))
def test_mpmath_composition_matches_float_map(region):
    lo, hi = asy.region_band(HALF_PI, region, 300.0)
    th = 0.5 * (lo + hi)
    half = "lower" if region.lower else "upper"
    z = to_plane(PolarPoint(300.0, th, half))
    w = outer_billiard_step(SEMIDISC, outer_billiard_step(SEMIDISC, z))
    r2, t2 = asy.exact_f2_polar(HALF_PI, region, 300.0, th)
    q = to_polar(w, half)
    assert float(r2) == pytest.approx(q.r, rel=1e-13)
    assert float(t2) == pytest.approx(q.theta, abs=1e-12)
    assert isinstance(r2, mp.mpf)
