import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from outerbilliards.asymptotics import region_band
from outerbilliards.errors import InsideShape, OnSingularity
from outerbilliards.geometry import (SEMIDISC, PolarPoint, Region, SectorShape, classify_region,
                                     compose_region, jacobian_det, orbit, outer_billiard_step,
                                     support_point, to_plane, to_polar)

S3 = math.sqrt(3.0)


def boundary_samples(shape, k=20001):
    """Dense sample of the sector boundary: the arc plus the chord."""
    b = shape.beta
    t = np.linspace(math.pi / 2 - b, math.pi / 2 + b, k)
    arc = np.stack([np.cos(t), np.sin(t)], axis=1)
    cb = 0.0 if b == math.pi / 2 else math.cos(b)
    chord = np.stack([np.linspace(-math.sin(b), math.sin(b), 201), np.full(201, -cb)], axis=1)
    # the whole unit circle part above the chord, not just the sector around the top
    full = np.linspace(0, 2 * math.pi, k)
    circ = np.stack([np.cos(full), np.sin(full)], axis=1)
    circ = circ[circ[:, 1] >= -cb]
    return np.concatenate([arc, chord, circ])


def brute_force_image(shape, z):
    """Oracle: the boundary sample point maximising the angle seen from z on
    the left side of the rays; the sector is then on the right of z -> p."""
    B = boundary_samples(shape)
    d = B - np.asarray(z)
    ang = np.arctan2(d[:, 1], d[:, 0])
    ref = math.atan2(-z[1], -z[0])             # direction to the origin (inside)
    rel = (ang - ref + math.pi) % (2 * math.pi) - math.pi
    p = B[np.argmax(rel)]                       # extreme counterclockwise contact
    return 2 * p - np.asarray(z), p


# ---------------------------------------------------------------- examples

def test_figure_orbit_first_step():
    z = outer_billiard_step(SEMIDISC, (2 + S3, 1.0))
    assert z == pytest.approx((-S3, -1.0), abs=1e-12)


def test_figure_orbit_tangency_step():
    z = outer_billiard_step(SEMIDISC, (0.0, 2.0))
    assert z == pytest.approx((S3, -1.0), abs=1e-12)


def test_vertex_step_from_below_right():
    # the supporting line through (3, -1) touches the left corner (-1, 0)
    z = outer_billiard_step(SEMIDISC, (3.0, -1.0))
    assert z == pytest.approx((-5.0, 1.0), abs=1e-12)
    oracle, _ = brute_force_image(SEMIDISC, (3.0, -1.0))
    assert z == pytest.approx(tuple(oracle), abs=1e-3)


@pytest.mark.parametrize("z, kind, loc", [
    ((2 + S3, 1.0), "vertex1", (1.0, 0.0)),
    ((0.0, 2.0), "tangency", (S3 / 2, 0.5)),
    ((-2 - S3, 1.0), "tangency", (0.0, 1.0)),
])
def test_support_point_examples(z, kind, loc):
    sp = support_point(SEMIDISC, z)
    assert sp.kind == kind
    assert tuple(sp.location) == pytest.approx(loc, abs=1e-12)


def test_five_cycle_closes():
    z0 = (2 + S3, 1.0)
    z = z0
    for _ in range(5):
        z = outer_billiard_step(SEMIDISC, z)
    assert math.dist(z, z0) < 1e-9


def test_compiled_orbit_matches_checked_steps():
    pts = orbit(SEMIDISC, (2 + S3, 1.0), 5)
    assert np.allclose(pts[-1], pts[0], atol=1e-9)
    assert np.allclose(pts[2], (0.0, 2.0), atol=1e-12)


@pytest.mark.parametrize("z, region", [
    ((100.0, 0.5), Region.I),
    ((-100.0, -0.5), Region.III),
    ((100.0, -0.5), Region.IV),
    ((2.0, 100.0), Region.V),
    ((0.0, 100.0), Region.II),
])
def test_classify_examples(z, region):
    assert classify_region(SEMIDISC, z) == region


@pytest.mark.parametrize("beta, z", [
    (math.pi / 2, (50.0, 3.0)),
    (math.pi / 2, (0.0, 50.0)),
    (math.pi / 3, (-40.0, 5.0)),
])
def test_jacobian_examples(beta, z):
    assert jacobian_det(SectorShape(beta), z, 1e-5) == pytest.approx(1.0, abs=1e-6)


def test_inside_and_singular_points_raise():
    with pytest.raises(InsideShape):
        outer_billiard_step(SEMIDISC, (0.1, 0.1))
    with pytest.raises(OnSingularity):
        outer_billiard_step(SEMIDISC, (5.0, 0.0))          # continuation of the chord
    with pytest.raises(OnSingularity):
        outer_billiard_step(SEMIDISC, (1.0, 7.0))          # tangent line at (1, 0)


def test_beta_range_validated():
    with pytest.raises(ValueError):
        SectorShape(2.0)
    with pytest.raises(ValueError):
        SectorShape(0.0)


# -------------------------------------------------------------- properties

BETAS = (math.pi / 6, math.pi / 4, math.pi / 3, math.pi / 2)


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(BETAS), st.floats(3.0, 60.0), st.floats(0, 2 * math.pi))
def test_reflection_identity(beta, r, t):
    shape = SectorShape(beta)
    z = (r * math.cos(t), r * math.sin(t))
    try:
        w = outer_billiard_step(shape, z)
    except OnSingularity:
        return
    p = support_point(shape, z).location
    assert w.x + z[0] == pytest.approx(2 * p.x, abs=1e-12 * r)
    assert w.y + z[1] == pytest.approx(2 * p.y, abs=1e-12 * r)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(BETAS), st.floats(3.0, 60.0), st.floats(0, 2 * math.pi))
def test_step_matches_brute_force_oracle(beta, r, t):
    shape = SectorShape(beta)
    z = (r * math.cos(t), r * math.sin(t))
    try:
        w = outer_billiard_step(shape, z, tol=1e-3)
    except OnSingularity:
        return
    oracle, _ = brute_force_image(shape, z)
    # boundary sampling step is ~3e-4 on the arc
    assert math.dist(w, oracle) < 2e-3 * r


@settings(max_examples=300, deadline=None)
@given(st.floats(10.0, 1e6), st.floats(1e-6, math.pi - 1e-6), st.sampled_from(["upper", "lower"]))
def test_polar_round_trip(r, theta, half):
    p = to_polar(to_plane(PolarPoint(r, theta, half)), half)
    assert p.r == pytest.approx(r, rel=1e-12)
    assert p.theta == pytest.approx(theta, abs=1e-12)


def test_lower_chart_is_shifted_by_pi():
    p = to_polar((-100.0, -1.0))
    assert p.half == "lower"
    assert p.theta == pytest.approx(math.atan2(1.0, 100.0), abs=1e-15)


def _region_points(beta, region, count, rng):
    half = "lower" if region.lower else "upper"
    pts = []
    while len(pts) < count:
        r = rng.uniform(30, 400)
        lo, hi = region_band(beta, region, r)
        m = min(0.5 / r, 0.2 * (hi - lo))
        th = rng.uniform(lo + m, hi - m)
        pts.append(to_plane(PolarPoint(r, th, half)))
    return pts


REGION_CASES = [(math.pi / 2, reg) for reg in Region] + [
    (math.pi / 3, reg) for reg in Region]


@pytest.mark.parametrize("beta, region", REGION_CASES)
def test_region_composition_consistency(beta, region):
    shape = SectorShape(beta)
    rng = np.random.default_rng(int(region) + 10 * int(beta * 100))
    pts = _region_points(beta, region, 1000, rng)
    for z in pts:
        assert classify_region(shape, z) == region
        w = outer_billiard_step(shape, outer_billiard_step(shape, z))
        c = compose_region(shape, region, z)
        assert math.dist(w, c) < 1e-10 * max(1.0, math.hypot(*z))


@pytest.mark.parametrize("beta, region", REGION_CASES)
def test_area_preservation_per_region(beta, region):
    shape = SectorShape(beta)
    rng = np.random.default_rng(100 + int(region))
    for z in _region_points(beta, region, 100, rng):
        try:
            d = jacobian_det(shape, z)
        except OnSingularity:
            continue
        assert abs(abs(d) - 1) < 1e-6
