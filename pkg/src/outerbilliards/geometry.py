"""Exact outer billiard map around a circular sector.

The table is the sector ``{x^2 + y^2 <= 1, y >= -cos(beta)}`` with
``beta`` in ``(0, pi/2]``. Its two corners are ``O1 = (sin b, -cos b)`` and
``O2 = (-sin b, -cos b)``. For ``beta = pi/2`` the chord is the x-axis and the
table is the upper half disc ``{y >= 0}``, i.e. the semi-disc frame needs no
translation.

A point ``z`` outside the table is sent to ``2p - z`` where ``p`` is the point
of contact of the supporting line through ``z`` that leaves the table on its
right-hand side. This orientation is the one for which

    (2+sqrt3, 1) -> (-sqrt3, -1) -> (0, 2) -> (sqrt3, -1) -> (-2-sqrt3, 1)

is a closed orbit of the semi-disc map.

The square of the map is smooth on six regions. In region I it is ``T R1``
(reflect in ``O1`` first, then in the tangency point), II is ``R2 T``, III is
``R1 T``, IV is ``T R2``, and V, VI are ``T T`` in the upper and lower half.
For the semi-disc the ``T T`` wedge in the upper half is empty and the thin
wedge between the tangent line at ``O1`` and its preimage, where the square is
the translation ``R2 R1``, carries the label V instead.
"""
from dataclasses import dataclass
from enum import IntEnum
import math
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import Ambiguous, InsideShape, OnSingularity, RegionExit

SINGULAR_TOL = 1e-9


class Point2(NamedTuple):
    x: float
    y: float


class PolarPoint(NamedTuple):
    """Polar chart point. In the lower half the angle is shifted by pi.

    ``theta`` is measured from the positive x-axis for ``half='upper'`` and
    from the negative x-axis for ``half='lower'``, so it lies in ``[0, pi]``
    for points of the respective half plane.
    """
    r: float
    theta: float
    half: str = "upper"


class SupportPoint(NamedTuple):
    kind: str
    location: Point2


class Region(IntEnum):
    I = 1
    II = 2
    III = 3
    IV = 4
    V = 5
    VI = 6

    @property
    def lower(self):
        return self in (Region.III, Region.IV, Region.VI)


KIND_NAMES = {_kernels.TANGENT: "tangency", _kernels.VERTEX1: "vertex1",
              _kernels.VERTEX2: "vertex2"}


@dataclass(frozen=True)
class SectorShape:
    """Circular sector with corner half-angle ``beta``."""
    beta: float = math.pi / 2

    def __post_init__(self):
        if not 0.0 < self.beta <= math.pi / 2 + 1e-15:
            raise ValueError("beta must lie in (0, pi/2]")

    @property
    def sb(self):
        return math.sin(self.beta)

    @property
    def cb(self):
        # cos(pi/2) is 6e-17 in floating point; snap it so the semi-disc chord is y = 0
        return 0.0 if self.beta == math.pi / 2 else math.cos(self.beta)

    @property
    def o1(self):
        return Point2(self.sb, -self.cb)

    @property
    def o2(self):
        return Point2(-self.sb, -self.cb)

    def contains(self, z):
        x, y = z
        return x * x + y * y <= 1.0 and y >= -self.cb

    def support_value(self, nx, ny):
        """Support function ``max_{q in sector} n.q`` for a unit vector ``n``."""
        if ny >= -self.cb:
            return 1.0
        return max(nx * self.sb, -nx * self.sb) - ny * self.cb


SEMIDISC = SectorShape(math.pi / 2)


def to_polar(z, half=None):
    """Plane point to the shifted polar chart.

    The half plane is taken from the sign of ``y`` unless given.
    """
    x, y = z
    if half is None:
        half = "upper" if y >= 0 else "lower"
    if half == "lower":
        x, y = -x, -y
    return PolarPoint(math.hypot(x, y), math.atan2(y, x), half)


def to_plane(p):
    r, th, half = p
    x, y = r * math.cos(th), r * math.sin(th)
    if half == "lower":
        return Point2(-x, -y)
    return Point2(x, y)


def _tangent_points(z):
    x, y = z
    r2 = x * x + y * y
    if r2 <= 1.0:
        return []
    w = math.sqrt(r2 - 1.0)
    return [Point2((x + w * y) / r2, (y - w * x) / r2),
            Point2((x - w * y) / r2, (y + w * x) / r2)]


def _ray_distance(z, origin, direction):
    px, py = z[0] - origin[0], z[1] - origin[1]
    t = max(px * direction[0] + py * direction[1], 0.0)
    return math.hypot(px - t * direction[0], py - t * direction[1])


def singular_distance(shape, z):
    """Distance from ``z`` to the three discontinuity half-lines of F.

    These are the continuation of the chord beyond ``O1`` and the outer
    halves of the tangent lines at ``O1`` and ``O2``.
    """
    b = shape.beta
    d1 = _ray_distance(z, shape.o1, (1.0, 0.0))
    d2 = _ray_distance(z, shape.o1, (math.cos(b), math.sin(b)))
    d3 = _ray_distance(z, shape.o2, (math.cos(b), -math.sin(b)))
    return min(d1, d2, d3)


def support_point(shape, z, tol=SINGULAR_TOL):
    """Contact point of the supporting line through ``z``.

    All candidates (both corners and both tangency points on the arc) are
    tested; a candidate survives when the whole sector lies weakly on the
    right of the ray from ``z`` through it.

    Raises
    ------
    InsideShape
        If ``z`` lies in the sector.
    Ambiguous
        If two different candidates survive and ``z`` sits on a singular line.
    """
    z = Point2(float(z[0]), float(z[1]))
    if shape.contains(z):
        raise InsideShape(f"{tuple(z)} lies inside the sector")
    cands = [("vertex1", shape.o1), ("vertex2", shape.o2)]
    for t in _tangent_points(z):
        if t.y >= -shape.cb:
            cands.append(("tangency", t))
    kept = []
    for kind, p in cands:
        dx, dy = p[0] - z[0], p[1] - z[1]
        norm = math.hypot(dx, dy)
        if norm == 0.0:
            continue
        nx, ny = -dy / norm, dx / norm            # left normal
        viol = shape.support_value(nx, ny) - (nx * z[0] + ny * z[1])
        if viol <= tol:
            kept.append((viol, kind, p))
    if not kept:
        raise Ambiguous(f"no supporting candidate found for {tuple(z)}")
    kept.sort(key=lambda item: item[0])
    best = kept[0]
    distinct = [k for k in kept[1:]
                if math.hypot(k[2][0] - best[2][0], k[2][1] - best[2][1]) > tol]
    if distinct and singular_distance(shape, z) < tol:
        raise Ambiguous(f"{tuple(z)} has two support points")
    return SupportPoint(best[1], Point2(*best[2]))


def _check_regular(shape, z, tol):
    if shape.contains(z):
        raise InsideShape(f"{tuple(z)} lies inside the sector")
    if singular_distance(shape, z) < tol:
        raise OnSingularity(f"{tuple(z)} is within {tol} of a discontinuity line")


def outer_billiard_step(shape, z, tol=SINGULAR_TOL):
    """One application of the outer billiard map, ``z -> 2p - z``."""
    z = Point2(float(z[0]), float(z[1]))
    _check_regular(shape, z, tol)
    p = support_point(shape, z, tol).location
    return Point2(2.0 * p.x - z.x, 2.0 * p.y - z.y)


def fast_step(shape, z):
    """Unchecked map step from the compiled kernel; returns (point, kind)."""
    x, y, k = _kernels.step(float(z[0]), float(z[1]), shape.sb, shape.cb)
    if k < 0:
        raise InsideShape(f"{tuple(z)} lies inside the sector")
    return Point2(x, y), KIND_NAMES[k]


def orbit(shape, z, steps):
    """Array of ``steps + 1`` points of the orbit of ``z`` (compiled kernel)."""
    out = np.empty((steps + 1, 2))
    x, y = float(z[0]), float(z[1])
    out[0] = x, y
    sb, cb = shape.sb, shape.cb
    for i in range(steps):
        x, y, k = _kernels.step(x, y, sb, cb)
        if k < 0:
            raise InsideShape("orbit entered the sector")
        out[i + 1] = x, y
    return out


def classify_region(shape, z, tol=SINGULAR_TOL):
    """Continuity region of F^2 containing ``z``.

    The region follows from the support kinds at ``z`` and at ``F(z)``. Points
    within ``tol`` of a discontinuity line, or whose image is, raise
    ``OnSingularity``.
    """
    z = Point2(float(z[0]), float(z[1]))
    _check_regular(shape, z, tol)
    k0 = support_point(shape, z, tol).kind
    z1 = outer_billiard_step(shape, z, tol)
    if singular_distance(shape, z1) < tol:
        raise OnSingularity(f"the image of {tuple(z)} lies on a discontinuity line")
    k1 = support_point(shape, z1, tol).kind
    code = {v: k for k, v in KIND_NAMES.items()}
    reg = _kernels.region_code(code[k0], code[k1], z.y >= -shape.cb)
    if reg == 0:
        raise RegionExit(f"{tuple(z)} is too close to the table for the six-region picture")
    return Region(reg)


def reflect_vertex(shape, z, which):
    o = shape.o1 if which == 1 else shape.o2
    return Point2(2.0 * o.x - z[0], 2.0 * o.y - z[1])


def reflect_tangent(z):
    """Reflection in the right-hand tangency point of the full unit circle."""
    x, y = float(z[0]), float(z[1])
    r2 = x * x + y * y
    if r2 <= 1.0:
        raise InsideShape("no tangent line from inside the unit disc")
    w = math.sqrt(r2 - 1.0)
    tx, ty = (x + w * y) / r2, (y - w * x) / r2
    return Point2(2.0 * tx - x, 2.0 * ty - y)


def compose_region(shape, region, z):
    """The named composition for ``region`` applied to ``z``.

    The tangency reflection uses the whole circle, so the result is the
    analytic continuation of F^2 from inside the region.
    """
    region = Region(region)
    T = reflect_tangent
    if region == Region.I:
        return T(reflect_vertex(shape, z, 1))
    if region == Region.II:
        return reflect_vertex(shape, T(z), 2)
    if region == Region.III:
        return reflect_vertex(shape, T(z), 1)
    if region == Region.IV:
        return T(reflect_vertex(shape, z, 2))
    if region == Region.V and shape.beta == math.pi / 2:
        return reflect_vertex(shape, reflect_vertex(shape, z, 1), 2)
    return T(T(z))


def jacobian_det(shape, z, h=1e-5, tol=SINGULAR_TOL):
    """Central finite-difference determinant of DF at ``z``."""
    z = Point2(float(z[0]), float(z[1]))
    kind = support_point(shape, z, tol).kind
    cols = []
    for e in ((h, 0.0), (0.0, h)):
        zp = Point2(z.x + e[0], z.y + e[1])
        zm = Point2(z.x - e[0], z.y - e[1])
        if (support_point(shape, zp, tol).kind != kind
                or support_point(shape, zm, tol).kind != kind):
            raise OnSingularity("finite-difference stencil straddles a discontinuity")
        fp = outer_billiard_step(shape, zp, tol)
        fm = outer_billiard_step(shape, zm, tol)
        cols.append(((fp.x - fm.x) / (2 * h), (fp.y - fm.y) / (2 * h)))
    return cols[0][0] * cols[1][1] - cols[1][0] * cols[0][1]
