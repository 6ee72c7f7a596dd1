"""Compiled inner loops for the exact outer billiard map.

Everything here works on plain floats so numba can compile it. The public
wrappers in :mod:`outerbilliards.geometry` and :mod:`outerbilliards.return_map`
add validation and error types on top.
"""
import math

import numba as nb
import numpy as np

# support kinds
TANGENT = 0
VERTEX1 = 1
VERTEX2 = 2


@nb.njit(cache=True, nogil=True)
def support(x, y, sb, cb):
    """Support point of the sector seen from (x, y), shape on the right.

    Returns (px, py, kind). kind is -1 when (x, y) lies inside the shape.
    """
    r2 = x * x + y * y
    if r2 <= 1.0 and y >= -cb:
        return 0.0, 0.0, -1
    if r2 > 1.0:
        w = math.sqrt(r2 - 1.0)
        tx = (x + w * y) / r2
        ty = (y - w * x) / r2
        if ty >= -cb:
            return tx, ty, TANGENT
    # the line through one vertex leaves the other vertex on its right
    cr = (sb - x) * (-cb - y) - (-cb - y) * (-sb - x)
    if cr <= 0.0:
        return sb, -cb, VERTEX1
    return -sb, -cb, VERTEX2


@nb.njit(cache=True, nogil=True)
def step(x, y, sb, cb):
    px, py, k = support(x, y, sb, cb)
    return 2.0 * px - x, 2.0 * py - y, k


@nb.njit(cache=True, nogil=True)
def region_code(k0, k1, upper):
    """F^2 region from the support kinds of z and F(z); 0 if none applies."""
    if k0 == VERTEX1 and k1 == TANGENT:
        return 1
    if k0 == TANGENT and k1 == VERTEX2:
        return 2
    if k0 == TANGENT and k1 == VERTEX1:
        return 3
    if k0 == VERTEX2 and k1 == TANGENT:
        return 4
    if k0 == TANGENT and k1 == TANGENT:
        return 5 if upper else 6
    if k0 == VERTEX1 and k1 == VERTEX2:
        # the translation wedge next to the tangent line at the right vertex
        return 5
    return 0


@nb.njit(cache=True, nogil=True)
def first_return(x, y, sb, cb, max_steps, counts):
    """Iterate F^2 from a point of region I until it re-enters region I.

    ``counts`` (length 7) receives the number of F^2 steps spent in each
    region. Returns (x, y, status) with status 0 on success, 1 when the step
    budget runs out and 2 when the orbit hits the shape or an unknown region.
    """
    for i in range(7):
        counts[i] = 0
    left = False
    for _ in range(max_steps):
        x1, y1, k0 = step(x, y, sb, cb)
        if k0 < 0:
            return x, y, 2
        if k0 == VERTEX1 and left:
            return x, y, 0
        if k0 != VERTEX1:
            left = True
        x2, y2, k1 = step(x1, y1, sb, cb)
        if k1 < 0:
            return x, y, 2
        reg = region_code(k0, k1, y >= -cb)
        counts[reg] += 1
        x = x2
        y = y2
    return x, y, 1


@nb.njit(cache=True, nogil=True)
def iterate_returns(x, y, sb, cb, n_returns, max_steps, out):
    """Store successive first-return points in ``out`` (n_returns x 2).

    Returns the number of returns completed before a failure.
    """
    counts = np.zeros(7, dtype=np.int64)
    for i in range(n_returns):
        x, y, st = first_return(x, y, sb, cb, max_steps, counts)
        if st != 0:
            return i
        out[i, 0] = x
        out[i, 1] = y
    return n_returns


@nb.njit(cache=True, nogil=True)
def _ray_dist(x, y, ox, oy, dx, dy):
    px, py = x - ox, y - oy
    t = px * dx + py * dy
    if t < 0.0:
        t = 0.0
    return math.hypot(px - t * dx, py - t * dy)


@nb.njit(cache=True, nogil=True)
def singular_distance(x, y, sb, cb):
    """Distance to the three discontinuity half-lines of F."""
    beta = math.atan2(sb, cb)
    d1 = _ray_dist(x, y, sb, -cb, 1.0, 0.0)
    d2 = _ray_dist(x, y, sb, -cb, math.cos(beta), math.sin(beta))
    d3 = _ray_dist(x, y, -sb, -cb, math.cos(beta), -math.sin(beta))
    return min(d1, min(d2, d3))


@nb.njit(cache=True, nogil=True)
def first_return_checked(x, y, sb, cb, max_steps, counts, tol):
    """:func:`first_return` that also stops (status 3) near a singular line."""
    for i in range(7):
        counts[i] = 0
    left = False
    for _ in range(max_steps):
        if singular_distance(x, y, sb, cb) < tol:
            return x, y, 3
        x1, y1, k0 = step(x, y, sb, cb)
        if k0 < 0:
            return x, y, 2
        if k0 == VERTEX1 and left:
            return x, y, 0
        if k0 != VERTEX1:
            left = True
        if singular_distance(x1, y1, sb, cb) < tol:
            return x, y, 3
        x2, y2, k1 = step(x1, y1, sb, cb)
        if k1 < 0:
            return x, y, 2
        reg = region_code(k0, k1, y >= -cb)
        counts[reg] += 1
        x = x2
        y = y2
    return x, y, 1


@nb.njit(cache=True, nogil=True)
def inverse_step(x, y, sb, cb):
    """F^{-1}: the mirror x -> -x conjugates F to its inverse."""
    x1, y1, k = step(-x, y, sb, cb)
    return -x1, y1, k


@nb.njit(cache=True, nogil=True)
def bounded_returns(x, y, sb, cb, n_returns, max_steps, cx, cy, radius):
    """Number of returns (up to ``n_returns``) staying within ``radius`` of (cx, cy)."""
    counts = np.zeros(7, dtype=np.int64)
    for i in range(n_returns):
        x, y, st = first_return(x, y, sb, cb, max_steps, counts)
        if st != 0:
            return i
        if math.hypot(x - cx, y - cy) > radius:
            return i
    return n_returns


@nb.njit(cache=True, nogil=True)
def return_orbit(x, y, sb, cb, n_returns, max_steps, out):
    """Like :func:`iterate_returns` but ``out[0]`` is the start point."""
    out[0, 0] = x
    out[0, 1] = y
    counts = np.zeros(7, dtype=np.int64)
    for i in range(1, n_returns + 1):
        x, y, st = first_return(x, y, sb, cb, max_steps, counts)
        if st != 0:
            return i - 1
        out[i, 0] = x
        out[i, 1] = y
    return n_returns
