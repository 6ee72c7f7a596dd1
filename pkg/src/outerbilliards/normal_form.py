"""Birkhoff normal form of the semi-disc return map at the island centres.

Pipeline: Newton search for the fixed point of the exact return, a
polynomial fit of the return on a stencil around it, complex
diagonalisation of the linear part, and the twist coefficient ``alpha2``.
Every return evaluation runs the exact orbit; nothing asymptotic is assumed.

The H1 chart is ``x1 = x + y - 3n - 1/4``, ``y1 = y/2 - 1/2`` (affine, so it
is centred at the fixed point by subtraction). The eigen-coordinate ``a``
comes from ``z1 = M (a, conj a)`` with ``M = [[v, conj v], [1, 1]]``, where
``v`` is the eigenvector component of the eigenvalue in the lower half
plane; at the anchor this is ``v = 2 - sqrt(2) i``.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
import os

import numpy as np

from . import _kernels
from .errors import (ConditioningFailure, NoConvergence, NotElliptic, OrbitEscaped,
                     Resonance, SingularOrbit)
from .geometry import SEMIDISC, Point2
from .return_map import MAX_STEPS

COS_ALPHA0 = -7.0 / 9.0
ALPHA2_LIMIT = -4.0 * math.sqrt(2.0) / 9.0


def _ret(x, y, counts):
    x2, y2, st = _kernels.first_return(x, y, SEMIDISC.sb, SEMIDISC.cb, MAX_STEPS, counts)
    if st != 0:
        raise SingularOrbit(f"return from ({x}, {y}) failed with status {st}")
    return x2, y2


def _jacobian(p, h, counts):
    J = np.empty((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        a = _ret(*(p + e), counts)
        b = _ret(*(p - e), counts)
        J[:, j] = (np.subtract(a, b)) / (2 * h)
    return J


def find_fixed_point(n, seed=None, tol=1e-11, h=1e-6, max_iter=40):
    """Fixed point of the exact return near ``(3n - 3/4, 1)``.

    Raises ``NoConvergence`` if Newton stalls and ``NotElliptic`` if the
    Jacobian there is not elliptic.
    """
    if n < 20:
        raise ValueError("n must be at least 20")
    counts = np.zeros(7, dtype=np.int64)
    p = np.array(seed if seed is not None else (3 * n - 0.75, 1.0), float)
    for _ in range(max_iter):
        f = np.array(_ret(p[0], p[1], counts))
        g = f - p
        J = _jacobian(p, h, counts)
        dp = np.linalg.solve(J - np.eye(2), -g)
        p = p + dp
        if np.max(np.abs(dp)) < 1e-13 * max(1.0, np.max(np.abs(p))):
            break
    else:
        raise NoConvergence("fixed-point Newton did not converge")
    res = np.max(np.abs(np.array(_ret(p[0], p[1], counts)) - p))
    if res > tol:
        raise NoConvergence(f"fixed-point residual {res:.3g} above {tol}")
    J = _jacobian(p, h, counts)
    if abs(np.trace(J) / 2) >= 1:
        raise NotElliptic(f"trace/2 = {np.trace(J) / 2:.6g}")
    return Point2(float(p[0]), float(p[1]))


# ---------------------------------------------------------------- charts

def h1_offsets(dz):
    """Plane offsets from the fixed point to centred H1 coordinates."""
    dx, dy = dz
    return dx + dy, dy / 2


def h1_inverse(u, w):
    dy = 2 * w
    return u - dy, dy


# ------------------------------------------------------------ polynomials

def _monomials(deg):
    return [(i, d - i) for d in range(1, deg + 1) for i in range(d, -1, -1)]


def _pmul(p, q, deg):
    out = {}
    for (i, j), c in p.items():
        for (k, l), d in q.items():
            if i + j + k + l <= deg:
                out[(i + k, j + l)] = out.get((i + k, j + l), 0) + c * d
    return out


def _padd(p, q, s=1):
    out = dict(p)
    for m, c in q.items():
        out[m] = out.get(m, 0) + s * c
    return out


def _pscale(p, s):
    return {m: s * c for m, c in p.items()}


def _compose(poly, X, Y, deg):
    """``poly(X, Y)`` truncated at ``deg``; X, Y are polynomials without constants."""
    out = {}
    xp = [{(0, 0): 1}]
    yp = [{(0, 0): 1}]
    for _ in range(deg):
        xp.append(_pmul(xp[-1], X, deg))
        yp.append(_pmul(yp[-1], Y, deg))
    for (i, j), c in poly.items():
        if i + j <= deg:
            out = _padd(out, _pscale(_pmul(xp[i], yp[j], deg), c))
    return {m: c for m, c in out.items() if sum(m) > 0}


@dataclass(frozen=True)
class CubicReturnModel:
    """Return map around the fixed point in centred chart coordinates.

    ``coeffs[(i, j)] = (c1, c2)`` are the coefficients of ``x1^i y1^j`` in
    the two components, up to degree 3. ``F2coeffs``/``F3coeffs`` list them
    in the order ``x^2, xy, y^2`` and ``x^3, x^2 y, x y^2, y^3`` (component 1
    first, then component 2).
    """
    n: int
    fixed_point: Point2
    A: np.ndarray
    coeffs: dict = field(repr=False)
    residual: float = 0.0
    chart: str = "adiabatic"

    @property
    def F2coeffs(self):
        ms = [(2, 0), (1, 1), (0, 2)]
        return np.array([self.coeffs[m][0] for m in ms] + [self.coeffs[m][1] for m in ms])

    @property
    def F3coeffs(self):
        ms = [(3, 0), (2, 1), (1, 2), (0, 3)]
        return np.array([self.coeffs[m][0] for m in ms] + [self.coeffs[m][1] for m in ms])

    @property
    def det(self):
        return float(np.linalg.det(self.A))

    @property
    def half_trace(self):
        return float(np.trace(self.A) / 2)

    def component(self, c, deg=3):
        return {m: v[c] for m, v in self.coeffs.items() if sum(m) <= deg}


def _sample_h1(n, p, offsets, counts):
    base = None
    out = []
    for u, w in offsets:
        dx, dy = h1_inverse(u, w)
        x2, y2 = _ret(p[0] + dx, p[1] + dy, counts)
        if base is None:
            base = counts.copy()
        elif not np.array_equal(base, counts):
            raise ConditioningFailure("stencil straddles a discontinuity of the return map")
        out.append(h1_offsets((x2 - p[0], y2 - p[1])))
    return np.array(out)


def _sample_adiabatic(n, p, offsets, counts):
    from .return_map import plane_to_tilde, tilde_to_plane
    x0, y0 = plane_to_tilde(n, p)
    base = None
    out = []
    for u, w in offsets:
        z = tilde_to_plane(n, x0 + u, y0 + w)
        x2, y2 = _ret(z[0], z[1], counts)
        if base is None:
            base = counts.copy()
        elif not np.array_equal(base, counts):
            raise ConditioningFailure("stencil straddles a discontinuity of the return map")
        a, b = plane_to_tilde(n, (x2, y2))
        out.append((a - x0, b - y0))
    return np.array(out)


def taylor_fit(n, fixed_point, h=1e-2, k=9, degree=5, chart="adiabatic", tol=1e-7):
    """Least-squares polynomial reconstruction of the return map.

    A ``k x k`` stencil of half-width ``3h`` in the chosen chart is mapped
    by the exact return; a polynomial of ``degree`` is fitted and the terms
    up to degree 3 are kept.

    ``chart='adiabatic'`` is the full H1 conjugacy, ``(x, y) -> (rho, phi)
    -> (x~, y~)`` with the corrected region-I chart, centred at the fixed
    point. ``chart='affine'`` keeps only its affine head ``x1 = x + y - 3n -
    1/4``, ``y1 = y/2 - 1/2``. Both give the same twist coefficient; the
    individual quadratic and cubic coefficients agree with the asymptotic
    model only in the adiabatic chart, because the affine head leaves
    ``O(1/n)`` quadratic terms behind.
    """
    p = np.array(fixed_point, float)
    s = np.linspace(-3 * h, 3 * h, k)
    offsets = [(u, w) for u in s for w in s]
    counts = np.zeros(7, dtype=np.int64)
    if chart == "affine":
        vals = _sample_h1(n, p, offsets, counts)
    elif chart == "adiabatic":
        vals = _sample_adiabatic(n, p, offsets, counts)
    else:
        raise ValueError("chart must be 'adiabatic' or 'affine'")
    mons = _monomials(degree)
    pts = np.array(offsets) / h                 # scaled for conditioning
    M = np.array([[a**i * b**j for (i, j) in mons] for a, b in pts])
    if np.linalg.cond(M) > 1e10:
        raise ConditioningFailure("stencil design matrix is ill conditioned")
    sol, *_ = np.linalg.lstsq(M, vals, rcond=None)
    resid = float(np.max(np.abs(M @ sol - vals)))
    if resid > tol:
        raise ConditioningFailure(f"fit residual {resid:.3g} exceeds {tol}")
    coeffs = {}
    for idx, (i, j) in enumerate(mons):
        if i + j <= 3:
            scale = h ** (i + j)
            coeffs[(i, j)] = (sol[idx, 0] / scale, sol[idx, 1] / scale)
    A = np.array([[coeffs[(1, 0)][0], coeffs[(0, 1)][0]],
                  [coeffs[(1, 0)][1], coeffs[(0, 1)][1]]])
    return CubicReturnModel(n, Point2(*p), A, coeffs, resid, chart)


# -------------------------------------------------------- diagonalisation

@dataclass(frozen=True)
class DiagonalizedModel:
    """``a' = lambda a + sum G[(j, k)] a^k b^(j-k)`` with ``b = conj a``."""
    lam: complex
    M: np.ndarray
    G: dict
    model: CubicReturnModel = field(repr=False, default=None)

    def G1(self, j, k):
        return self.G.get((k, j - k), 0j)

    def G2(self, j, k):
        # second component is the conjugate map: coefficient of a^k b^(j-k)
        return np.conj(self.G.get((j - k, k), 0j))


def diagonalize(model):
    """Complex eigen-coordinates of the fitted model."""
    A = model.A
    ht = np.trace(A) / 2
    if abs(ht) >= 1:
        raise NotElliptic(f"trace/2 = {ht:.6g}")
    w, V = np.linalg.eig(A)
    i = int(np.argmin(w.imag))
    lam = complex(w[i])
    v = V[:, i] / V[1, i]
    M = np.array([[v[0], np.conj(v[0])], [1, 1]])
    Mi = np.linalg.inv(M)
    X = {(1, 0): M[0, 0], (0, 1): M[0, 1]}
    Y = {(1, 0): M[1, 0], (0, 1): M[1, 1]}
    P = [model.component(0), model.component(1)]
    C = [_compose(P[0], X, Y, 3), _compose(P[1], X, Y, 3)]
    G = {}
    for m in set(C[0]) | set(C[1]):
        if sum(m) >= 2:
            G[m] = complex(Mi[0, 0] * C[0].get(m, 0) + Mi[0, 1] * C[1].get(m, 0))
    return DiagonalizedModel(lam, M, G, model)


@dataclass(frozen=True)
class BirkhoffResult:
    alpha: float
    alpha2: complex
    lam: complex

    @property
    def cos_alpha(self):
        return math.cos(self.alpha)


def _resonance_guard(lam, kmax=4, tol=1e-6):
    for k in range(1, kmax + 1):
        if abs(lam**k - 1) < tol:
            raise Resonance(f"|lambda^{k} - 1| < {tol}")


def birkhoff_twist(diag):
    """Twist coefficient from the quadratic and cubic eigen-coefficients."""
    L = diag.lam
    _resonance_guard(L)
    g22, g21, g20 = diag.G1(2, 2), diag.G1(2, 1), diag.G1(2, 0)
    g32 = diag.G1(3, 2)
    a2 = -1j * (g22 * g21 / (L**2 * (L - 1)) + abs(g21)**2 / (L - 1)
                + 2 * g21 * g22 / (L * (1 - L)) + 2 * abs(g20)**2 / (L**3 - 1) + g32 / L)
    return BirkhoffResult(math.acos(max(-1.0, min(1.0, L.real))), complex(a2), L)


def homological_solve(diag):
    """Degree-3 near-identity change removing the non-resonant terms.

    First-order solution: ``h[(k, l)] = G[(k, l)] / (lambda^k conj(lambda)^l -
    lambda)`` for every monomial except the resonant ``a^2 b``. Returns
    ``(h, residual)``, where ``residual`` is the largest non-resonant
    coefficient of the conjugated model, up to degree 3.
    """
    L = diag.lam
    Lb = np.conj(L)
    h = {}
    for m, g in diag.G.items():
        if m == (2, 1):
            continue
        h[m] = g / (L**m[0] * Lb**m[1] - L)
    # map in (a, b) as a pair of polynomials; b-component is the conjugate
    Fa = _padd({(1, 0): L}, diag.G)
    Fb = {(m[1], m[0]): np.conj(c) for m, c in Fa.items()}
    Ha = _padd({(1, 0): 1}, h)
    Hb = {(m[1], m[0]): np.conj(c) for m, c in Ha.items()}
    # inverse of H to degree 3 by fixed-point iteration: H^-1 = id - h(H^-1)
    Ia, Ib = {(1, 0): 1}, {(0, 1): 1}
    for _ in range(3):
        ha = _compose(h, Ia, Ib, 3)
        Ia = _padd({(1, 0): 1}, ha, -1)
        Ib = {(m[1], m[0]): np.conj(c) for m, c in Ia.items()}
    FH_a = _compose(Fa, Ha, Hb, 3)
    FH_b = _compose(Fb, Ha, Hb, 3)
    N = _compose(Ia, FH_a, FH_b, 3)
    resid = max((abs(c) for m, c in N.items() if m not in ((1, 0), (2, 1))), default=0.0)
    return h, float(resid), N


# ---------------------------------------------------------------- rotation

def _threads(threads):
    if threads is None:
        threads = int(os.environ.get("BILLIARD_LAB_THREADS", "1") or 1)
    return max(1, int(threads))


def _birkhoff_weights(N):
    t = (np.arange(N) + 0.5) / N
    w = np.exp(-1.0 / (t * (1 - t)))
    return w / w.sum()


def rotation_profile(n, radii, returns=10**4, fixed_point=None, diag=None,
                     escape_radius=0.5, threads=None):
    """Rotation of the return map on orbits started at ``|a| = radius``.

    The per-return angle ``arg(a'/a)`` in the eigen-coordinate of the
    affine chart is averaged with smooth weights along the orbit; ``|a|^2``
    is averaged the same way. Returns a list of ``(mean |a|^2, rotation)``.
    With the eigenvalue in the lower half plane the intercept is
    ``-alpha`` and the slope estimates ``alpha2``.
    """
    if fixed_point is None:
        fixed_point = find_fixed_point(n)
    if diag is None:
        diag = diagonalize(taylor_fit(n, fixed_point, chart="affine"))
    p = np.array(fixed_point, float)
    Mi = np.linalg.inv(diag.M)
    wts = _birkhoff_weights(returns)

    def one(r):
        u, w = (diag.M @ np.array([r, r])).real
        dx, dy = h1_inverse(u, w)
        out = np.empty((returns + 1, 2))
        got = _kernels.return_orbit(p[0] + dx, p[1] + dy, SEMIDISC.sb, SEMIDISC.cb,
                                    returns, MAX_STEPS, out)
        if got < returns:
            raise OrbitEscaped(f"orbit at radius {r} failed after {got} returns")
        d = out - p
        if np.max(np.hypot(d[:, 0], d[:, 1])) > escape_radius:
            raise OrbitEscaped(f"orbit at radius {r} left the island neighbourhood")
        z1 = np.stack([d[:, 0] + d[:, 1], d[:, 1] / 2])
        a = Mi[0, 0] * z1[0] + Mi[0, 1] * z1[1]
        ang = np.angle(a[1:] / a[:-1])
        return float(np.dot(wts, np.abs(a[:-1])**2)), float(np.dot(wts, ang))

    with ThreadPoolExecutor(_threads(threads)) as ex:
        return list(ex.map(one, radii))


def profile_fit(profile):
    """Least-squares ``rotation = intercept + slope |a|^2``."""
    r2 = np.array([q[0] for q in profile])
    rot = np.array([q[1] for q in profile])
    slope, intercept = np.polyfit(r2, rot, 1)
    return float(intercept), float(slope)


def rn_diameter():
    """Plane diameter of the island box R_n (independent of n)."""
    # |d rho| < 9/1024 and |d phi| < 3/2048 with rho ~ x + y, phi ~ y/2
    dy = 2 * 3 / 2048
    dx = 9 / 1024 + dy
    return math.hypot(2 * dx, 2 * dy)


def island_grid(n, fixed_point, grid=10, sub=1.0):
    """Centred grid over R_n (scaled by ``sub``) as plane points."""
    p = np.array(fixed_point, float)
    us = np.linspace(-9 / 1024, 9 / 1024, grid) * sub
    ws = np.linspace(-3 / 2048, 3 / 2048, grid) * sub
    pts = []
    for u in us:
        for w in ws:
            dx, dy = h1_inverse(u, w)
            pts.append((p[0] + dx, p[1] + dy))
    return pts


def survival(points, fixed_point, horizon, radius, threads=None):
    """Returns survived by each start point (compiled, thread-parallel)."""
    cx, cy = float(fixed_point[0]), float(fixed_point[1])

    def one(z):
        return int(_kernels.bounded_returns(float(z[0]), float(z[1]), SEMIDISC.sb, SEMIDISC.cb,
                                            horizon, MAX_STEPS, cx, cy, radius))
    with ThreadPoolExecutor(_threads(threads)) as ex:
        return list(ex.map(one, points))


def island_scan(n, grid=10, horizon=10**4, sub=1.0, fixed_point=None, threads=None):
    """Fraction of a centred grid over R_n whose orbits stay bounded.

    Bounded means within ``2 diam(R_n)`` of the fixed point for
    ``horizon`` returns.
    """
    if fixed_point is None:
        fixed_point = find_fixed_point(n)
    pts = island_grid(n, fixed_point, grid, sub)
    surv = survival(pts, fixed_point, horizon, 2 * rn_diameter(), threads)
    return sum(s == horizon for s in surv) / len(surv)
