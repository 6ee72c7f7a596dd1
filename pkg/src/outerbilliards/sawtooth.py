"""The sawtooth cylinder map, its piecewise-rotation picture and the
Fermi-Ulam collision normal form.

``L(R, phi) = (R + D({phi - R} - 1/2), {phi - R})`` on ``[R0, oo) x T``. On
each strip ``C_n = {n - 1 < R - phi < n}`` it is affine with linear part
``[[1 - D, D], [-1, 1]]``, elliptic for ``0 < D < 4``. The shear

    Rb = 2/(sqrt(D) sqrt(4 - D)) R - sqrt(D)/sqrt(4 - D) phi,   phib = phi

turns every branch into a clockwise rotation by ``alpha = arccos(1 - D/2)``
about ``(Rb_n, 1/2)``, ``Rb_n = (4n - D)/(2 sqrt(D) sqrt(4 - D))``. When
``alpha = pi/m`` the regular ``2m``-gon ``O_n`` with apothem 1/2 around that
centre is invariant and blocks all radial transport.

Conjugated coordinates carry a ``b`` suffix (``Rb``, ``phib``). Barrier
polygons are stored as ``(cx, cy, apothem, m)``: a regular ``2m``-gon whose
bottom edge is horizontal.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math
import os

import numba as nb
import numpy as np

from .errors import EnergyTooLow, NotClosed, OnBoundary
from .return_map import CylinderState

BOUNDARY_TOL = 1e-12
EDGE_TOL = 1e-12


@nb.njit(cache=True, nogil=True)
def _zero_perturbation(R, phi):
    return 0.0, 0.0


def inverse_r_perturbation(c, c_phi=0.0):
    """Compiled perturbation ``(c/R, c_phi/R)``."""
    c = float(c)
    c_phi = float(c_phi)

    @nb.njit(nogil=True)
    def pert(R, phi):
        return c / R, c_phi / R
    return pert


@dataclass(frozen=True)
class SawtoothSystem:
    """``T = L^k + perturbation``; the perturbation is ``(R, phi) -> (dR, dphi)``.

    ``perturbation`` should be a numba-compiled function so the ensemble
    kernels can inline it; ``None`` means the pure sawtooth map.
    """
    delta: float
    k: int = 1
    perturbation: object = None

    def __post_init__(self):
        if not 0.0 < self.delta < 4.0:
            raise ValueError("delta must lie in (0, 4) for the elliptic regime")
        if self.k < 1:
            raise ValueError("k must be a positive integer")

    @property
    def alpha(self):
        return math.acos(1.0 - self.delta / 2.0)

    @property
    def s(self):
        """``sqrt(D) sqrt(4 - D)``, twice the sine of ``alpha``."""
        return math.sqrt(self.delta) * math.sqrt(4.0 - self.delta)

    @property
    def matrix(self):
        d = self.delta
        return np.array([[1.0 - d, d], [-1.0, 1.0]])

    @property
    def conjugacy(self):
        d, s = self.delta, self.s
        return np.array([[2.0 / s, -d / s], [0.0, 1.0]])

    def center(self, n):
        """Conjugated centre ``(Rb_n, 1/2)`` of the rhombus ``D_n``."""
        return (4.0 * n - self.delta) / (2.0 * self.s), 0.5


def delta_for(m):
    """Shear parameter with rotation angle ``pi/m``."""
    return 2.0 - 2.0 * math.cos(math.pi / m)


def _frac_checked(t, tol=BOUNDARY_TOL):
    f = t - math.floor(t)
    if f < tol or f > 1.0 - tol:
        raise OnBoundary(f"fractional part of {t!r} is within {tol} of an integer")
    return f


def sawtooth_step(sys, s, tol=BOUNDARY_TOL):
    """One application of ``L``; raises ``OnBoundary`` on a strip boundary."""
    R, phi = s
    f = _frac_checked(phi - R, tol)
    return CylinderState(R + sys.delta * (f - 0.5), f)


def perturbed_step(sys, s, tol=BOUNDARY_TOL):
    """``L^k`` followed by the perturbation, angle wrapped to ``[0, 1)``."""
    for _ in range(sys.k):
        s = sawtooth_step(sys, s, tol)
    if sys.perturbation is None:
        return s
    dR, dphi = sys.perturbation(s.R, s.phi)
    return CylinderState(s.R + dR, (s.phi + dphi) % 1.0)


def strip_index(s):
    """``n`` with ``s`` in ``C_n``."""
    return math.floor(s[0] - s[1]) + 1


def conjugate(sys, s):
    """``(R, phi) -> (Rb, phib)``."""
    R, phi = s
    return (2.0 * R - sys.delta * phi) / sys.s, phi


def conjugate_inverse(sys, sb):
    Rb, phib = sb
    return CylinderState((sys.s * Rb + sys.delta * phib) / 2.0, phib)


def rotate(sys, p, n, times=1):
    """Clockwise rotation of a conjugated point about the centre of ``D_n``."""
    cx, cy = sys.center(n)
    a = -sys.alpha * times
    ca, sa = math.cos(a), math.sin(a)
    dx, dy = p[0] - cx, p[1] - cy
    return cx + ca * dx - sa * dy, cy + sa * dx + ca * dy


def piecewise_rotation(sys, p, branch=None, tol=BOUNDARY_TOL):
    """The conjugated map ``R_D``. ``branch`` forces the rotation of ``D_branch``
    (its continuous extension to the closed rhombus)."""
    if branch is None:
        branch = strip_index(conjugate_inverse(sys, p))
        R, phi = conjugate_inverse(sys, p)
        _frac_checked(phi - R, tol)
    return rotate(sys, p, branch)


@dataclass(frozen=True)
class RhombusDomain:
    """Conjugated image ``D_n`` of the strip piece ``C_n`` with ``0 <= phi <= 1``."""
    n: int
    center: tuple
    vertices: tuple

    @property
    def interior_angle(self):
        # angle at the corner (n - 1, 0); the other pair is pi - alpha
        a, b, c = (np.array(v) for v in (self.vertices[-1], self.vertices[0], self.vertices[1]))
        u, w = a - b, c - b
        return math.acos(np.dot(u, w) / np.linalg.norm(u) / np.linalg.norm(w))


def rhombus(sys, n):
    corners = [(n - 1.0, 0.0), (n, 0.0), (n + 1.0, 1.0), (n, 1.0)]
    vs = tuple(tuple(conjugate(sys, c)) for c in corners)
    return RhombusDomain(n, sys.center(n), vs)


# ---------------------------------------------------------------- polygons

def winding_number(p, vertices, tol=EDGE_TOL):
    """Winding number of a closed polygon around ``p``.

    Points within ``tol`` of an edge return ``None`` (on the boundary).
    """
    x, y = p
    w = 0
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        ex, ey = x1 - x0, y1 - y0
        L2 = ex * ex + ey * ey
        t = min(1.0, max(0.0, ((x - x0) * ex + (y - y0) * ey) / L2))
        if math.hypot(x - x0 - t * ex, y - y0 - t * ey) <= tol:
            return None
        cr = ex * (y - y0) - ey * (x - x0)
        if y0 <= y < y1 and cr > 0:
            w += 1
        elif y1 <= y < y0 and cr < 0:
            w -= 1
    return w


@dataclass(frozen=True)
class InvariantPolygon:
    """Regular ``2m``-gon around the centre of ``D_n`` (conjugated coordinates).

    Vertices are listed in the order in which the rotation visits them,
    starting from ``a``, the lower-right corner of ``D_n``.
    """
    m: int
    n: int
    vertices: tuple
    center: tuple
    apothem: float = 0.5
    closure: float = 0.0

    def contains(self, p, tol=EDGE_TOL):
        """True inside, False outside, None within ``tol`` of the boundary."""
        w = winding_number(p, self.vertices, tol)
        return None if w is None else w != 0

    def side(self, p, tol=EDGE_TOL):
        """``'inside'``, ``'left'``, ``'right'`` or ``'boundary'``."""
        c = self.contains(p, tol)
        if c is None:
            return "boundary"
        if c:
            return "inside"
        return "left" if p[0] < self.center[0] else "right"

    @property
    def rightmost(self):
        return max(v[0] for v in self.vertices)

    @property
    def leftmost(self):
        return min(v[0] for v in self.vertices)

    @property
    def spec(self):
        """Kernel representation ``(cx, cy, apothem, m)``."""
        return (self.center[0], self.center[1], self.apothem, float(self.m))

    def scaled(self, factor):
        cx, cy = self.center
        vs = tuple((cx + factor * (x - cx), cy + factor * (y - cy)) for x, y in self.vertices)
        return InvariantPolygon(self.m, self.n, vs, self.center, self.apothem * factor, self.closure)


def build_invariant_polygon(m, n, delta=None, check=True, tol=1e-10):
    """Rotate the corner ``a`` of ``D_n`` around the rhombus centre ``2m`` times.

    The first image must be ``a'``, the lower-left end of the edge ``aa'``,
    and the ``2m``-th image must return to ``a``; otherwise ``NotClosed``
    (the rotation angle is not ``pi/m``). With ``check=False`` the regular
    ``2m``-gon with the same bottom edge is returned anyway, which is the
    non-invariant analogue used for other shear parameters.
    """
    if m < 3:
        raise ValueError("m must be at least 3")
    sys = SawtoothSystem(delta_for(m) if delta is None else delta)
    cx, cy = sys.center(n)
    a = conjugate(sys, (float(n), 0.0))
    a_prime = conjugate(sys, (n - sys.delta / 2.0, 0.0))
    pts = [a]
    for _ in range(2 * m):
        pts.append(rotate(sys, pts[-1], n))
    closure = max(math.dist(pts[-1], a), math.dist(pts[1], a_prime))
    if closure > tol:
        if check:
            raise NotClosed(f"rotating the edge aa' does not close up (miss {closure:.3g})")
        # regular 2m-gon on the same bottom edge
        half = a[0] - cx
        R = math.hypot(half, 0.5)
        pts = [(cx + R * math.cos(-math.pi / 2 + math.pi / (2 * m) - j * math.pi / m),
                cy + R * math.sin(-math.pi / 2 + math.pi / (2 * m) - j * math.pi / m))
               for j in range(2 * m)]
        return InvariantPolygon(m, n, tuple(pts), (cx, cy), 0.5, closure)
    return InvariantPolygon(m, n, tuple(pts[:-1]), (cx, cy), 0.5, closure)


def vertex_periodicity(poly, delta=None):
    """Largest miss of ``R_D^(2m)`` on the vertices, following the ``D_n`` branch.

    Each intermediate image must lie in the closed rhombus ``D_n`` (checked to
    ``1e-9``), so the branch choice is the actual map and not an assumption.
    """
    sys = SawtoothSystem(delta_for(poly.m) if delta is None else delta)
    worst = 0.0
    for v in poly.vertices:
        p = v
        for _ in range(2 * poly.m):
            p = rotate(sys, p, poly.n)
            R, phi = conjugate_inverse(sys, p)
            if not (-1e-9 <= phi <= 1 + 1e-9 and poly.n - 1 - 1e-9 <= R - phi <= poly.n + 1e-9):
                raise NotClosed("a vertex image left the closed rhombus")
        worst = max(worst, math.dist(p, v))
    return worst


def g_band(sys, j, m=None):
    """``(O_{4^j}, Q_{4^j})``: the barrier and its copy scaled by ``1 - 2^-j``."""
    m = m if m is not None else round(math.pi / sys.alpha)
    O = build_invariant_polygon(m, 4**j, sys.delta, check=False)
    return O, O.scaled(1.0 - 2.0**-j)


def jump_bound(j, alpha):
    """Half the band width allowed for a single jump near ``O_{4^j}``."""
    return 0.5 * 2.0**-j * (1.0 - math.cos(alpha)) / math.sin(alpha)


# ----------------------------------------------------------------- kernels

@nb.njit(cache=True, nogil=True)
def _poly_inside(x, y, cx, cy, ap, m):
    # regular 2m-gon, bottom edge horizontal: inside iff every face distance <= ap
    dx, dy = x - cx, y - cy
    k = int(m)
    if dx * dx + dy * dy > (ap / math.cos(math.pi / (2 * k)))**2:
        return False
    for j in range(2 * k):
        t = -0.5 * math.pi + j * math.pi / k
        if dx * math.cos(t) + dy * math.sin(t) > ap:
            return False
    return True


@nb.njit(nogil=True)
def _run_orbits(R0, phi0, steps, delta, k, pert, barriers, bands_outer, bands_inner,
                max_R, crossings, entries, misses, visits, final):
    s = math.sqrt(delta) * math.sqrt(4.0 - delta)
    nb_ = barriers.shape[0]
    ng = bands_outer.shape[0]
    for i in range(R0.shape[0]):
        R = R0[i]
        phi = phi0[i]
        mR = R
        Rb = (2.0 * R - delta * phi) / s
        right = np.zeros(nb_, dtype=np.bool_)
        for b in range(nb_):
            right[b] = Rb > barriers[b, 0] and not _poly_inside(
                Rb, phi, barriers[b, 0], barriers[b, 1], barriers[b, 2], barriers[b, 3])
        inside = np.zeros(ng, dtype=np.bool_)
        for g in range(ng):
            inside[g] = _poly_inside(Rb, phi, bands_outer[g, 0], bands_outer[g, 1],
                                     bands_outer[g, 2], bands_outer[g, 3])
        for _ in range(steps):
            for _j in range(k):
                f = phi - R
                f -= math.floor(f)
                R = R + delta * (f - 0.5)
                phi = f
            dR, dphi = pert(R, phi)
            R += dR
            phi += dphi
            phi -= math.floor(phi)
            if R > mR:
                mR = R
            Rb = (2.0 * R - delta * phi) / s
            for b in range(nb_):
                cx = barriers[b, 0]
                r = Rb > cx and not _poly_inside(Rb, phi, cx, barriers[b, 1],
                                                 barriers[b, 2], barriers[b, 3])
                if r and not right[b]:
                    crossings[i, b] += 1
                right[b] = r
            for g in range(ng):
                io = _poly_inside(Rb, phi, bands_outer[g, 0], bands_outer[g, 1],
                                  bands_outer[g, 2], bands_outer[g, 3])
                if io:
                    ii = _poly_inside(Rb, phi, bands_inner[g, 0], bands_inner[g, 1],
                                      bands_inner[g, 2], bands_inner[g, 3])
                    if not ii:
                        visits[i, g] += 1
                    if not inside[g]:
                        entries[i, g] += 1
                        if ii:
                            misses[i, g] += 1
                inside[g] = io
        max_R[i] = mR
        final[i, 0] = R
        final[i, 1] = phi


def _threads(threads):
    if threads is None:
        threads = int(os.environ.get("BILLIARD_LAB_THREADS", "1") or 1)
    return max(1, int(threads))


def _poly_array(polys):
    return np.array([p.spec for p in polys], float).reshape(-1, 4)


def seeds_left_of(sys, poly, count, seed=0, width=3.0):
    """Uniform seeds in the strip left of ``poly``, at most ``width`` rhombus
    widths away, returned in ``(R, phi)``."""
    rng = np.random.default_rng(seed)
    w = width * 2.0 / sys.s
    out = []
    while len(out) < count:
        Rb = rng.uniform(poly.leftmost - w, poly.center[0])
        phib = rng.uniform(0.0, 1.0)
        if poly.side((Rb, phib), 1e-9) == "left":
            out.append(tuple(conjugate_inverse(sys, (Rb, phib))))
    return np.array(out)


@dataclass
class EscapeStatistics:
    seeds: int
    steps: int
    max_R: np.ndarray
    crossings: np.ndarray
    band_entries: np.ndarray
    band_misses: np.ndarray
    recurrences: np.ndarray
    final: np.ndarray

    @property
    def total_crossings(self):
        return int(self.crossings.sum())

    @property
    def orbits_crossing(self):
        return int((self.crossings.sum(axis=1) > 0).sum())

    def summary(self):
        q = np.quantile(self.max_R, [0.0, 0.25, 0.5, 0.75, 1.0]) if self.seeds else []
        return {"seeds": self.seeds, "steps": self.steps,
                "max_R_distribution": {"min": q[0], "q25": q[1], "median": q[2],
                                       "q75": q[3], "max": q[4]},
                "crossings": self.total_crossings,
                "orbits_crossing": self.orbits_crossing,
                "band_entries": self.band_entries.sum(axis=0).tolist(),
                "band_misses": self.band_misses.sum(axis=0).tolist(),
                "recurrences": self.recurrences.sum(axis=0).tolist()}


def escape_experiment(sys, ensemble, steps, barriers=(), bands=(), threads=None):
    """Iterate every seed of ``ensemble`` (rows ``(R, phi)``) for ``steps`` maps.

    Per orbit: the largest ``R``, the number of moves from outside into the
    right component of each barrier, and for each band ``(O, Q)`` the number
    of entries into ``O``, the entries that skip the band and land in ``Q``,
    and the number of iterates in ``O \\ Q``. Seeds are split into contiguous
    blocks across threads and written back by index, so the result does not
    depend on the thread count.
    """
    seeds = np.ascontiguousarray(np.asarray(ensemble, float).reshape(-1, 2))
    N = len(seeds)
    pert = sys.perturbation if sys.perturbation is not None else _zero_perturbation
    B = _poly_array(barriers)
    Go = _poly_array([b[0] for b in bands])
    Gi = _poly_array([b[1] for b in bands])
    max_R = np.zeros(N)
    cr = np.zeros((N, len(B)), np.int64)
    en = np.zeros((N, len(Go)), np.int64)
    mi = np.zeros((N, len(Go)), np.int64)
    vi = np.zeros((N, len(Go)), np.int64)
    fin = np.zeros((N, 2))
    nt = min(_threads(threads), max(N, 1))
    cuts = np.linspace(0, N, nt + 1).astype(int)

    def block(t):
        a, b = cuts[t], cuts[t + 1]
        _run_orbits(seeds[a:b, 0], seeds[a:b, 1], int(steps), float(sys.delta), int(sys.k),
                    pert, B, Go, Gi, max_R[a:b], cr[a:b], en[a:b], mi[a:b], vi[a:b], fin[a:b])
    with ThreadPoolExecutor(nt) as ex:
        list(ex.map(block, range(nt)))
    return EscapeStatistics(N, int(steps), max_R, cr, en, mi, vi, fin)


def orbit(sys, s, steps, thin=1):
    """Checked orbit as an array of rows ``(step, R, phi)``."""
    rows = [(0, s[0], s[1])]
    for i in range(1, steps + 1):
        s = perturbed_step(sys, s)
        if i % thin == 0:
            rows.append((i, s.R, s.phi))
    return np.array(rows)


def perturbation_constant(sys, R_values, samples=64, seed=0):
    """Empirical ``max R |perturbation|`` over random angles at each radius.

    A bounded value certifies the ``O(1/R)`` size the experiments assume.
    """
    if sys.perturbation is None:
        return 0.0
    rng = np.random.default_rng(seed)
    worst = 0.0
    for R in R_values:
        for phi in rng.uniform(0, 1, samples):
            dR, dphi = sys.perturbation(float(R), float(phi))
            worst = max(worst, R * math.hypot(dR, dphi))
    return worst


def measured_jump(sys, j, samples=1000, seed=0):
    """Largest ``|Tb - R^k|`` in conjugated coordinates over random points of
    ``D_{4^j}``; compare with :func:`jump_bound`."""
    rng = np.random.default_rng(seed)
    n = 4**j
    base = SawtoothSystem(sys.delta, sys.k)
    worst = 0.0
    for _ in range(samples):
        phi = rng.uniform(1e-6, 1 - 1e-6)
        R = n - 1 + phi + rng.uniform(1e-6, 1 - 1e-6)
        s = CylinderState(R, phi)
        try:
            a = conjugate(sys, perturbed_step(sys, s))
            b = conjugate(base, perturbed_step(base, s))
        except OnBoundary:
            continue
        d = abs(a[1] - b[1])
        worst = max(worst, math.hypot(a[0] - b[0], min(d, 1 - d)))
    return worst


# -------------------------------------------------------------- Fermi-Ulam

@dataclass(frozen=True)
class FermiUlamModel:
    """Collision normal form ``tau' = tau - I mod 1``,
    ``I' = I + D (tau' - 1/2) + (D1/I) ((tau' - 1/2)^2 - 1/12)``."""
    delta: float
    delta1: float = 0.0
    I0: float = 1.0


def fermi_ulam_step(model, tau, I, corrected=True):
    """One return; ``corrected=False`` drops the ``1/I`` term."""
    if I < model.I0:
        raise EnergyTooLow(f"I = {I} is below I0 = {model.I0}")
    tb = (tau - I) % 1.0
    Ib = I + model.delta * (tb - 0.5)
    if corrected:
        Ib += model.delta1 * ((tb - 0.5)**2 - 1.0 / 12.0) / I
    return tb, Ib


def transplant(tau, I):
    """Collision coordinates to sawtooth coordinates: ``(R, phi) = (I, tau)``."""
    return CylinderState(I, tau)


@nb.njit(cache=True, nogil=True)
def _fu_orbits(tau0, I0, steps, delta, delta1, cx, cy, ap, m, s, max_I, crossings):
    for i in range(tau0.shape[0]):
        tau = tau0[i]
        I = I0[i]
        mI = I
        Rb = (2.0 * I - delta * tau) / s
        right = Rb > cx and not _poly_inside(Rb, tau, cx, cy, ap, m)
        for _ in range(steps):
            tb = tau - I
            tb -= math.floor(tb)
            Ib = I + delta * (tb - 0.5)
            if delta1 != 0.0:
                Ib += delta1 * ((tb - 0.5) ** 2 - 1.0 / 12.0) / I
            tau = tb
            I = Ib
            if I > mI:
                mI = I
            Rb = (2.0 * I - delta * tau) / s
            r = Rb > cx and not _poly_inside(Rb, tau, cx, cy, ap, m)
            if r and not right:
                crossings[i] += 1
            right = r
        max_I[i] = mI


def fermi_ulam_experiment(model, m, n, seeds=1000, steps=10**6, seed=0, corrected=False,
                          threads=None):
    """Orbits started left of the transplanted barrier ``O_n``.

    Returns ``(max_I, crossings)`` per orbit; the barrier is the sawtooth
    polygon read through ``(R, phi) = (I, tau)``.
    """
    sys = SawtoothSystem(model.delta)
    poly = build_invariant_polygon(m, n, model.delta)
    pts = seeds_left_of(sys, poly, seeds, seed)
    I0 = np.ascontiguousarray(pts[:, 0])
    t0 = np.ascontiguousarray(pts[:, 1])
    max_I = np.zeros(len(pts))
    cr = np.zeros(len(pts), np.int64)
    d1 = model.delta1 if corrected else 0.0
    nt = min(_threads(threads), len(pts))
    cuts = np.linspace(0, len(pts), nt + 1).astype(int)
    cx, cy, ap, mm = poly.spec

    def block(t):
        a, b = cuts[t], cuts[t + 1]
        _fu_orbits(t0[a:b], I0[a:b], int(steps), float(model.delta), float(d1),
                   cx, cy, ap, mm, sys.s, max_I[a:b], cr[a:b])
    with ThreadPoolExecutor(nt) as ex:
        list(ex.map(block, range(nt)))
    return max_I, cr, poly


def fermi_ulam_jump(model, j, samples=1000, seed=0):
    """Largest conjugated distance between the corrected and the leading map
    on random points of the strip ``C_{4^j}``."""
    sys = SawtoothSystem(model.delta)
    rng = np.random.default_rng(seed)
    n = 4**j
    worst = 0.0
    for _ in range(samples):
        tau = rng.uniform(0, 1)
        I = n - 1 + tau + rng.uniform(1e-9, 1 - 1e-9)
        a = fermi_ulam_step(model, tau, I, True)
        b = fermi_ulam_step(model, tau, I, False)
        pa = conjugate(sys, transplant(*a))
        pb = conjugate(sys, transplant(*b))
        worst = max(worst, math.dist(pa, pb))
    return worst
