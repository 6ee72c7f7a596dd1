"""First-return maps to the fundamental domains.

Semi-disc: the exact return of F^2 to the domain D next to the positive x
axis, the four asymptotic passage maps F1..F4 between D, D1, D2, D3 in
``(rho, phi)`` coordinates, and their composition expanded in powers of 1/n
around the island anchor ``(3n + 1/4, 1/2)``.

Sector: the cylinder chart ``(R, phi)`` of the domain in region I and the
sawtooth model ``L_beta`` whose square approximates the return.
"""
from dataclasses import dataclass
from functools import lru_cache
import math
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import (BandViolation, InsufficientRange, MaxStepsExceeded,
                     OnSingularity, SingularOrbit)
from .geometry import SEMIDISC, Point2, Region, SectorShape, to_plane, to_polar

MAX_STEPS = 10**6
FRAC_TOL = 1e-9
X0 = 50.0
R0 = 50.0
PI = math.pi


def frac(t, tol=FRAC_TOL):
    """Fractional part with floor semantics; raises near an integer."""
    f = t - math.floor(t)
    if tol and (f < tol or f > 1.0 - tol):
        raise OnSingularity(f"{{{t}}} is within {tol} of a jump")
    return f


# ------------------------------------------------------------ exact return

def exact_first_return(shape, z, max_steps=MAX_STEPS, tol=1e-9, counts=None):
    """First return of ``z`` (in region I) to region I under F^2.

    The return is detected at the transition IV -> I. ``counts``, if a
    dict, receives the number of F^2 steps spent in each region.

    Returns
    -------
    (Point2, int)
        Landing point and the number of F^2 steps taken.
    """
    buf = np.zeros(7, dtype=np.int64)
    x, y, st = _kernels.first_return_checked(float(z[0]), float(z[1]), shape.sb, shape.cb,
                                             int(max_steps), buf, tol)
    if st == 1:
        raise MaxStepsExceeded(f"no return within {max_steps} steps")
    if st == 2:
        raise SingularOrbit("orbit left the six-region picture")
    if st == 3:
        raise SingularOrbit(f"orbit passes within {tol} of a discontinuity line")
    if counts is not None:
        counts.clear()
        counts.update({Region(k): int(buf[k]) for k in range(1, 7) if buf[k]})
    return Point2(x, y), int(buf.sum())


def return_map_fast(shape, x, y, max_steps=MAX_STEPS):
    """Unchecked compiled return; returns ``(x, y)`` or raises."""
    buf = np.zeros(7, dtype=np.int64)
    x, y, st = _kernels.first_return(float(x), float(y), shape.sb, shape.cb, max_steps, buf)
    if st != 0:
        raise SingularOrbit("compiled return failed")
    return x, y


def inverse_f2(shape, z):
    x, y, _ = _kernels.inverse_step(float(z[0]), float(z[1]), shape.sb, shape.cb)
    x, y, _ = _kernels.inverse_step(x, y, shape.sb, shape.cb)
    return Point2(x, y)


def _region(shape, z):
    x1, y1, k0 = _kernels.step(float(z[0]), float(z[1]), shape.sb, shape.cb)
    _, _, k1 = _kernels.step(x1, y1, shape.sb, shape.cb)
    return _kernels.region_code(k0, k1, z[1] >= -shape.cb)


@dataclass(frozen=True)
class FundamentalDomain:
    """Membership in D, D1, D2, D3 (semi-disc) or D, Dt (sector).

    A point belongs to the strip between a line and its F^2 image when it
    lies past the line and its F^2 preimage does not.
    """
    which: str
    shape: SectorShape = SEMIDISC
    x0: float = X0

    def __contains__(self, z):
        s = self.shape
        w = inverse_f2(s, z)
        x, y = z
        if self.which == "D":
            return x >= self.x0 and _region(s, z) == 1 and _region(s, w) != 1
        if self.which == "D1":
            return y >= self.x0 and _region(s, z) == 2 and _region(s, w) != 2
        if self.which == "D2":
            return x <= -self.x0 and y < 0 <= w[1]
        if self.which == "D3":
            return y <= -self.x0 and _region(s, z) == 4 and _region(s, w) != 4
        if self.which == "Dt":
            return x <= -self.x0 and _region(s, z) == 3 and _region(s, w) != 3
        raise ValueError(f"unknown domain {self.which!r}")


# ------------------------------------------------------------ passage maps

@dataclass(frozen=True)
class ReturnState:
    """``rho`` and the fibred angle ``phi`` (``rho psi`` or ``rho (psi - 1/3)``)."""
    rho: float
    phi: float


# input bands of the island ensemble, from the anchor cycle
_BANDS = {
    "F1": (0.5, 3 / 2048),
    "F2": (7 / 12, 9 / 2048),
    "F3": (0.5, 15 / 2048),
    "F4": (-1 / 12, 35 / 2048),
}


@lru_cache(maxsize=None)
def tail_constants(variant="corrected"):
    """``(e1..e4), (f1..f4)``: the chart tails at pi/2 of regions I..IV."""
    from .adiabatic import solve_phi_psi_odes
    regs = (Region.I, Region.II, Region.III, Region.IV)
    charts = [solve_phi_psi_odes(r, variant=variant) for r in regs]
    return tuple(c.tail.e for c in charts), tuple(c.tail.f for c in charts)


ZERO_TAILS = ((0.0,) * 4, (0.0,) * 4)


def passage_maps(stage, s, e=None, f=None, check=True, slack=10.0):
    """One asymptotic passage ``F1..F4`` in ``(rho, phi)``.

    ``v = {rho/3 - phi}``. Raises ``BandViolation`` when ``phi`` is outside
    the stage band widened by ``slack/rho``.
    """
    if e is None or f is None:
        e0, f0 = tail_constants()
        e = e0 if e is None else e
        f = f0 if f is None else f
    rho, phi = float(s.rho), float(s.phi)
    if stage not in _BANDS:
        raise ValueError("stage must be one of F1..F4")
    if check:
        c, w = _BANDS[stage]
        if abs(phi - c) > w + slack / rho:
            raise BandViolation(f"{stage}: phi={phi:.6g} outside {c:.6g} +- {w:.3g}")
    v = frac(rho / 3 - phi)
    e1, e2, e3, e4 = e
    f1, f2, f3, f4 = f
    if stage == "F1":
        r = rho + (22 / 3 - 16 * v) / rho + (4 * e2 - 4 * e1 - 16 * v + 58 / 9) / rho**2
        p = (7 / 6 - v + (PI / 2 - 7 / 9) / rho
             + (8 * v * v - 4 * v / 3 - 8 * f1 + 8 * f2 + PI - 293 / 36) / rho**2)
    elif stage == "F2":
        r = rho - 4 * v + v * (8 * v * v - 12 * v + 11) / (3 * rho**2)
        p = 1 - v + (v / 2) / rho**2
    elif stage == "F3":
        r = rho + (50 / 3 - 16 * v) / rho + (4 * e4 - 4 * e3 + 8 * PI + 16 * v - 254 / 9) / rho**2
        p = (5 / 6 - v + (PI / 2 - 7 / 9) / rho
             + (8 * v * v - 20 * v / 3 - 8 * f3 + 8 * f4 - PI + 31 / 12) / rho**2)
    else:
        r = rho + 4 - 4 * v + (8 * v**3 - 4 * v * v + 5 * v - 1) / (3 * rho**2)
        p = 1 - v + (0.5 - v / 2) / rho**2
    return ReturnState(r, p)


def anchor_cycle(n, e=None, f=None, check=True):
    """States ``s0..s4`` of the passage composition from ``(3n + 1/4, 1/2)``."""
    s = ReturnState(3 * n + 0.25, 0.5)
    out = [s]
    for st in ("F1", "F2", "F3", "F4"):
        s = passage_maps(st, s, e, f, check)
        out.append(s)
    return out


def compose_passages(n, xt, yt, e=None, f=None, check=True):
    """``F4 F3 F2 F1`` in the centred coordinates ``(x~, y~)``."""
    s = anchor_cycle_from(n, xt, yt, e, f, check)
    return s.rho - 3 * n - 0.25, s.phi - 0.5


def anchor_cycle_from(n, xt, yt, e=None, f=None, check=True):
    s = ReturnState(3 * n + 0.25 + xt, 0.5 + yt)
    for st in ("F1", "F2", "F3", "F4"):
        s = passage_maps(st, s, e, f, check)
    return s


LINEAR_PART = np.array([[1 / 9, -8 / 3], [4 / 9, -5 / 3]])


def _XY(x, y, e, f):
    e1, e2, e3, e4 = e
    f1, f2, f3, f4 = f
    X = (-1520 * x * y**2 / 729 + 2080 * x**2 * y / 2187 - 3392 * x**3 / 19683
         + 1360 * y**3 / 729 - 416 * x**2 / 729 - 224 * y**2 / 81 - 1922 * x / 729
         + 998 * y / 243 + 14 * PI * x / 27 - 8 * PI * y / 9 + 800 * x * y / 243
         + 28 * e1 / 81 - 28 * e2 / 81 + 4 * e3 / 27 - 4 * e4 / 27 + 64 * f1 / 27
         - 64 * f2 / 27 - 32 * f3 / 9 + 32 * f4 / 9 + 1486 / 729 - 83 * PI / 162)
    Y = (-32 * x * y**2 / 81 + 64 * x**2 * y / 243 - 128 * x**3 / 2187 + 16 * y**3 / 81
         - 80 * x**2 / 729 - 176 * y**2 / 81 - 1205 * x / 729 + 950 * y / 243
         + 5 * PI * x / 27 - 2 * PI * y / 9 + 320 * x * y / 243
         + 4 * e1 / 81 - 4 * e2 / 81 + 4 * e3 / 27 - 4 * e4 / 27 + 40 * f1 / 27
         - 40 * f2 / 27 - 8 * f3 / 9 + 8 * f4 / 9 + 817 / 729 - 121 * PI / 324)
    return X, Y


def composed_return_model(n, xt, yt, e=None, f=None):
    """The return map expanded to ``n^-2`` around the anchor.

    Works elementwise on arrays.
    """
    if e is None or f is None:
        e0, f0 = tail_constants()
        e = e0 if e is None else e
        f = f0 if f is None else f
    x, y = xt, yt
    X, Y = _XY(x, y, e, f)
    xn = (x / 9 - 8 * y / 3 + (2 * PI / 9 - 4 / 81 - 32 * y / 9 + 128 * x / 81) / n + X / n**2)
    yn = (4 * x / 9 - 5 * y / 3 + (-PI / 9 + 2 / 81 + 32 * x / 81) / n + Y / n**2)
    return xn, yn


def model_fixed_point(n, e=None, f=None, tol=1e-15):
    """Fixed point of :func:`composed_return_model` by Newton's method."""
    from scipy.optimize import fsolve
    g = lambda p: np.array(composed_return_model(n, p[0], p[1], e, f)) - p
    p = fsolve(g, np.zeros(2), xtol=tol)
    return p


# -------------------------------------------------- exact return in (x~, y~)

@lru_cache(maxsize=None)
def _region_i_chart(variant="corrected"):
    from .adiabatic import closed_chart, solve_phi_psi_odes
    if variant == "corrected":
        return solve_phi_psi_odes(Region.I)
    return closed_chart(Region.I, variant=variant)


def tilde_to_plane(n, xt, yt, variant="corrected"):
    from .adiabatic import from_adiabatic
    ch = _region_i_chart(variant)
    rho = 3 * n + 0.25 + xt
    p = from_adiabatic(ch, rho, (0.5 + yt) / rho)
    return to_plane(p)


def plane_to_tilde(n, z, variant="corrected"):
    from .adiabatic import to_adiabatic
    ch = _region_i_chart(variant)
    rho, psi = to_adiabatic(ch, to_polar(z, "upper"))
    return rho - 3 * n - 0.25, rho * psi - 0.5


def exact_return_tilde(n, xt, yt, variant="corrected"):
    """Exact return map in the centred adiabatic coordinates."""
    z = tilde_to_plane(n, xt, yt, variant)
    w, _ = exact_first_return(SEMIDISC, z)
    return plane_to_tilde(n, w, variant)


# ------------------------------------------------------------------ sector

@dataclass(frozen=True)
class SectorConstants:
    beta: float
    A_beta: float
    B_beta: float
    C_beta: float
    C1: float
    C2: float


def sector_constants(beta):
    t = math.tan(beta / 2)
    A = t**3 / 6 + t / 2
    q = (PI - 2 * beta) / 4
    B = q + 2 * A
    C = (2 * math.sin(beta) + math.sin(2 * beta)) * B
    return SectorConstants(beta, A, B, C, A / B, (A + q) / B)


class CylinderState(NamedTuple):
    R: float
    phi: float


def sector_cylinder_chart(beta, z):
    """Affine head of the cylinder chart of the sector domain in region I."""
    k = sector_constants(beta)
    x, y = z
    sb, cb = math.sin(beta), math.cos(beta)
    R = k.B_beta * ((cb + 1) / 2 * x + sb / 2 * y) + 0.5 - k.B_beta * sb / 2
    phi = (y + cb) / (2 * (cb + 1))
    return CylinderState(R, phi)


def sector_cylinder_inverse(beta, s):
    k = sector_constants(beta)
    sb, cb = math.sin(beta), math.cos(beta)
    y = 2 * (cb + 1) * s.phi - cb
    x = ((s.R - 0.5 + k.B_beta * sb / 2) / k.B_beta - sb / 2 * y) * 2 / (cb + 1)
    return Point2(x, y)


def singular_gap(beta, s):
    """Distance (in the fibre) from the three singularity curves."""
    k = sector_constants(beta)
    R, p = s.R, s.phi

    def circ(t):
        t = t - math.floor(t)
        return min(t, 1 - t)
    return min(circ(k.C1 * R - p - k.C1 / 2), circ(k.C2 * R - p - 1 + k.C2 / 2),
               circ(R - p))


def sawtooth_model(beta, s, tol=FRAC_TOL, C=None):
    """``L_beta`` applied twice: the model of one return."""
    C = sector_constants(beta).C_beta if C is None else C
    R, p = s.R, s.phi
    for _ in range(2):
        u = frac(p - R, tol)
        R, p = R + C * (u - 0.5), u
    return CylinderState(R, p)


def sawtooth_once(s, C, tol=FRAC_TOL):
    u = frac(s.phi - s.R, tol)
    return CylinderState(s.R + C * (u - 0.5), u)


def exact_sector_return(beta, s):
    """Exact return read in the affine cylinder chart."""
    shape = SectorShape(beta)
    w, _ = exact_first_return(shape, sector_cylinder_inverse(beta, s))
    return sector_cylinder_chart(beta, w)


def _torus_gap(a, b):
    d = (a - b) % 1.0
    return min(d, 1 - d)


def sawtooth_ensemble(R, k=64, seed=0, margin=5.0, beta=PI / 2):
    """Fibre angles at radius ``R`` avoiding every singular curve by ``margin/R``.

    The curves of ``L_beta^2`` and of the return itself are both avoided.
    """
    rng = np.random.default_rng(seed)
    C = sector_constants(beta).C_beta
    out = []
    tries = 0
    while len(out) < k and tries < 100 * k:
        tries += 1
        s = CylinderState(R, float(rng.random()))
        if singular_gap(beta, s) < margin / R:
            continue
        u = (s.phi - s.R) % 1.0
        if min(u, 1 - u) < margin / R:
            continue
        s1 = CylinderState(R + C * (u - 0.5), u)
        u2 = (s1.phi - s1.R) % 1.0
        if min(u2, 1 - u2) < margin / R or singular_gap(beta, s1) < margin / R:
            continue
        out.append(s)
    return out


def sawtooth_residual(beta, R_grid, k=64, seed=0, margin=5.0, csv_path=None):
    """Slope of ``log max |exact return - L_beta^2|`` against ``log R``."""
    from .asymptotics import loglog_slope
    R_grid = [float(r) for r in R_grid]
    if len(R_grid) < 3:
        raise InsufficientRange("need at least three radii")
    res = []
    for R in R_grid:
        worst = 0.0
        for s in sawtooth_ensemble(R, k, seed, margin, beta):
            a = exact_sector_return(beta, s)
            b = sawtooth_model(beta, s)
            worst = max(worst, abs(a.R - b.R), _torus_gap(a.phi, b.phi))
        res.append(worst)
    if csv_path:
        from .io import write_csv
        write_csv(csv_path, ["R", "residual"], zip(R_grid, res))
    return loglog_slope(R_grid, res), np.array(res)
