"""Large-r expansions of F^2 in the shifted polar chart.

For every region the square of the billiard map has the form

    r'     = r + a + a1/r + a2/r^2 + a3/r^3 + ...
    theta' = theta + b/r + b1/r^2 + b2/r^3 + b3/r^4 + ...

The semi-disc coefficients are known through ``a2, b2`` in closed form; the
sector family only through ``a1, b1``. Coefficients are kept as sympy
expressions in ``theta`` (and ``beta``) and compiled for numpy and for mpmath,
because the remainders we want to see at r ~ 4e4 are far below double
precision.

Two coefficient variants exist for the semi-disc:

``published``
    ``b2`` exactly as printed in the source lemma.
``corrected``
    ``b2`` as it comes out of a series expansion of the exact compositions,
    which differs in the constant (I, IV) or in the ``sin`` and constant terms
    (II, III). This variant also carries ``a3, b3``.

Regions I, II, V sit in the upper chart, III, IV, VI in the lower chart (polar
angle shifted by pi).
"""
from dataclasses import dataclass, field
from functools import lru_cache
import csv
import math
from typing import Callable, NamedTuple

import mpmath as mp
import numpy as np
import sympy as sp

from .errors import InsufficientRange, WrongRegion
from .geometry import PolarPoint, Region

TH, BE = sp.symbols("theta beta", real=True)
_s, _c = sp.sin(TH), sp.cos(TH)
_R = sp.Rational

LINES = ("l1", "l2", "l3", "l1p", "l2p", "l3p")
VARIANTS = ("published", "corrected")
HALF_PI = math.pi / 2


def _semidisc_exprs(region, variant):
    a, b, b1 = -2 * _c, 2 * (1 + _s), 4 * _c * (1 + _s)
    if region in (Region.I, Region.IV):
        a1 = 2 * _s**2
        a2 = 4 * _c - 4 * _c**3
        b2 = 6 * sp.cos(2 * TH) + _R(8, 3) * sp.sin(3 * TH)
        b2 += _R(5, 3) if variant == "published" else _R(7, 3)
        a3 = (8 - 10 * _s**2) * _s**2
        b3 = 4 * sp.sin(4 * TH) + 8 * _c + 10 * sp.cos(3 * TH)
    elif region in (Region.II, Region.III):
        a1 = 2 * _s**2 + 4 * _s
        a2 = 8 * _c + 4 * sp.sin(2 * TH) - 4 * _c**3
        b2 = 8 * sp.cos(2 * TH) + _R(8, 3) * sp.sin(3 * TH)
        b2 += (4 * _s - _R(1, 3)) if variant == "published" else (-4 * _s + _R(1, 3))
        a3 = -10 * _s**4 - 24 * _s**3 - 8 * _s**2 + 14 * _s + 8
        b3 = 2 * _c * (-16 * _s**3 - 32 * _s**2 - 8 * _s + 7)
    elif region == Region.V:
        # the translation by (-4, 0)
        a, a1 = -4 * _c, 8 * _s**2
        a2 = 32 * _c - 32 * _c**3
        a3 = (128 - 160 * _s**2) * _s**2
        b, b1 = 4 * _s, 8 * sp.sin(2 * TH)
        b2 = _R(64, 3) * sp.sin(3 * TH)
        b3 = 64 * sp.sin(4 * TH)
    else:
        # region VI is T T: r kept, theta + 4 asin(1/r)
        a = a1 = a2 = a3 = sp.Integer(0)
        b, b1, b2, b3 = sp.Integer(4), sp.Integer(0), _R(2, 3), sp.Integer(0)
    return dict(a=a, b=b, a1=a1, b1=b1, a2=a2, b2=b2, a3=a3, b3=b3)


def _sector_exprs(region):
    m, p = BE - TH, BE + TH
    if region == Region.I:
        return dict(a=-2 * sp.sin(m), a1=1 + sp.cos(2 * m),
                    b=2 + 2 * sp.cos(m), b1=4 * sp.sin(m) + 2 * sp.sin(2 * m))
    if region == Region.II:
        return dict(a=-2 * sp.sin(p), a1=1 + sp.cos(2 * p) - 4 * sp.cos(p),
                    b=2 - 2 * sp.cos(p), b1=4 * sp.sin(p) - 2 * sp.sin(2 * p))
    if region == Region.III:
        return dict(a=-2 * sp.sin(m), a1=1 + sp.cos(2 * m) + 4 * sp.cos(m),
                    b=2 + 2 * sp.cos(m), b1=4 * sp.sin(m) + 2 * sp.sin(2 * m))
    if region == Region.IV:
        return dict(a=-2 * sp.sin(p), a1=1 + sp.cos(2 * p),
                    b=2 - 2 * sp.cos(p), b1=4 * sp.sin(p) - 2 * sp.sin(2 * p))
    z = sp.Integer(0)
    return dict(a=z, a1=z, b=sp.Integer(4), b1=z)


class _Fn:
    """A coefficient compiled for floats/arrays and for mpmath numbers."""

    def __init__(self, expr, args):
        self.expr = expr
        self._np = sp.lambdify(args, expr, "numpy")
        self._mp = sp.lambdify(args, expr, "mpmath")
        self._args = args

    def __call__(self, *vals):
        if any(isinstance(v, (mp.mpf, mp.mpc)) for v in vals):
            return self._mp(*vals)
        out = self._np(*vals)
        if np.ndim(out) == 0 and np.ndim(vals[0]) > 0:
            out = np.full(np.shape(vals[0]), float(out))
        return out


@dataclass(frozen=True)
class F2Coefficients:
    """Per-region coefficient functions of the F^2 expansion.

    Semi-disc instances are functions of ``theta`` only; sector instances
    have ``beta`` already bound. Missing orders are ``None``.
    """
    region: Region
    a: Callable
    b: Callable
    a1: Callable
    b1: Callable
    a2: Callable = None
    b2: Callable = None
    a3: Callable = None
    b3: Callable = None
    beta: float = HALF_PI
    variant: str = "sector"
    exprs: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def max_order(self):
        if self.a3 is not None:
            return 4
        return 3 if self.a2 is not None else 2


@lru_cache(maxsize=None)
def semidisc_coefficients(region, variant="corrected"):
    """Expansion coefficients ``a .. b3`` for the semi-disc.

    ``variant='published'`` keeps ``b2`` as printed and stops at order 3.
    """
    region = Region(region)
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    ex = _semidisc_exprs(region, variant)
    fns = {k: _Fn(v, (TH,)) for k, v in ex.items()}
    if variant == "published":
        fns["a3"] = fns["b3"] = None
    return F2Coefficients(region, variant=variant, exprs=ex, **fns)


class _Bound:
    def __init__(self, fn, beta):
        self.fn, self.beta, self.expr = fn, beta, fn.expr

    def __call__(self, theta):
        beta = _mp_beta(self.beta) if isinstance(theta, mp.mpf) else self.beta
        return self.fn(theta, beta)


@lru_cache(maxsize=None)
def _sector_fns(region):
    return {k: _Fn(v, (TH, BE)) for k, v in _sector_exprs(region).items()}


def sector_coefficients(beta, region):
    """Coefficients ``a, b, a1, b1`` of F^2 around the sector with angle ``beta``."""
    region = Region(region)
    fns = _sector_fns(region)
    bound = {k: _Bound(f, beta) for k, f in fns.items()}
    return F2Coefficients(region, beta=beta, exprs=_sector_exprs(region), **bound)


# ---------------------------------------------------------------- lines, bands

class SingularLineModel(NamedTuple):
    line: str
    leading: float
    coeff: float

    def theta(self, r):
        return self.leading + self.coeff / r


def singular_line(beta, line):
    """Leading-order model ``theta = leading + coeff/r`` of a discontinuity line.

    ``l1, l1p`` are given in the upper chart; ``l3, l3p`` live in the lower
    chart, ``l2, l2p`` in the upper one.
    """
    cb = 0.0 if beta == HALF_PI else math.cos(beta)
    table = {
        "l1": (0.0, -cb),
        "l1p": (math.pi, -(2.0 + cb)),
        "l2": (beta, -1.0),
        "l2p": (math.pi - beta, -3.0),
        "l3": (math.pi - beta, -1.0),
        "l3p": (beta, -3.0),
    }
    if line not in table:
        raise ValueError(f"unknown line {line!r}; expected one of {LINES}")
    lead, co = table[line]
    return SingularLineModel(line, lead, co)


def singular_line_theta(beta, line, r):
    return singular_line(beta, line).theta(r)


def region_band(beta, region, r):
    """Angular interval ``(lo, hi)`` of a region at radius ``r`` (leading order).

    Angles are in the region's own chart, so III, IV, VI use the shifted
    lower-half angle.
    """
    region = Region(region)
    th = lambda name: singular_line_theta(beta, name, r)
    if region == Region.I:
        return th("l1"), min(th("l2"), th("l2p"))
    if region == Region.V:
        return min(th("l2"), th("l2p")), max(th("l2"), th("l2p"))
    if region == Region.II:
        return max(th("l2"), th("l2p")), th("l1p")
    if region == Region.III:
        return th("l1p") - math.pi, th("l3p")
    if region == Region.VI:
        return th("l3p"), th("l3")
    return th("l3"), th("l1") + math.pi


def _check_band(beta, region, p, margin=0.0):
    half = "lower" if region.lower else "upper"
    if p.half != half:
        raise WrongRegion(f"region {region.name} uses the {half} chart, got {p.half}")
    lo, hi = region_band(beta, region, float(p.r))
    if not lo + margin <= float(p.theta) <= hi - margin:
        raise WrongRegion(
            f"theta={float(p.theta):.6g} outside band ({lo:.6g}, {hi:.6g}) of "
            f"region {region.name} at r={float(p.r):.6g}")


def _apply(co, p, order):
    r, th = p.r, p.theta
    rs = [co.a, co.a1, co.a2, co.a3]
    ts = [co.b, co.b1, co.b2, co.b3]
    r2, t2 = r, th
    for k in range(order):
        r2 = r2 + rs[k](th) / r**k
        t2 = t2 + ts[k](th) / r**(k + 1)
    return PolarPoint(r2, t2, p.half)


def f2_asym_semidisc(region, p, order=3, variant="corrected", check=True):
    """Truncated semi-disc expansion of F^2 applied to ``p``.

    ``order`` k keeps the terms up to ``a_{k-1}/r^{k-1}`` and ``b_{k-1}/r^k``.
    Order 4 needs the corrected variant (``a3, b3`` are derived, not printed).

    Raises
    ------
    WrongRegion
        If ``p`` is not inside the region's band.
    """
    region = Region(region)
    co = semidisc_coefficients(region, variant)
    if not 1 <= order <= co.max_order:
        raise ValueError(f"order must lie in 1..{co.max_order} for variant {variant}")
    if check:
        _check_band(HALF_PI, region, p)
    return _apply(co, p, order)


def f2_asym_sector(beta, region, p, order=2, check=True):
    """Truncated sector expansion of F^2 (orders 1 and 2 exist)."""
    region = Region(region)
    if not 1 <= order <= 2:
        raise ValueError("sector expansions are known to order 2")
    if check:
        _check_band(beta, region, p)
    return _apply(sector_coefficients(beta, region), p, order)


# ------------------------------------------------------------- exact, mpmath

def _mp_beta(beta):
    # the float pi/2 has cos ~ 6e-17, which would tilt the semi-disc chord
    if abs(float(beta) - HALF_PI) < 1e-15:
        return mp.pi / 2
    return mp.mpf(beta)


def _mp_tangent(x, y):
    r2 = x * x + y * y
    w = mp.sqrt(r2 - 1)
    return 2 * (x + w * y) / r2 - x, 2 * (y - w * x) / r2 - y


def exact_f2_polar(beta, region, r, theta, dps=50):
    """Region composition of F^2 in the polar chart, in mpmath arithmetic.

    The composition is the named one (``T R1`` for region I and so on), so
    this is the analytic continuation of F^2 from inside the region. Returns
    ``(r', theta')`` with ``theta'`` unwrapped next to ``theta``.
    """
    region = Region(region)
    with mp.workdps(dps):
        b = _mp_beta(beta)
        o1 = (mp.sin(b), -mp.cos(b))
        o2 = (-o1[0], o1[1])
        r, th = mp.mpf(r), mp.mpf(theta)
        x, y = r * mp.cos(th), r * mp.sin(th)
        if region.lower:
            x, y = -x, -y
        R1 = lambda x, y: (2 * o1[0] - x, 2 * o1[1] - y)
        R2 = lambda x, y: (2 * o2[0] - x, 2 * o2[1] - y)
        T = _mp_tangent
        if region == Region.I:
            x, y = T(*R1(x, y))
        elif region == Region.II:
            x, y = R2(*T(x, y))
        elif region == Region.III:
            x, y = R1(*T(x, y))
        elif region == Region.IV:
            x, y = T(*R2(x, y))
        elif region == Region.V and abs(float(beta) - HALF_PI) < 1e-15:
            x, y = R2(*R1(x, y))
        else:
            x, y = T(*T(x, y))
        if region.lower:
            x, y = -x, -y
        r2 = mp.hypot(x, y)
        t2 = mp.atan2(y, x)
        t2 += 2 * mp.pi * mp.nint((th - t2) / (2 * mp.pi))
        return +r2, +t2


# ------------------------------------------------------------------ order fit

class FitResult(NamedTuple):
    slope_r: float
    slope_theta: float
    radii: np.ndarray
    err_r: np.ndarray
    err_theta: np.ndarray


def loglog_slope(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    keep = (y > 0) & np.isfinite(y)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def order_fit(exact, approx, region, r_grid, theta_grid, beta=HALF_PI,
              dps=50, csv_path=None):
    """Measured decay exponents of ``|exact - approx|`` in ``r`` and ``theta``.

    Parameters
    ----------
    exact, approx : callable
        ``(r, theta) -> (r', theta')``; called with mpmath numbers at ``dps``
        digits so that tiny remainders are resolved.
    region : Region
        Used only to check the grid against the region band.
    r_grid : sequence of float
        Geometric radii, at least four.
    theta_grid : sequence of float, or callable ``r -> sequence``
        Sample angles. A callable is needed for bands of width O(1/r).
    csv_path : str, optional
        Writes ``r, err_r, err_theta``.

    Returns
    -------
    FitResult
        Least-squares slopes of log max error against log r.
    """
    region = Region(region)
    r_grid = np.asarray(r_grid, float)
    if r_grid.size < 4:
        raise InsufficientRange(f"need at least 4 radii, got {r_grid.size}")
    err_r, err_t = [], []
    half = "lower" if region.lower else "upper"
    with mp.workdps(dps):
        for r in r_grid:
            ths = theta_grid(r) if callable(theta_grid) else theta_grid
            lo, hi = region_band(beta, region, r)
            margin = min(5.0 / r, 0.25 * (hi - lo))
            er = et = mp.mpf(0)
            for t in ths:
                _check_band(beta, region, PolarPoint(r, t, half), margin)
                R, Tt = mp.mpf(r), mp.mpf(t)
                r1, t1 = exact(R, Tt)
                r2, t2 = approx(R, Tt)
                er = max(er, abs(r1 - r2))
                et = max(et, abs(t1 - t2))
            err_r.append(float(er))
            err_t.append(float(et))
    err_r, err_t = np.array(err_r), np.array(err_t)
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", "err_r", "err_theta"])
            for row in zip(r_grid, err_r, err_t):
                w.writerow([repr(float(v)) for v in row])
    return FitResult(loglog_slope(r_grid, err_r), loglog_slope(r_grid, err_t),
                     r_grid, err_r, err_t)


def semidisc_pair(region, order, variant="corrected", dps=50):
    """``(exact, approx)`` callables for :func:`order_fit` on the semi-disc."""
    region = Region(region)
    half = "lower" if region.lower else "upper"

    def exact(r, th):
        return exact_f2_polar(HALF_PI, region, r, th, dps)

    def approx(r, th):
        q = f2_asym_semidisc(region, PolarPoint(r, th, half), order, variant, check=False)
        return q.r, q.theta
    return exact, approx


def sector_pair(beta, region, order=2, dps=50):
    region = Region(region)
    half = "lower" if region.lower else "upper"

    def exact(r, th):
        return exact_f2_polar(beta, region, r, th, dps)

    def approx(r, th):
        q = f2_asym_sector(beta, region, PolarPoint(r, th, half), order, check=False)
        return q.r, q.theta
    return exact, approx


def default_theta_grid(beta, region, r, k=7):
    """``k`` angles spread over the interior of a region band at radius ``r``."""
    lo, hi = region_band(beta, region, r)
    m = min(6.0 / r, 0.3 * (hi - lo))
    return np.linspace(lo + m, hi - m, k)
