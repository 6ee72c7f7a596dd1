"""Adiabatic coordinates (rho, psi) for the regions I-IV of F^2.

In these coordinates F^2 is almost a shear,

    rho' = rho + O(rho^-4),   psi' = psi + 1/rho + O(rho^-5),

and they are built from the polar chart as

    rho = r Phi1 + Phi2 + Phi3/r + Phi4/r^2
    psi = Psi + Psi1/r + Psi2/r^2 + Psi3/r^3.

The heads ``Phi1..Phi3`` and ``Psi..Psi2`` are closed forms. The tails
``Phi4`` and ``Psi3`` solve forced linear ODEs whose forcing is read off the
exact map by Richardson extrapolation, so nobody has to write the order
``r^-3`` / ``r^-4`` equations down.

The semi-disc chart comes in two variants, matching the two coefficient
variants of :mod:`outerbilliards.asymptotics`. ``published`` uses the printed
``Phi3`` and ``Psi2`` (these solve the ODE system with the printed ``b2``).
``corrected`` uses the heads that solve the system with the true ``b2``; only
this one gives the advertised drift orders.

For the sector family only ``Phi1, Phi2, Psi, Psi1`` exist.
"""
from dataclasses import dataclass, field
from functools import lru_cache
import csv
import math

import mpmath as mp
import numpy as np
import sympy as sp
from numpy.polynomial import chebyshev as cheb
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from . import asymptotics as asy
from .asymptotics import BE, TH
from .errors import NoConvergence, RegionExit, ResidualTooLarge, WrongRegion
from .geometry import PolarPoint, Region

HALF_PI = math.pi / 2
PHI_NAMES = ("Phi1", "Phi2", "Phi3", "Phi4")
PSI_NAMES = ("Psi", "Psi1", "Psi2", "Psi3")
HEAD_NAMES = ("Phi1", "Phi2", "Phi3", "Psi", "Psi1", "Psi2")
SECTOR_NAMES = ("Phi1", "Phi2", "Psi", "Psi1")

_s, _c = sp.sin(TH), sp.cos(TH)
_t = sp.tan(TH / 2)
_R = sp.Rational


# ------------------------------------------------------------- closed forms

def _semidisc_heads(region, variant):
    Phi1 = 1 + _s
    # |cos| resolved per region; these branches are the ones that solve the
    # Phi2 equation with Phi2 = 0 at the initial angle
    Phi2 = {Region.I: 1 - _c, Region.II: 1 + _c,
            Region.III: -1 + _c, Region.IV: -1 - _c}[region]
    Psi = _R(1, 6) - (_c**2 + 2 * _c + _s * _c - 2 * _s - 2) / (6 * (_s + 1)**2)
    q = 3 * (1 + _s) * (1 + _t)**3
    Psi1 = {Region.I: -2 * _t**3 / q, Region.II: 2 / q,
            Region.III: 2 * _t**3 / q, Region.IV: -2 / q}[region]
    th, pi = TH, sp.pi
    c, s = _c, _s
    if region == Region.I:
        Psi2 = (20 * s - 33 * c - 33 * s * c + 12 * c**2 + 7 * c**3 - 6 * c**4
                + 22 * c**2 * s - 6 * c**3 * s + 20) / (36 * (1 + s)**5)
    elif region == Region.II:
        Psi2 = (-360 * th + 360 * pi + 132 * sp.cos(2 * th) + 19 * sp.cos(3 * th)
                - 144 * sp.sin(2 * th) + 2 * sp.sin(3 * th) - 219 * c - 462 * s
                + 3 * sp.cos(4 * th) - 3 * sp.sin(4 * th) + 216 * th * sp.cos(2 * th)
                + 36 * th * sp.sin(3 * th) + 540 * pi * s - 540 * th * s
                - 216 * pi * sp.cos(2 * th) - 36 * pi * sp.sin(3 * th) - 335) / (144 * (1 + s)**5)
    elif region == Region.III:
        Psi2 = (-144 * th - 69 * c + 116 * s + 108 * th * c**2 - 69 * c * s - 60 * c**2
                + 19 * c**3 - 6 * c**4 - 2 * c**2 * s - 6 * c**3 * s - 144 * th * s
                + 36 * th * c**2 * s + 116) / (36 * (1 + s)**5)
    else:
        Psi2 = (-33 * c - 20 * s - 33 * c * s - 12 * c**2 + 7 * c**3 + 6 * c**4
                - 22 * c**2 * s - 6 * c**3 * s - 20) / (36 * (1 + s)**5)
    if variant == "published":
        if region in (Region.I, Region.IV):
            Phi3 = (2 * s**3 - s) / (6 * (s + 1))
        else:
            Phi3 = (2 * s**3 - 12 * s**2 - s) / (6 * (s + 1))
    else:
        Phi3 = (2 * s**3 - 3 * s) / (6 * (1 + s))
        t = _t
        qq = (1 + s)**2 * (t + 1)**3
        dpsi2 = {
            Region.I: -(2 * t**2 + 3 * t + 3) * t / (9 * qq),
            Region.II: (th * (t + 1)**3 - pi * (t + 1)**3 + _R(7, 3) * t**2
                        + _R(7, 3) * t + _R(14, 9)) / qq,
            Region.III: (9 * th * (t + 1)**3 - 14 * t**3 - 21 * t**2 - 21 * t) / (9 * qq),
            Region.IV: (3 * t - 1 + 3 / sp.cos(th / 2)**2) / (9 * qq),
        }[region]
        Psi2 = Psi2 + dpsi2
    return dict(Phi1=Phi1, Phi2=Phi2, Phi3=Phi3, Psi=Psi, Psi1=Psi1, Psi2=Psi2)


def _sector_heads(region):
    if region in (Region.I, Region.III):
        h = (BE - TH) / 2
        sg = 1 if region == Region.I else -1
        return dict(
            Phi1=sp.cos(h)**2,
            Phi2=-sg * sp.sin(BE - TH) / 2,
            Psi=-sp.tan(h)**3 / 6 - sp.tan(h) / 2,
            Psi1=-sg * (sp.cos(h) - sp.cos(3 * h)) / (16 * sp.cos(h)**5))
    h = (BE + TH) / 2
    sg = 1 if region == Region.II else -1
    return dict(
        Phi1=sp.sin(h)**2,
        Phi2=sg * sp.sin(BE + TH) / 2,
        Psi=-sp.cot(h)**3 / 6 - sp.cot(h) / 2,
        Psi1=sg * (sp.cos(BE + TH) + 1)
        / (sp.cos(2 * BE + 2 * TH) - 4 * sp.cos(BE + TH) + 3))


# --------------------------------------------------------------- equations

def _equations(co, F):
    """Left-hand sides of the triangular ODE system (all must vanish).

    ``co`` holds the F^2 coefficients, ``F`` the unknowns (closed forms or
    sympy functions of theta). Only the equations whose unknowns are present
    in ``F`` are returned.
    """
    D = lambda f, k=1: sp.diff(f, TH, k)
    a, b, a1, b1 = co["a"], co["b"], co["a1"], co["b1"]
    P1, P2, S, S1 = F["Phi1"], F["Phi2"], F["Psi"], F["Psi1"]
    eq = {
        "Phi1": D(P1) * b + a * P1,
        "Phi2": D(P2) * b + D(P1) * b1 + D(P1, 2) * b**2 / 2 + a * D(P1) * b + P1 * a1,
        "Psi": b * D(S) - 1 / P1,
        "Psi1": b * D(S1) + b**2 * D(S, 2) / 2 + b1 * D(S) + P2 / P1**2 - a * S1,
    }
    if "Phi3" in F:
        a2, b2 = co["a2"], co["b2"]
        P3, S2 = F["Phi3"], F["Psi2"]
        eq["Phi3"] = (D(P3) * b + D(P1, 3) * b**3 / 6 + D(P1, 2) * (b * b1 + a * b**2 / 2)
                      + D(P1) * (a1 * b + a * b1 + b2) + P1 * a2 + D(P2, 2) * b**2 / 2
                      + D(P2) * b1 - P3 * a)
        eq["Psi2"] = (b * D(S2) + b**3 * D(S, 3) / 6 + b * b1 * D(S, 2) + b2 * D(S)
                      + b**2 * D(S1, 2) / 2 + D(S1) * (b1 - a * b) + S1 * (a**2 - a1)
                      - 2 * a * S2 + (P1 * P3 - P2**2) / P1**3)
    return eq


def _coef_exprs(family, region, variant):
    if family == "semidisc":
        return asy._semidisc_exprs(region, variant)
    return asy._sector_exprs(region)


@lru_cache(maxsize=None)
def _residual_fns(family, region, variant):
    co = _coef_exprs(family, region, variant)
    heads = (_semidisc_heads(region, variant) if family == "semidisc"
             else _sector_heads(region))
    eq = _equations(co, heads)
    args = (TH,) if family == "semidisc" else (TH, BE)
    return {k: sp.lambdify(args, v, "numpy") for k, v in eq.items()}


def ode_residuals(family, region, thetas, variant="corrected", beta=HALF_PI):
    """Residuals of the closed forms in their defining equations.

    Returns a dict ``name -> array`` over ``thetas``.
    """
    region = Region(region)
    fns = _residual_fns(family, region, variant)
    thetas = np.asarray(thetas, float)
    extra = () if family == "semidisc" else (beta,)
    return {k: np.broadcast_to(f(thetas, *extra), thetas.shape).astype(float)
            for k, f in fns.items()}


@lru_cache(maxsize=None)
def _numeric_system(family, region, variant):
    """Explicit first-order system U' = G(theta, U) for the head functions."""
    names = HEAD_NAMES if family == "semidisc" else SECTOR_NAMES
    order = [n for n in ("Phi1", "Phi2", "Phi3", "Psi", "Psi1", "Psi2") if n in names]
    fs = {n: sp.Function(n)(TH) for n in order}
    co = _coef_exprs(family, region, variant)
    eq = _equations(co, fs)
    # derivative table: name -> [U', U'', U''']
    dtab = {}

    def subs_derivs(expr):
        reps = {}
        for n, ds in dtab.items():
            for k, d in enumerate(ds, start=1):
                reps[sp.Derivative(fs[n], (TH, k))] = d
        # highest derivatives first so that substitution is exact
        for key in sorted(reps, key=lambda d: -d.derivative_count):
            expr = expr.subs(key, reps[key])
        return expr

    for n in order:
        d1 = sp.Symbol("d1")
        e = subs_derivs(eq[n]).subs(sp.Derivative(fs[n], TH), d1)
        sol = sp.solve(e, d1)[0]
        ds = [sol]
        for _ in range(2):
            nxt = sp.diff(ds[-1], TH)
            nxt = nxt.subs(sp.Derivative(fs[n], TH), sol)
            nxt = subs_derivs(nxt)
            ds.append(nxt)
        dtab[n] = ds
    ys = sp.symbols("y0:%d" % len(order))
    rep = {fs[n]: ys[i] for i, n in enumerate(order)}
    rhs = [dtab[n][0].subs(rep) for n in order]
    args = (TH, ys) if family == "semidisc" else (TH, ys, BE)
    return order, sp.lambdify(args, rhs, "numpy")


# ----------------------------------------------------------------- domains

def initial_angle(family, region, beta=HALF_PI):
    region = Region(region)
    if family == "semidisc":
        return 0.0 if region in (Region.I, Region.III) else math.pi
    return beta if region in (Region.I, Region.III) else math.pi - beta


def chart_domain(family, region, beta=HALF_PI):
    """Angular interval on which the closed forms are tabulated."""
    region = Region(region)
    if family == "semidisc":
        return (0.0, HALF_PI) if region in (Region.I, Region.III) else (HALF_PI, math.pi)
    return (0.0, beta) if region in (Region.I, Region.III) else (math.pi - beta, math.pi)


def _initial_values(family, region, names):
    vals = []
    for n in names:
        if n == "Phi1":
            vals.append(1.0)
        elif n == "Psi" and family == "semidisc" and region in (Region.II, Region.IV):
            vals.append(2.0 / 3.0)
        else:
            vals.append(0.0)
    return vals


# -------------------------------------------------------------------- tail

class OdeTail:
    """Tabulated ``Phi4`` and ``Psi3`` on a region band.

    Values come from integrating ``b Phi4' = 2 a Phi4 - c3`` and
    ``b Psi3' = 3 a Psi3 - d4`` with zero data at the initial angle. ``c3`` and
    ``d4`` are the ``r^-3`` and ``r^-4`` coefficients of ``rho'-rho`` and
    ``psi'-psi-1/rho`` left over by the closed-form heads.
    """

    def __init__(self, theta, phi4, dphi4, psi3, dpsi3, e, f, residual, forcing):
        self.theta = theta
        self._phi4 = CubicHermiteSpline(theta, phi4, dphi4)
        self._psi3 = CubicHermiteSpline(theta, psi3, dpsi3)
        self.e, self.f = e, f
        self.residual = residual
        self.forcing = forcing

    def phi4(self, theta, deriv=0):
        return self._eval(self._phi4, theta, deriv)

    def psi3(self, theta, deriv=0):
        return self._eval(self._psi3, theta, deriv)

    @staticmethod
    def _eval(spl, theta, deriv):
        if isinstance(theta, mp.mpf):
            return mp.mpf(float(spl(float(theta), deriv)))
        return spl(theta, deriv)

    def table(self):
        return self.theta, self._phi4(self.theta), self._psi3(self.theta)


@dataclass(frozen=True)
class AdiabaticChart:
    """Closed-form heads (with derivatives) plus an optional numeric tail."""
    family: str
    region: Region
    beta: float
    variant: str
    exprs: dict = field(repr=False)
    tail: OdeTail = field(default=None, repr=False)
    numeric_mismatch: float = 0.0
    _np: dict = field(default_factory=dict, repr=False, compare=False)
    _mp: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def names(self):
        return tuple(self.exprs)

    @property
    def max_order(self):
        if self.family == "sector":
            return 2
        return 4 if self.tail is not None else 3

    @property
    def domain(self):
        return chart_domain(self.family, self.region, self.beta)

    def value(self, name, theta, deriv=0):
        """``name`` (e.g. ``'Psi1'``) or its ``deriv``-th derivative at ``theta``."""
        if name in ("Phi4", "Psi3"):
            if self.tail is None:
                raise KeyError(f"{name} needs the ODE tail")
            return (self.tail.phi4 if name == "Phi4" else self.tail.psi3)(theta, deriv)
        mpmode = isinstance(theta, mp.mpf)
        cache = self._mp if mpmode else self._np
        key = (name, deriv)
        if key not in cache:
            expr = sp.diff(self.exprs[name], TH, deriv) if deriv else self.exprs[name]
            args = (TH,) if self.family == "semidisc" else (TH, BE)
            cache[key] = sp.lambdify(args, expr, "mpmath" if mpmode else "numpy")
        fn = cache[key]
        if self.family == "semidisc":
            out = fn(theta)
        else:
            out = fn(theta, asy._mp_beta(self.beta) if mpmode else self.beta)
        if not mpmode and np.ndim(theta) and np.ndim(out) == 0:
            out = np.full(np.shape(theta), float(out))
        return out

    def rho_psi(self, r, theta, order=None):
        order = self.max_order if order is None else order
        if not 1 <= order <= self.max_order:
            raise ValueError(f"order must lie in 1..{self.max_order}")
        rho = r * self.value("Phi1", theta)
        psi = self.value("Psi", theta)
        for k in range(1, order):
            rho = rho + self.value(PHI_NAMES[k], theta) / r**(k - 1)
            psi = psi + self.value(PSI_NAMES[k], theta) / r**k
        return rho, psi

    def jacobian(self, r, theta, order=None):
        """d(rho, psi)/d(r, theta) of :meth:`rho_psi`."""
        order = self.max_order if order is None else order
        v = self.value
        drr = v("Phi1", theta)
        drt = r * v("Phi1", theta, 1)
        dpr = 0 * r
        dpt = v("Psi", theta, 1)
        for k in range(1, order):
            P, S = PHI_NAMES[k], PSI_NAMES[k]
            drr = drr - (k - 1) * v(P, theta) / r**k
            drt = drt + v(P, theta, 1) / r**(k - 1)
            dpr = dpr - k * v(S, theta) / r**(k + 1)
            dpt = dpt + v(S, theta, 1) / r**k
        return drr, drt, dpr, dpt


def _closed_chart(family, region, beta, variant):
    heads = (_semidisc_heads(region, variant) if family == "semidisc"
             else _sector_heads(region))
    return AdiabaticChart(family, region, beta, variant, heads)


def _integrate_heads(chart, step=1e-3):
    family, region = chart.family, chart.region
    names, rhs = _numeric_system(family, region,
                                 chart.variant if family == "semidisc" else "sector")
    th0 = initial_angle(family, region, chart.beta)
    lo, hi = chart.domain
    th1 = hi if th0 == lo else lo
    extra = () if family == "semidisc" else (chart.beta,)
    fun = lambda t, y: np.asarray(rhs(t, y, *extra), float)
    n = max(int(abs(th1 - th0) / step), 8)
    grid = np.linspace(th0, th1, n + 1)
    # stop a hair short of a pole of tan at the far end of a sector band
    sol = solve_ivp(fun, (th0, th1), _initial_values(family, region, names),
                    method="DOP853", rtol=1e-11, atol=1e-11, t_eval=grid)
    if not sol.success:
        raise NoConvergence(sol.message)
    worst = 0.0
    for i, nme in enumerate(names):
        exact = chart.value(nme, grid)
        worst = max(worst, float(np.max(np.abs(exact - sol.y[i]))))
    return worst


# ------------------------------------------------------------- tail build

def _richardson(vals, ratio=2.0):
    # vals[j] = g(R ratio^j) with g(r) = g0 + g1/r + ...
    tab = list(vals)
    for m in range(1, len(vals)):
        fac = ratio**m
        tab = [(tab[i + 1] * fac - tab[i]) / (fac - 1) for i in range(len(tab) - 1)]
    return tab[0]


def _forcing_c3(chart, theta, radii, dps):
    with mp.workdps(dps):
        th = mp.mpf(theta)
        vals = []
        for r in radii:
            r = mp.mpf(r)
            r2, t2 = asy.exact_f2_polar(HALF_PI, chart.region, r, th, dps)
            a, _ = chart.rho_psi(r, th, 3)
            b, _ = chart.rho_psi(r2, t2, 3)
            vals.append((b - a) * r**3)
        return float(_richardson(vals))


def _forcing_d4(chart, tail_phi4, theta, radii, dps):
    with mp.workdps(dps):
        th = mp.mpf(theta)
        vals = []
        for r in radii:
            r = mp.mpf(r)
            r2, t2 = asy.exact_f2_polar(HALF_PI, chart.region, r, th, dps)
            rho, psi = chart.rho_psi(r, th, 3)
            rho = rho + mp.mpf(float(tail_phi4(float(th)))) / r**2
            _, psi2 = chart.rho_psi(r2, t2, 3)
            vals.append((psi2 - psi - 1 / rho) * r**4)
        return float(_richardson(vals))


def _cheb_fit(fn, lo, hi, deg):
    k = np.arange(deg + 1)
    x = np.cos(np.pi * (k + 0.5) / (deg + 1))
    th = 0.5 * (hi + lo) + 0.5 * (hi - lo) * x
    vals = np.array([fn(t) for t in th])
    coef = cheb.chebfit(x, vals, deg)
    return lambda t: cheb.chebval((2 * np.asarray(t) - hi - lo) / (hi - lo), coef)


def _build_tail(chart, deg=36, r0=2000.0, levels=7, dps=60, step=5e-4):
    co = asy.semidisc_coefficients(chart.region, "corrected"
                                   if chart.variant == "corrected" else "published")
    lo, hi = chart.domain
    th0 = initial_angle("semidisc", chart.region)
    th1 = hi if th0 == lo else lo
    radii = [r0 * 2.0**j for j in range(levels)]
    c3 = _cheb_fit(lambda t: _forcing_c3(chart, t, radii, dps), lo, hi, deg)
    a, b = co.a, co.b
    n = max(int(round(abs(th1 - th0) / step)), 8)
    grid = np.linspace(th0, th1, n + 1)

    def solve(rhs):
        sol = solve_ivp(rhs, (th0, th1), [0.0], method="DOP853",
                        rtol=1e-12, atol=1e-13, dense_output=True)
        if not sol.success:
            raise NoConvergence(sol.message)
        y = sol.sol(grid)[0]
        return y, np.array([rhs(t, [v])[0] for t, v in zip(grid, y)]), sol.sol

    rhs4 = lambda t, y: [(2 * a(t) * y[0] - c3(t)) / b(t)]
    phi4, dphi4, dense4 = solve(rhs4)
    order = np.argsort(grid)
    spl4 = CubicHermiteSpline(grid[order], phi4[order], dphi4[order])
    d4 = _cheb_fit(lambda t: _forcing_d4(chart, spl4, t, radii, dps), lo, hi, deg)
    rhs3 = lambda t, y: [(3 * a(t) * y[0] - d4(t)) / b(t)]
    psi3, dpsi3, dense3 = solve(rhs3)
    # interpolation error between nodes, against the continuous solution
    mid = 0.5 * (grid[1:] + grid[:-1])
    spl3 = CubicHermiteSpline(grid[order], psi3[order], dpsi3[order])
    resid = float(max(np.max(np.abs(spl4(mid) - dense4(mid)[0])),
                      np.max(np.abs(spl3(mid) - dense3(mid)[0]))))
    return OdeTail(grid[order], phi4[order], dphi4[order], psi3[order], dpsi3[order],
                   e=float(spl4(HALF_PI)), f=float(spl3(HALF_PI)), residual=resid,
                   forcing=(c3, d4))


@lru_cache(maxsize=None)
def solve_phi_psi_odes(region, family="semidisc", beta=HALF_PI, variant="corrected",
                       tail=True, tol=1e-7):
    """Build the adiabatic chart of one region.

    The triangular ODE system is integrated numerically and compared with
    the closed forms; a mismatch above ``tol`` raises ``ResidualTooLarge``.
    For the semi-disc, ``tail=True`` also integrates ``Phi4`` and ``Psi3``.

    Parameters
    ----------
    region : Region
        One of I-IV.
    family : {'semidisc', 'sector'}
    beta : float
        Sector angle; ignored for the semi-disc.
    variant : {'corrected', 'published'}
        Semi-disc head variant.
    """
    region = Region(region)
    if region not in (Region.I, Region.II, Region.III, Region.IV):
        raise WrongRegion("adiabatic charts exist for regions I-IV only")
    if family not in ("semidisc", "sector"):
        raise ValueError("family must be 'semidisc' or 'sector'")
    if family == "semidisc":
        beta = HALF_PI
    else:
        variant = "sector"
    chart = _closed_chart(family, region, beta, variant)
    worst = _integrate_heads(chart)
    if worst > tol:
        raise ResidualTooLarge(
            f"closed forms and numerical ODE solution differ by {worst:.3g} in region {region.name}")
    t = None
    if tail and family == "semidisc":
        t = _build_tail(chart)
        if t.residual > 1e-8:
            raise ResidualTooLarge(f"tail interpolation error {t.residual:.3g}")
    return AdiabaticChart(family, region, beta, variant, chart.exprs, t, worst)


def closed_chart(region, family="semidisc", beta=HALF_PI, variant="corrected"):
    """Chart with the closed-form heads only (no numerical checks, no tail)."""
    region = Region(region)
    if family == "semidisc":
        beta = HALF_PI
    else:
        variant = "sector"
    return _closed_chart(family, region, beta, variant)


# -------------------------------------------------------------- conversions

def _check_theta(chart, p):
    half = "lower" if chart.region.lower else "upper"
    if p.half != half:
        raise WrongRegion(f"region {chart.region.name} uses the {half} chart")
    lo, hi = chart.domain
    # O(1/r) collar: the passage formulas evaluate the chart just past pi/2
    pad = 8.0 / float(p.r)
    if not lo - pad <= float(p.theta) <= hi + pad:
        raise WrongRegion(f"theta={float(p.theta):.6g} outside [{lo:.6g}, {hi:.6g}]")


def to_adiabatic(chart, p, order=None):
    """``(rho, psi)`` of a polar point, truncated after ``order`` terms."""
    _check_theta(chart, p)
    return chart.rho_psi(p.r, p.theta, order)


def _theta_seed(chart, psi):
    lo, hi = chart.domain
    lo, hi = lo - 0.05, hi + 0.05
    if chart.family == "sector":
        lo, hi = max(lo, chart.domain[0] - 0.05), min(hi, math.pi - 1e-6)
    g = lambda t: float(chart.value("Psi", t)) - float(psi)
    glo, ghi = g(lo), g(hi)
    if glo * ghi > 0:
        raise NoConvergence("psi outside the range of Psi on the chart domain")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if (gm > 0) == (ghi > 0):
            hi, ghi = mid, gm
        else:
            lo, glo = mid, gm
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi)


def from_adiabatic(chart, rho, psi, order=None, max_iter=50):
    """Invert :func:`to_adiabatic` by Newton's method.

    The seed is ``theta0`` with ``Psi(theta0) = psi`` (bisection; ``Psi`` is
    increasing) and ``r0 = rho/Phi1(theta0)``. mpmath inputs are handled in
    mpmath arithmetic.
    """
    mpmode = isinstance(rho, mp.mpf) or isinstance(psi, mp.mpf)
    th = _theta_seed(chart, psi)
    r = float(rho) / float(chart.value("Phi1", th))
    if mpmode:
        th, r = mp.mpf(th), mp.mpf(r)
    tol = 1e-13 if not mpmode else mp.mpf(10)**(-mp.mp.dps + 8)
    for _ in range(max_iter):
        f1, f2 = chart.rho_psi(r, th, order)
        g1, g2 = f1 - rho, f2 - psi
        a, b, c, d = chart.jacobian(r, th, order)
        det = a * d - b * c
        dr = (d * g1 - b * g2) / det
        dt = (-c * g1 + a * g2) / det
        r, th = r - dr, th - dt
        if abs(dr) <= tol * abs(r) and abs(dt) <= tol:
            half = "lower" if chart.region.lower else "upper"
            return PolarPoint(r, th, half)
    raise NoConvergence("Newton inversion of the adiabatic chart did not converge")


def adiabatic_drift(chart, p, exact=None, order=None, dps=50):
    """``(rho' - rho, psi' - psi - 1/rho)`` across one exact F^2 step.

    ``exact`` maps ``(r, theta)`` to the image; the default is the mpmath
    composition of the region. Raises ``RegionExit`` if the image leaves the
    chart domain.
    """
    if exact is None:
        exact = lambda r, t: asy.exact_f2_polar(chart.beta, chart.region, r, t, dps)
    with mp.workdps(dps):
        r, th = mp.mpf(p.r), mp.mpf(p.theta)
        _check_theta(chart, PolarPoint(r, th, p.half))
        r2, t2 = exact(r, th)
        try:
            _check_theta(chart, PolarPoint(r2, t2, p.half))
        except WrongRegion as exc:
            raise RegionExit(str(exc)) from None
        rho, psi = chart.rho_psi(r, th, order)
        rho2, psi2 = chart.rho_psi(r2, t2, order)
        return float(rho2 - rho), float(psi2 - psi - 1 / rho)


def drift_fit(chart, r_grid, thetas, order=None, dps=50):
    """Log-log slopes of the max drifts over ``thetas`` against r."""
    half = "lower" if chart.region.lower else "upper"
    dr, dp = [], []
    for r in r_grid:
        vals = [adiabatic_drift(chart, PolarPoint(r, t, half), order=order, dps=dps)
                for t in thetas]
        dr.append(max(abs(v[0]) for v in vals))
        dp.append(max(abs(v[1]) for v in vals))
    return (asy.loglog_slope(r_grid, dr), asy.loglog_slope(r_grid, dp),
            np.array(dr), np.array(dp))


# ------------------------------------------------------------------- tables

PHI_COLUMNS = (("Phi1", 0), ("Phi1", 1), ("Phi1", 2), ("Phi1", 3), ("Phi2", 0),
               ("Phi2", 1), ("Phi2", 2), ("Phi3", 0), ("Phi3", 1), ("Phi4", 0))
PSI_COLUMNS = (("Psi", 0), ("Psi", 1), ("Psi", 2), ("Psi", 3), ("Psi1", 0),
               ("Psi1", 1), ("Psi1", 2), ("Psi2", 0), ("Psi2", 1), ("Psi3", 0))


def column_label(name, deriv):
    return name + "'" * deriv


def _edge_value(expr, angle):
    """``expr`` at an exact angle; one-sided limit from inside the band when
    plain substitution hits a removable singularity (tan(theta/2) at pi)."""
    val = expr.subs(TH, angle)
    if val.is_finite:
        return float(val)
    # the singularity is removable, so 1e-40 inside the band is exact in double precision
    with mp.workdps(60):
        step = mp.mpf(10) ** -40
        at = mp.pi - step if angle == sp.pi else mp.mpf(float(angle)) + step
        return float(sp.lambdify(TH, expr, "mpmath")(at))


def table_values(variant="published", charts=None):
    """Values of the chart functions at the region edges and at pi/2.

    Returns rows ``(table, region, angle, column, value)``; ``table`` is
    ``'Phi'`` or ``'Psi'``. Closed-form entries are differentiated and
    evaluated symbolically at the exact angle. ``Phi4`` and ``Psi3`` are zero
    at the initial angles; their pi/2 values need a tail and are reported
    only when ``charts`` (region -> chart with tail) is given.
    """
    rows = []
    for reg in (Region.I, Region.II, Region.III, Region.IV):
        ch = charts[reg] if charts else closed_chart(reg, variant=variant)
        th0 = initial_angle("semidisc", reg)
        exact0 = sp.pi if th0 > 1 else sp.Integer(0)
        derivs = {}
        for name in set(n for n, _ in PHI_COLUMNS + PSI_COLUMNS) - {"Phi4", "Psi3"}:
            top = max(d for n, d in PHI_COLUMNS + PSI_COLUMNS if n == name)
            ds = [ch.exprs[name]]
            for _ in range(top):
                ds.append(sp.diff(ds[-1], TH))
            derivs[name] = ds
        for ang, exact in ((th0, exact0), (HALF_PI, sp.pi / 2)):
            for tab, cols in (("Phi", PHI_COLUMNS), ("Psi", PSI_COLUMNS)):
                for name, d in cols:
                    if name in ("Phi4", "Psi3"):
                        if ang == th0:
                            val = 0.0
                        elif ch.tail is not None:
                            val = float(ch.value(name, ang))
                        else:
                            continue
                    else:
                        val = _edge_value(derivs[name][d], exact)
                    rows.append((tab, reg.name, ang, column_label(name, d), val))
    return rows


def export_tables_csv(path, variant="published"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["table", "region", "theta", "column", "value"])
        for row in table_values(variant):
            w.writerow([row[0], row[1], repr(row[2]), row[3], repr(row[4])])


def export_chart_csv(chart, path, step=1e-3):
    """Tabulate ``theta, Phi1..Phi4, Psi..Psi3`` over the chart domain."""
    lo, hi = chart.domain
    th = np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)
    names = [n for n in PHI_NAMES + PSI_NAMES
             if n in chart.exprs or (chart.tail is not None and n in ("Phi4", "Psi3"))]
    cols = [np.broadcast_to(chart.value(n, th), th.shape) for n in names]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta"] + names)
        for i, t in enumerate(th):
            w.writerow([repr(float(t))] + [repr(float(c[i])) for c in cols])
