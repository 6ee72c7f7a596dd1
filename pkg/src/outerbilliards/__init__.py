"""Outer billiards around circular sectors.

Modules
-------
geometry      exact map, support points, continuity regions of F^2
asymptotics   large-r expansions of F^2 and error-order fits
adiabatic     adiabatic charts (closed forms plus ODE tails)
return_map    first return to the fundamental domain, passage maps, sector sawtooth
normal_form   fixed points, cubic fits, Birkhoff twist, island scans
sawtooth      piecewise-rotation picture, invariant polygons, Fermi-Ulam map
cli           ``billiard-lab`` command-line driver
"""
from .errors import BilliardError
from .geometry import SEMIDISC, Point2, PolarPoint, Region, SectorShape

__version__ = "0.1.0"

__all__ = ["BilliardError", "SEMIDISC", "Point2", "PolarPoint", "Region", "SectorShape",
           "__version__"]
