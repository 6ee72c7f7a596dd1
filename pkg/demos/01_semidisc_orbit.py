"""The five-periodic orbit of the semi-disc and the size of the F^2 remainders.

Start at (2 + sqrt 3, 1): five reflections close the orbit. Then compare the
exact square map with its truncated expansion and watch the error fall with r.
"""
import math

import numpy as np

from outerbilliards import asymptotics as asy
from outerbilliards.geometry import SEMIDISC, Region, classify_region, orbit

z0 = (2 + math.sqrt(3), 1.0)
pts = orbit(SEMIDISC, z0, 5)
for i, (x, y) in enumerate(pts):
    print(f"{i}: ({x: .6f}, {y: .6f})  region {classify_region(SEMIDISC, (x, y)).name}")
print(f"closure after five steps: {math.dist(pts[-1], pts[0]):.2e}\n")

rg = 10.0 * 2.0 ** np.arange(5, 13)
print("order  slope_r  slope_theta   (region I, corrected coefficients)")
for order in (1, 2, 3, 4):
    ex, ap = asy.semidisc_pair(Region.I, order)
    f = asy.order_fit(ex, ap, Region.I, rg,
                      lambda r: asy.default_theta_grid(math.pi / 2, Region.I, r, 3))
    print(f"{order:5d}  {f.slope_r:7.3f}  {f.slope_theta:11.3f}")

ex, ap = asy.semidisc_pair(Region.I, 3, "published")
f = asy.order_fit(ex, ap, Region.I, rg,
                  lambda r: asy.default_theta_grid(math.pi / 2, Region.I, r, 3))
print(f"with b2 as printed, order 3 stalls at ({f.slope_r:.2f}, {f.slope_theta:.2f})")
