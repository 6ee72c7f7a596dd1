"""An elliptic island of the semi-disc return map, seen three ways.

1. Newton finds the fixed point of the exact first return near (3n - 3/4, 1).
2. A polynomial fit of the return gives cos(alpha) and the twist alpha2.
3. Orbits started around the fixed point rotate at a rate that drifts
   linearly with |a|^2, with slope alpha2.
"""
import math

from outerbilliards import normal_form as nf
from outerbilliards import return_map as rm

for n in (40, 80, 160):
    p = nf.find_fixed_point(n)
    model = nf.taylor_fit(n, p)
    res = nf.birkhoff_twist(nf.diagonalize(model))
    dev = math.dist(p, (3 * n - 0.75, 1.0))
    print(f"n={n:4d}  fixed point ({p[0]:.5f}, {p[1]:.5f})  n*|p - anchor| {n * dev:.3f}  "
          f"cos a {model.half_trace:.5f}  n^2 alpha2 {res.alpha2.real * n * n:.4f}")
print(f"limits: cos a -> {-7 / 9:.5f}, n^2 alpha2 -> {nf.ALPHA2_LIMIT:.4f}\n")

n = 80
cyc = rm.anchor_cycle(n)
print("anchor cycle at n = 80 (rho, phi) through F1, F2, F3, F4:")
for s in cyc:
    print(f"  ({s.rho:.5f}, {s.phi:.5f})")

prof = nf.rotation_profile(n, [0.002, 0.005, 0.01])
b, m = nf.profile_fit(prof)
print(f"\nrotation profile: intercept {b:.6f}, slope * n^2 {m * n * n:.4f}")
print(f"bounded fraction of the island box: {nf.island_scan(n, grid=8, horizon=2000):.2f}")
