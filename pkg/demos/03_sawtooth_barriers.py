"""Invariant polygons of the sawtooth map block radial transport.

For D = 2 - 2cos(pi/m) the conjugated map rotates each rhombus by pi/m, and
the regular 2m-gon around its centre is invariant. Seeds to its left never
get past it. With D = 1.1 the same hexagon is not invariant and orbits leak.
"""
from outerbilliards import sawtooth as sw

for m in (3, 4, 6):
    sys = sw.SawtoothSystem(sw.delta_for(m))
    poly = sw.build_invariant_polygon(m, 10)
    seeds = sw.seeds_left_of(sys, poly, 200)
    st = sw.escape_experiment(sys, seeds, 50000, barriers=[poly])
    print(f"m={m}: D={sys.delta:.5f}, {2 * m} vertices, closure {poly.closure:.1e}, "
          f"vertex period miss {sw.vertex_periodicity(poly):.1e}, crossings {st.total_crossings}")

sys = sw.SawtoothSystem(1.1)
poly = sw.build_invariant_polygon(3, 10, delta=1.1, check=False)
st = sw.escape_experiment(sys, sw.seeds_left_of(sys, poly, 200), 50000, barriers=[poly])
print(f"\nD=1.1: hexagon misses closure by {poly.closure:.3f}; "
      f"{st.orbits_crossing} of 200 orbits cross it")

pert = sw.SawtoothSystem(1.0, k=2, perturbation=sw.inverse_r_perturbation(0.1))
print("\nperturbed map T = L^2 + 0.1/R: single jumps against the G-band half width")
for j in (1, 2, 3, 4):
    print(f"  j={j}: jump {sw.measured_jump(pert, j):.2e}  bound {sw.jump_bound(j, pert.alpha):.2e}")
