"""The Fermi-Ulam collision map carries the same barriers.

Its leading part is the sawtooth map with (R, phi) = (I, tau), so the
octagon built for m = 4 also stops the energy from growing.
"""
from outerbilliards import sawtooth as sw

model = sw.FermiUlamModel(sw.delta_for(4), delta1=1.0)
print("one collision from (0.7, 10):", sw.fermi_ulam_step(sw.FermiUlamModel(1.0, 1.0), 0.7, 10.0))
max_I, cr, poly = sw.fermi_ulam_experiment(model, 4, 10, seeds=200, steps=100000)
print(f"D = {model.delta:.5f}: largest energy {max_I.max():.3f}, barrier crossings {cr.sum()}")
for j in (3, 4, 5):
    print(f"  j={j}: correction jump {sw.fermi_ulam_jump(model, j):.2e}, "
          f"bound {sw.jump_bound(j, sw.SawtoothSystem(model.delta).alpha):.2e}")
