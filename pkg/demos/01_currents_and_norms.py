"""
Currents and norms of an entangled two-particle state
=====================================================

A two-particle state built from four plane-wave modes.  Particle 1's
current is constant in space and time even though |psi|^2 is not.
"""

import numpy as np

from relbohm import currents as cur
from relbohm.scenario import corpus_scenario
from relbohm.wavefunction import density, kg_norm, normalize_kg, spacetime_normalization_N

sc = corpus_scenario("entangled")
psi = normalize_kg(sc.wavefunction())
box = psi.box
print(psi)
print("KG norm:", kg_norm(psi))

# %%
# The Klein-Gordon norm does not care at which times the slices are taken.
rng = np.random.default_rng(0)
for t in rng.random((3, 2)) * box.T:
    print(f"slice times {t.round(3)} -> norm {kg_norm(psi, t):.15f}")

# %%
# The norm over the whole 4n-dimensional box is a different number.
print("N =", spacetime_normalization_N(psi))

# %%
# Particle 1's current, at a few points; compare with the density there.
j1 = cur.single_particle_current(psi, 0)
partner = np.array([2.0, 0.5, 0.6, 0.7])
for x1 in box.lower + rng.random((3, 4)) * box.extent:
    cfg = np.stack([x1, partner])
    print("j1 =", j1.evaluate(x1).round(8), " |psi|^2 =", f"{density(psi, cfg):.3e}")

# %%
# Its divergence is zero analytically; finite differences agree.
x = box.lower + rng.random((5, 4)) * box.extent
print("analytic divergence:", cur.divergence_single(j1, x))
print("finite differences: ", cur.divergence_fd(j1, x))
