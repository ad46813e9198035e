"""
A narrow momentum packet moves like a classical particle
========================================================

343 modes around k = (10, 0, 0) with a Gaussian spread.  The trajectory
from the packet centre follows x0 + (k/k0) t.
"""

import numpy as np

from relbohm.dynamics import integrate_nonlocal
from relbohm.kinematics import SpacetimeBox
from relbohm.wavefunction import gaussian_packet, normalize_spacetime

box = SpacetimeBox(2 * np.pi, 10.0)
mass = 10.0
kbar = np.array([np.hypot(10.0, mass), 10.0, 0.0, 0.0])
x0 = np.array([0.0, 1.0, 2.0, 3.0])
Psi = normalize_spacetime(gaussian_packet(box, mass, (10, 0, 0), 1.0, x0))

tr = integrate_nonlocal(Psi, x0[None], 2.0, 1e-3)[0]
classical = x0[1:] + (kbar[1:] / kbar[0]) * (tr.points[:, :1] - x0[0])
d = tr.points[:, 1:] - classical
d -= box.L * np.round(d / box.L)

# %%
for i in np.linspace(0, len(tr) - 1, 6).astype(int):
    t = tr.points[i, 0]
    print(f"t = {t:6.3f}   deviation from the classical line {np.linalg.norm(d[i]):.4f}")
print("packet width 1/(2 sigma_k) = 0.5")
