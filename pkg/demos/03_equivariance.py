"""
An ensemble distributed as |Psi|^2 stays so
===========================================

Draw configurations from |Psi|^2 on the 4n-dimensional box, move every
member along the joint flow, and compare with |Psi|^2 on the region the
flow can reach.
"""

from relbohm.ensemble import SamplerConfig, equivariance_test, push_forward, sample_initial
from relbohm.scenario import corpus_scenario
from relbohm.wavefunction import normalize_spacetime

sc = corpus_scenario("entangled")
Psi = normalize_spacetime(sc.wavefunction())
s = sc.run.equivariance_s

# %%
# The sampler alone.
samples = sample_initial(Psi, SamplerConfig(2000, seed=1))
print("sample shape:", samples.shape)

# %%
# Members whose time leaves the box are dropped.
pushed = push_forward(Psi, samples, s, s / 20)
print(f"dropped {pushed.n_dropped} of {len(samples)} ({pushed.drop_fraction:.1%})")

# %%
# The full comparison, as a key-value report.
report = equivariance_test(Psi, SamplerConfig(5000, seed=1), s)
print(report.to_text())
