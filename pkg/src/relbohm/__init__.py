"""Relativistic almost-local particle trajectories for free Klein-Gordon
states on a periodic spacetime box."""

from .kinematics import FourVector, Mode, SpacetimeBox, minkowski_dot, mode_momentum
from .wavefunction import (
    MultiParticleWaveFunction,
    density,
    evaluate_psi,
    gradient_psi,
    kg_norm,
    normalize_kg,
    normalize_spacetime,
    spacetime_normalization_N,
)
from .currents import (
    current_tensor,
    continuity_residual,
    divergence_single,
    single_particle_current,
    velocity_field,
)
from .dynamics import (
    causal_character,
    integrate_local,
    integrate_nonlocal,
    reparameterization_distance,
)
from .ensemble import SamplerConfig, equivariance_test, push_forward, sample_initial

__version__ = "0.1.0"
