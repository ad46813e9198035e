"""Conserved currents of a many-time plane-wave state.

* ``current_tensor``: j_{mu_1...mu_n} = (i/2)^n psi* <->d_{mu_1} ... <->d_{mu_n} psi,
  evaluated from the mode sum.
* ``single_particle_current``: the tensor with every spectator index
  integrated over a constant-time slice.  On the periodic box only pairs of
  terms whose spectator momenta agree survive, and the result is a closed
  form in x_a alone.
* ``velocity_field``: j_a(x_a) / |psi(x_1, ..., x_n)|^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import SpacetimeBox, lower_index, minkowski_dot, raise_index
from .wavefunction import (
    MultiParticleWaveFunction,
    _check_particle,
    as_configuration,
    density,
)


class NodeError(ValueError):
    """Velocity requested at (or too close to) a node of psi."""


# -- tensor current ---------------------------------------------------------

#: Above this particle count the tensor is evaluated per component.
DENSE_MAX_PARTICLES = 3


class CurrentTensorValue:
    """The n-index current at one configuration, covariant components.

    For ``n <= 3`` all 4^n components are computed at once; for larger ``n``
    components are computed on indexing.
    """

    def __init__(self, weights: np.ndarray, factors: list[np.ndarray]):
        # weights[K, K'] = c_K^* c_K'; factors[a][K, K', mu] per particle
        self.n = len(factors)
        self._weights = weights
        self._factors = factors
        self._dense = None
        if self.n <= DENSE_MAX_PARTICLES:
            self._dense = self._materialize()

    def _materialize(self) -> np.ndarray:
        acc = self._weights
        for f in self._factors:
            acc = acc[..., None] * f.reshape(f.shape[:2] + (1,) * (acc.ndim - 2) + (4,))
        return acc.sum(axis=(0, 1))

    def component(self, indices) -> complex:
        indices = tuple(int(i) for i in indices)
        if len(indices) != self.n:
            raise IndexError(f"need {self.n} indices, got {len(indices)}")
        if self._dense is not None:
            return complex(self._dense[indices])
        prod = self._weights.copy()
        for f, mu in zip(self._factors, indices):
            prod = prod * f[:, :, mu]
        return complex(prod.sum())

    def __getitem__(self, indices) -> float:
        if not isinstance(indices, tuple):
            indices = (indices,)
        return self.component(indices).real

    @property
    def complex_components(self) -> np.ndarray:
        if self._dense is None:
            self._dense = self._materialize()
        return self._dense

    @property
    def components(self) -> np.ndarray:
        """Real covariant components, shape (4,) * n."""
        return self.complex_components.real

    @property
    def imag_residual(self) -> float:
        """max |Im j| / max |j| over all components."""
        c = self.complex_components
        scale = np.max(np.abs(c))
        return float(np.max(np.abs(c.imag)) / scale) if scale > 0 else 0.0

    def contravariant(self) -> np.ndarray:
        out = self.components.copy()
        for axis in range(self.n):
            out = np.moveaxis(raise_index(np.moveaxis(out, axis, -1)), -1, axis)
        return out


def current_tensor(wf: MultiParticleWaveFunction, cfg) -> CurrentTensorValue:
    """Mode-sum evaluation of the n-index current at a single configuration.

    Each pair of terms (K, K') contributes
    c_K^* c_K' prod_a (k_a + k'_a)_{mu_a} / 2 * u_{k_a}^*(x_a) u_{k'_a}(x_a).
    """
    cfg = as_configuration(cfg, wf.n)
    if cfg.ndim != 2:
        raise ValueError("current_tensor takes a single configuration of shape (n, 4)")
    weights = np.outer(wf.coeffs.conj(), wf.coeffs)
    vol = wf.box.volume
    factors = []
    for a in range(wf.n):
        k = wf.momenta[:, a, :]
        u = np.exp(-1j * minkowski_dot(k, cfg[a])) / np.sqrt(k[:, 0] * vol)
        ksum_low = lower_index(k[:, None, :] + k[None, :, :]) / 2.0
        factors.append(ksum_low * (u.conj()[:, None] * u[None, :])[..., None])
    return CurrentTensorValue(weights, factors)


# -- single-particle current --------------------------------------------------


@dataclass(frozen=True, eq=False)
class SingleParticleCurrentField:
    """Closed-form current j_a^mu(x) of one particle.

    The pair representation is

        j^mu(x) = sum_p Re[amp_p (k_p + k'_p)^mu / 2 exp(i (k_p - k'_p).x)].

    The same field is evaluated faster by grouping terms with equal
    spectator momenta: j^mu = sum_P Re[phi_P^* sum_{K in P} c_K k^mu u_K].
    """

    particle: int
    box: SpacetimeBox
    mass: float
    # grouped representation: one row per mode tuple of the parent state
    amplitudes: np.ndarray  # c_K / sqrt(k^0 V), complex (K,)
    momenta: np.ndarray  # (K, 4) contravariant
    n_vecs: np.ndarray  # (K, 3) int
    groups: np.ndarray  # (K,) int labels of equal spectator momenta
    # pair representation
    pair_amp: np.ndarray  # (P,) complex
    pair_index: np.ndarray  # (P, 2) indices into the rows above

    @property
    def k(self) -> np.ndarray:
        return self.momenta[self.pair_index[:, 0]]

    @property
    def k_prime(self) -> np.ndarray:
        return self.momenta[self.pair_index[:, 1]]

    @property
    def scale(self) -> float:
        """Upper bound on any component of |j|."""
        ksum = self.k[:, 0] + self.k_prime[:, 0]
        return float(np.sum(np.abs(self.pair_amp) * ksum / 2.0))

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(x)

    def evaluate(self, x) -> np.ndarray:
        """j^mu at x of shape (..., 4) via the grouped form."""
        x = np.asarray(x, dtype=float)
        u = self.amplitudes * np.exp(-1j * minkowski_dot(x[..., None, :], self.momenta))
        n_groups = int(self.groups.max()) + 1
        onehot = np.zeros((len(self.groups), n_groups))
        onehot[np.arange(len(self.groups)), self.groups] = 1.0
        phi = u @ onehot
        kphi = np.einsum("...k,km,kg->...gm", u, self.momenta, onehot)
        return np.einsum("...g,...gm->...m", phi.conj(), kphi).real

    def evaluate_pairs(self, x, real: bool = True) -> np.ndarray:
        """j^mu at x from the explicit pair sum (independent of grouping)."""
        x = np.asarray(x, dtype=float)
        k, kp = self.k, self.k_prime
        phase = np.exp(1j * minkowski_dot(x[..., None, :], k - kp))
        out = np.einsum("p,...p,pm->...m", self.pair_amp, phase, (k + kp) / 2.0)
        return out.real if real else out


def _group_labels(wf: MultiParticleWaveFunction, particle: int) -> np.ndarray:
    spectators = np.delete(wf.n_vecs, particle, axis=1).reshape(len(wf), -1)
    _, labels = np.unique(spectators, axis=0, return_inverse=True)
    return labels.reshape(-1)


def spectator_factors(wf: MultiParticleWaveFunction, particle: int, times=None) -> np.ndarray:
    """(K, K') product over spectators b of the slice integral
    int d^3x_b (k_b + k'_b)^0 / 2 u_{k_b}^* u_{k'_b} at time ``times[b]``.

    Equals 1 where the spectator momenta coincide and 0 elsewhere, for any
    slice times.
    """
    if times is None:
        times = np.full(wf.n, wf.box.t_start)
    times = np.asarray(times, dtype=float)
    k0 = wf.momenta[..., 0]
    out = np.ones((len(wf), len(wf)), dtype=complex)
    for b in range(wf.n):
        if b == particle:
            continue
        same = np.all(wf.n_vecs[:, None, b, :] == wf.n_vecs[None, :, b, :], axis=-1)
        k, kp = k0[:, None, b], k0[None, :, b]
        out *= same * (k + kp) / (2.0 * np.sqrt(k * kp)) * np.exp(1j * (k - kp) * times[b])
    return out


def single_particle_current(
    wf: MultiParticleWaveFunction, particle: int, spectator_times=None
) -> SingleParticleCurrentField:
    """Integrate the tensor current over constant-time slices of every
    particle except ``particle``."""
    _check_particle(wf, particle)
    vol = wf.box.volume
    k = wf.momenta[:, particle, :]
    amplitudes = wf.coeffs / np.sqrt(k[:, 0] * vol)

    spect = spectator_factors(wf, particle, spectator_times)
    i, j = np.nonzero(spect)
    pair_amp = amplitudes[i].conj() * amplitudes[j] * spect[i, j]
    pair_index = np.stack([i, j], axis=1)

    def frozen(a):
        a = np.array(a)
        a.flags.writeable = False
        return a

    return SingleParticleCurrentField(
        particle=particle,
        box=wf.box,
        mass=wf.masses[particle],
        amplitudes=frozen(amplitudes),
        momenta=frozen(k),
        n_vecs=frozen(wf.n_vecs[:, particle, :]),
        groups=frozen(_group_labels(wf, particle)),
        pair_amp=frozen(pair_amp),
        pair_index=frozen(pair_index),
    )


def single_particle_currents(wf: MultiParticleWaveFunction) -> list[SingleParticleCurrentField]:
    return [single_particle_current(wf, a) for a in range(wf.n)]


# -- divergences --------------------------------------------------------------


def on_shell_factors(field: SingleParticleCurrentField) -> np.ndarray:
    """(k + k').(k - k') for every stored pair, from the mass shell.

    With k^0^2 = (2 pi / L)^2 |n|^2 + m^2 and a common mass m, the energy
    and momentum parts are the same integer multiple of (2 pi / L)^2, so
    the factor is computed exactly.
    """
    n = field.n_vecs[field.pair_index[:, 0]]
    n_p = field.n_vecs[field.pair_index[:, 1]]
    dn2 = np.sum(n * n, axis=1) - np.sum(n_p * n_p, axis=1)  # int
    energy_part = dn2  # (k0^2 - k0'^2) / (2 pi / L)^2, equal masses cancel
    momentum_part = dn2  # (|k|^2 - |k'|^2) / (2 pi / L)^2
    return (2 * np.pi / field.box.L) ** 2 * (energy_part - momentum_part).astype(float)


def divergence_single(field: SingleParticleCurrentField, x) -> float:
    """Analytic d_mu j^mu at x: sum_p Re[i amp (k+k').(k-k')/2 e^{i(k-k').x}]."""
    x = np.asarray(x, dtype=float)
    k, kp = field.k, field.k_prime
    phase = np.exp(1j * minkowski_dot(x[..., None, :], k - kp))
    per_pair = 1j * field.pair_amp * on_shell_factors(field) / 2.0 * phase
    out = per_pair.sum(axis=-1).real
    return out[()] if np.ndim(out) == 0 else out


def divergence_fd(field: SingleParticleCurrentField, x, h: float = 1e-4):
    """Central-difference estimate of d_mu j^mu at x (shape (..., 4))."""
    x = np.asarray(x, dtype=float)
    total = 0.0
    for mu in range(4):
        e = np.zeros(4)
        e[mu] = h
        total = total + (field.evaluate(x + e)[..., mu] - field.evaluate(x - e)[..., mu]) / (2 * h)
    return total


# -- velocity -----------------------------------------------------------------


def velocity_field(
    wf: MultiParticleWaveFunction,
    cfg,
    particle: int,
    field: SingleParticleCurrentField | None = None,
) -> np.ndarray:
    """v_a^mu = j_a^mu(x_a) / |psi(cfg)|^2.

    Raises NodeError where |psi|^2 is below ``wf.node_epsilon``.
    """
    _check_particle(wf, particle)
    cfg = as_configuration(cfg, wf.n)
    if field is None:
        field = single_particle_current(wf, particle)
    rho = np.asarray(density(wf, cfg))
    if np.any(rho < wf.node_epsilon):
        raise NodeError(f"|psi|^2 = {rho.min():.3e} below node threshold {wf.node_epsilon:.3e}")
    return field.evaluate(cfg[..., particle, :]) / rho[..., None]


class VelocityField:
    """All n velocity fields of a state, evaluated jointly.

    Calling with configurations X of shape (..., n, 4) returns velocities of
    the same shape and |psi|^2 of shape (...).  No node check is made here;
    callers compare the density with ``node_epsilon``.
    """

    def __init__(self, wf: MultiParticleWaveFunction):
        self.wf = wf
        self.fields = single_particle_currents(wf)
        self.node_epsilon = wf.node_epsilon

    def __call__(self, X):
        rho = density(self.wf, X)
        j = np.stack([f.evaluate(X[..., a, :]) for a, f in enumerate(self.fields)], axis=-2)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = j / np.asarray(rho)[..., None, None]
        return v, rho


def continuity_residual(wf: MultiParticleWaveFunction, cfg, h: float = 1e-3) -> float:
    """|sum_a d_{a mu}(|Psi|^2 v_a^mu)| by central differences of the
    product density * velocity at shifted configurations."""
    cfg = as_configuration(cfg, wf.n)
    if cfg.ndim != 2:
        raise ValueError("continuity_residual takes a single configuration")
    fields = single_particle_currents(wf)
    total = 0.0
    for a in range(wf.n):
        for mu in range(4):
            shifted = np.stack([cfg, cfg])
            shifted[0, a, mu] += h
            shifted[1, a, mu] -= h
            flux = velocity_field(wf, shifted, a, fields[a])[:, mu] * density(wf, shifted)
            total += (flux[0] - flux[1]) / (2 * h)
    return abs(total)
