"""Many-time wave functions built from positive-frequency plane waves.

A state of ``n`` spin-0 particles is a finite superposition

    psi(x_1, ..., x_n) = sum_K c_K prod_a u_{k_a}(x_a),
    u_k(x) = exp(-i k.x) / sqrt(k^0 V),

over mode tuples ``K``.  Every plane wave is on shell, so each term solves
the Klein-Gordon equation in every argument exactly.  With this mode
normalization the Klein-Gordon norm on constant-time slices is
``sum_K |c_K|^2``.

Configurations are arrays of shape ``(..., n, 4)``; particle indices are
zero-based.
"""

from __future__ import annotations

import itertools
from functools import cached_property

import numpy as np

from .kinematics import FourVector, Mode, SpacetimeBox, box_momenta, lower_index, minkowski_dot

#: Relative density (w.r.t. the box-averaged density) below which a point
#: counts as a node of the wave function.
NODE_REL_EPS = 1e-12


class ConfigurationArityError(ValueError):
    """Configuration does not have one spacetime point per particle."""


class ZeroStateError(ValueError):
    """The wave function has no nonzero coefficient or zero norm."""


def as_configuration(points, n: int | None = None) -> np.ndarray:
    """Coerce ``points`` (sequence of FourVector / arrays) to a float array
    of shape ``(..., n, 4)`` and check the particle count."""
    if isinstance(points, FourVector):
        points = [points]
    if isinstance(points, (list, tuple)) and points and isinstance(points[0], FourVector):
        points = [np.asarray(p, dtype=float) for p in points]
    cfg = np.asarray(points, dtype=float)
    if cfg.ndim < 2 or cfg.shape[-1] != 4:
        raise ConfigurationArityError(f"configuration must have shape (..., n, 4), got {cfg.shape}")
    if n is not None and cfg.shape[-2] != n:
        raise ConfigurationArityError(f"configuration has {cfg.shape[-2]} points for a {n}-particle state")
    return cfg


class MultiParticleWaveFunction:
    """Sparse superposition of plane-wave mode products on a periodic box.

    Parameters
    ----------
    box : SpacetimeBox
    masses : sequence of float
        One mass per particle slot.
    terms : mapping or iterable of (momenta, coefficient)
        ``momenta`` is a sequence of ``n`` integer triples.  Repeated mode
        tuples are merged by adding their coefficients; tuples whose merged
        coefficient is exactly zero are dropped.
    """

    def __init__(self, box: SpacetimeBox, masses, terms):
        self.box = box
        self.masses = tuple(float(m) for m in masses)
        if not self.masses:
            raise ValueError("need at least one particle")
        self.n = len(self.masses)
        if hasattr(terms, "items"):
            terms = terms.items()

        merged: dict[tuple, complex] = {}
        for i, (momenta, coeff) in enumerate(terms):
            key = tuple(tuple(int(v) for v in triple) for triple in momenta)
            if len(key) != self.n:
                raise ConfigurationArityError(
                    f"term {i} has {len(key)} momentum triples for {self.n} particles"
                )
            for a, triple in enumerate(key):
                # also validates the triple and rejects zero-frequency modes
                Mode(triple, self.masses[a])
            merged[key] = merged.get(key, 0j) + complex(coeff)
        merged = {k: c for k, c in merged.items() if c != 0}
        if not merged:
            raise ZeroStateError("wave function has no nonzero coefficient")

        keys = list(merged)
        self.n_vecs = np.array(keys, dtype=np.int64).reshape(len(keys), self.n, 3)
        self.coeffs = np.array([merged[k] for k in keys], dtype=complex)
        self.momenta = box_momenta(self.n_vecs, np.array(self.masses)[None, :], box.L)
        # prod_a (k_a^0 V)^(-1/2)
        self.mode_norms = np.prod(1.0 / np.sqrt(self.momenta[..., 0] * box.volume), axis=1)
        for arr in (self.n_vecs, self.coeffs, self.momenta, self.mode_norms):
            arr.flags.writeable = False

    def __repr__(self):
        return f"MultiParticleWaveFunction(n={self.n}, terms={len(self.coeffs)}, masses={self.masses})"

    def __len__(self):
        return len(self.coeffs)

    @property
    def terms(self) -> dict[tuple[Mode, ...], complex]:
        return {
            tuple(Mode(tuple(nv), m) for nv, m in zip(nvs, self.masses)): complex(c)
            for nvs, c in zip(self.n_vecs.tolist(), self.coeffs)
        }

    def with_coefficients(self, coeffs) -> MultiParticleWaveFunction:
        coeffs = np.asarray(coeffs, dtype=complex)
        return MultiParticleWaveFunction(
            self.box, self.masses, zip(self.n_vecs.tolist(), coeffs)
        )

    def scaled(self, factor: complex) -> MultiParticleWaveFunction:
        return self.with_coefficients(self.coeffs * factor)

    # -- pair bookkeeping -------------------------------------------------

    def spatial_match(self, exclude: int | None = None) -> np.ndarray:
        """Boolean (K, K) mask: tuples whose spatial momenta coincide for
        every particle other than ``exclude``."""
        eq = np.all(self.n_vecs[:, None, :, :] == self.n_vecs[None, :, :, :], axis=-1)
        if exclude is not None:
            eq = np.delete(eq, exclude, axis=-1)
        return np.all(eq, axis=-1)

    @cached_property
    def spacetime_norm(self) -> float:
        return spacetime_normalization_N(self)

    @cached_property
    def mean_density(self) -> float:
        """Box average of |psi|^2 over the 4n-dimensional box."""
        return self.spacetime_norm / self.box.four_volume**self.n

    @property
    def node_epsilon(self) -> float:
        return NODE_REL_EPS * self.mean_density


# -- evaluation -------------------------------------------------------------


def _term_values(wf: MultiParticleWaveFunction, cfg) -> np.ndarray:
    """Per-term values c_K prod_a u(x_a), shape (..., K)."""
    cfg = as_configuration(cfg, wf.n)
    # sum_a k_a . x_a for every term
    phase = np.einsum("...am,kam->...k", cfg, lower_index(wf.momenta))
    return (wf.coeffs * wf.mode_norms) * np.exp(-1j * phase)


def evaluate_psi(wf: MultiParticleWaveFunction, cfg):
    """psi at configuration(s) ``cfg`` of shape (..., n, 4)."""
    out = _term_values(wf, cfg).sum(axis=-1)
    return out[()] if out.ndim == 0 else out


def gradient_psi(wf: MultiParticleWaveFunction, cfg, particle: int) -> np.ndarray:
    """Covariant gradient d psi / d x_a^mu, shape (..., 4), complex."""
    _check_particle(wf, particle)
    terms = _term_values(wf, cfg)
    k_low = lower_index(wf.momenta[:, particle, :])
    return -1j * np.einsum("...k,km->...m", terms, k_low)


def density(wf: MultiParticleWaveFunction, cfg):
    """|psi|^2 at ``cfg``."""
    return np.abs(evaluate_psi(wf, cfg)) ** 2


def kg_operator(wf: MultiParticleWaveFunction, cfg, particle: int):
    """(d_a^mu d_{a mu} + m_a^2) psi evaluated term by term from the mode
    sum.  Zero up to rounding for every on-shell state."""
    _check_particle(wf, particle)
    terms = _term_values(wf, cfg)
    k = wf.momenta[:, particle, :]
    factor = wf.masses[particle] ** 2 - minkowski_dot(k, k)
    return np.einsum("...k,k->...", terms, factor.astype(complex))


def _check_particle(wf, particle):
    if not (0 <= int(particle) < wf.n):
        raise IndexError(f"particle index {particle} out of range for n={wf.n}")


# -- norms ------------------------------------------------------------------


def kg_norm(wf: MultiParticleWaveFunction, times=None) -> float:
    """Klein-Gordon norm with every particle's hypersurface at constant time.

    The slice times ``times[a]`` (default ``box.t_start``) enter through the
    phases exp(i (k^0 - k'^0) t_a) of the surviving pairs; the result does
    not depend on them.
    """
    if times is None:
        times = np.full(wf.n, wf.box.t_start)
    times = np.asarray(times, dtype=float)
    if times.shape != (wf.n,):
        raise ConfigurationArityError(f"need {wf.n} slice times, got shape {times.shape}")
    k0 = wf.momenta[..., 0]
    # per-particle factor: spatial Kronecker delta times (k0 + k0')/(2 sqrt(k0 k0')) phase
    factor = np.ones((len(wf), len(wf)), dtype=complex)
    for a in range(wf.n):
        same = np.all(wf.n_vecs[:, None, a, :] == wf.n_vecs[None, :, a, :], axis=-1)
        k, kp = k0[:, None, a], k0[None, :, a]
        factor *= same * (k + kp) / (2.0 * np.sqrt(k * kp)) * np.exp(1j * (k - kp) * times[a])
    value = np.einsum("i,ij,j->", wf.coeffs.conj(), factor, wf.coeffs)
    return float(value.real)


def normalize_kg(wf: MultiParticleWaveFunction) -> MultiParticleWaveFunction:
    norm = kg_norm(wf)
    if not norm > 0:
        raise ZeroStateError("cannot normalize a state with zero Klein-Gordon norm")
    return wf.scaled(1.0 / np.sqrt(norm))


def _time_integral(delta, t0: float, T: float):
    """int_{t0}^{t0+T} exp(i delta t) dt, elementwise."""
    delta = np.asarray(delta, dtype=float)
    safe = np.where(delta == 0, 1.0, delta)
    value = (np.exp(1j * safe * (t0 + T)) - np.exp(1j * safe * t0)) / (1j * safe)
    return np.where(delta == 0, T, value)


def spacetime_normalization_N(wf: MultiParticleWaveFunction) -> float:
    """Integral of |psi|^2 over the whole 4n-dimensional box.

    Spatial integrals over one period are Kronecker deltas in the spatial
    momenta; the time integrals are done in closed form.
    """
    box = wf.box
    k0 = wf.momenta[..., 0]
    factor = np.ones((len(wf), len(wf)), dtype=complex)
    for a in range(wf.n):
        same = np.all(wf.n_vecs[:, None, a, :] == wf.n_vecs[None, :, a, :], axis=-1)
        k, kp = k0[:, None, a], k0[None, :, a]
        factor *= same * _time_integral(k - kp, box.t_start, box.T) / np.sqrt(k * kp)
    value = np.einsum("i,ij,j->", wf.coeffs.conj(), factor, wf.coeffs)
    return float(value.real)


def normalize_spacetime(wf: MultiParticleWaveFunction) -> MultiParticleWaveFunction:
    """Psi = psi / N^(1/2), so that |Psi|^2 integrates to one over the box."""
    N = spacetime_normalization_N(wf)
    if not N > 0:
        raise ZeroStateError("cannot normalize a state with zero spacetime norm")
    return wf.scaled(1.0 / np.sqrt(N))


# -- constructors -----------------------------------------------------------


def plane_wave(box: SpacetimeBox, n_vec, mass: float, coeff: complex = 1.0) -> MultiParticleWaveFunction:
    return MultiParticleWaveFunction(box, [mass], [([n_vec], coeff)])


def product_state(*factors: MultiParticleWaveFunction) -> MultiParticleWaveFunction:
    """Tensor product of states on the same box."""
    box = factors[0].box
    if any(f.box != box for f in factors):
        raise ValueError("all factors must live on the same box")
    masses = [m for f in factors for m in f.masses]
    terms = []
    for combo in itertools.product(*(range(len(f)) for f in factors)):
        momenta = []
        coeff = 1.0 + 0j
        for f, i in zip(factors, combo):
            momenta.extend(f.n_vecs[i].tolist())
            coeff *= f.coeffs[i]
        terms.append((momenta, coeff))
    return MultiParticleWaveFunction(box, masses, terms)


def gaussian_packet(
    box: SpacetimeBox,
    mass: float,
    center,
    sigma_k: float,
    x0,
    half_width: int = 3,
) -> MultiParticleWaveFunction:
    """Single-particle packet on the (2 half_width + 1)^3 modes around the
    integer index ``center``.

    Coefficients are exp(-|k - kbar|^2 / (4 sigma_k^2)) sqrt(k^0) exp(i k.x0),
    so at time x0.t the packet is a (periodized) Gaussian of position
    spread 1 / (2 sigma_k) centred on x0.
    """
    center = np.asarray(center, dtype=int)
    x0 = np.asarray(x0, dtype=float)
    rng = range(-half_width, half_width + 1)
    offsets = np.array(list(itertools.product(rng, rng, rng)))
    n_vecs = center + offsets
    k = box_momenta(n_vecs, mass, box.L)
    kbar = box_momenta(center, mass, box.L)
    dk2 = np.sum((k[:, 1:] - kbar[1:]) ** 2, axis=-1)
    coeffs = np.exp(-dk2 / (4 * sigma_k**2)) * np.sqrt(k[:, 0]) * np.exp(1j * minkowski_dot(k, x0))
    wf = MultiParticleWaveFunction(box, [mass], zip(([nv] for nv in n_vecs.tolist()), coeffs))
    return normalize_kg(wf)
