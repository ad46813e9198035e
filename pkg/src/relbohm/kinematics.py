"""Minkowski-space primitives: four-vectors, the periodic spacetime box and
its discrete plane-wave modes.

Units are natural (hbar = c = 1) and the metric signature is (+, -, -, -).
Arrays whose last axis has length 4 are read as (t, x, y, z).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

METRIC = np.diag([1.0, -1.0, -1.0, -1.0])

TIMELIKE = "timelike"
NULL = "null"
SPACELIKE = "spacelike"


@dataclass(frozen=True)
class FourVector:
    """A contravariant four-vector x^mu = (t, x, y, z)."""

    t: float
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @classmethod
    def from_array(cls, a) -> FourVector:
        a = np.asarray(a, dtype=float)
        if a.shape != (4,):
            raise ValueError(f"expected 4 components, got shape {a.shape}")
        return cls(*(float(v) for v in a))

    def __array__(self, dtype=None, copy=None):
        return np.array([self.t, self.x, self.y, self.z], dtype=dtype)

    @property
    def spatial(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def __add__(self, other):
        return FourVector.from_array(np.asarray(self) + np.asarray(other))

    def __sub__(self, other):
        return FourVector.from_array(np.asarray(self) - np.asarray(other))

    def __mul__(self, scalar: float):
        return FourVector.from_array(np.asarray(self) * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return FourVector(-self.t, -self.x, -self.y, -self.z)

    def dot(self, other) -> float:
        return float(minkowski_dot(self, other))

    def lowered(self) -> np.ndarray:
        """Covariant components x_mu."""
        return lower_index(self)


def minkowski_dot(a, b):
    """Minkowski product a.b = a^0 b^0 - a^1 b^1 - a^2 b^2 - a^3 b^3.

    Broadcasts over leading axes; complex inputs are not conjugated.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    return a[..., 0] * b[..., 0] - a[..., 1] * b[..., 1] - a[..., 2] * b[..., 2] - a[..., 3] * b[..., 3]


def lower_index(a) -> np.ndarray:
    """Flip the sign of the spatial components (x^mu -> x_mu, or back)."""
    out = np.array(a, copy=True)
    out[..., 1:] = -out[..., 1:]
    return out


raise_index = lower_index


def causal_class(dx, rel_tol: float = 1e-12):
    """Classify displacement(s) ``dx`` as timelike, null or spacelike.

    The null band is ``|dx.dx| <= rel_tol * |dx|_E^2`` with the Euclidean
    norm of the components, so the verdict does not depend on step size.
    """
    dx = np.asarray(dx, dtype=float)
    interval = minkowski_dot(dx, dx)
    band = rel_tol * np.sum(dx * dx, axis=-1)
    out = np.where(interval > band, TIMELIKE, np.where(interval < -band, SPACELIKE, NULL))
    if out.ndim == 0:
        return str(out)
    return out


@dataclass(frozen=True)
class SpacetimeBox:
    """Box periodic in space with period ``L`` on every axis and finite
    time extent ``T`` starting at ``origin.t``.

    The box frame is the only chart used for hypersurfaces.
    """

    L: float
    T: float
    origin: FourVector = field(default_factory=lambda: FourVector(0.0))

    def __post_init__(self):
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValueError(f"box period L must be positive, got {self.L}")
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValueError(f"box time extent T must be positive, got {self.T}")
        if not isinstance(self.origin, FourVector):
            object.__setattr__(self, "origin", FourVector.from_array(self.origin))

    @property
    def volume(self) -> float:
        """Spatial volume L^3."""
        return self.L**3

    @property
    def four_volume(self) -> float:
        return self.volume * self.T

    @property
    def t_start(self) -> float:
        return self.origin.t

    @property
    def t_end(self) -> float:
        return self.origin.t + self.T

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.origin, dtype=float)

    @property
    def extent(self) -> np.ndarray:
        return np.array([self.T, self.L, self.L, self.L])

    def contains_time(self, t) -> np.ndarray:
        t = np.asarray(t)
        return (t >= self.t_start) & (t <= self.t_end)

    def wrap(self, points) -> np.ndarray:
        """Map spatial components into [origin, origin + L); time untouched."""
        p = np.array(points, dtype=float, copy=True)
        o = self.lower[1:]
        r = np.mod(p[..., 1:] - o, self.L)
        # mod of a tiny negative number rounds up to L itself
        r[r >= self.L] = 0.0
        p[..., 1:] = o + r
        return p

    def hypersurface_element(self) -> np.ndarray:
        """Integrated covariant 3-volume d^3x |g3|^(1/2) n^mu of one
        constant-time slice: the unit normal (1, 0, 0, 0) times V."""
        return np.array([self.volume, 0.0, 0.0, 0.0])


@dataclass(frozen=True)
class Mode:
    """Positive-frequency plane wave with integer momentum indices."""

    n_vec: tuple[int, int, int]
    mass: float

    def __post_init__(self):
        n = tuple(int(v) for v in self.n_vec)
        if len(n) != 3 or any(a != b for a, b in zip(n, self.n_vec)):
            raise ValueError(f"n_vec must be an integer triple, got {self.n_vec!r}")
        object.__setattr__(self, "n_vec", n)
        if not (np.isfinite(self.mass) and self.mass >= 0):
            raise ValueError(f"mass must be >= 0, got {self.mass}")
        if self.mass == 0 and n == (0, 0, 0):
            raise ValueError("massless zero-momentum mode has zero frequency")

    def momentum(self, box: SpacetimeBox) -> FourVector:
        return mode_momentum(self, box)


def box_momenta(n_vecs, masses, L: float) -> np.ndarray:
    """On-shell four-momenta for integer index arrays ``n_vecs[..., 3]``.

    ``masses`` broadcasts against ``n_vecs[..., 0]``.
    """
    kvec = (2.0 * np.pi / L) * np.asarray(n_vecs, dtype=float)
    m = np.asarray(masses, dtype=float)
    k0 = np.sqrt(np.sum(kvec * kvec, axis=-1) + m * m)
    return np.concatenate([k0[..., None], kvec], axis=-1)


def mode_momentum(mode: Mode, box: SpacetimeBox) -> FourVector:
    """k = (sqrt(|k|^2 + m^2), 2 pi n / L)."""
    return FourVector.from_array(box_momenta(mode.n_vec, mode.mass, box.L))
