"""Integral curves of the particle currents.

Two parameterizations of the same curves are integrated with fixed-step
RK4:

* local:    dX_a/ds~ = j_a(X_a)               (one particle at a time)
* nonlocal: dX_a/ds  = j_a(X_a) / |psi(X)|^2  (all particles on one s grid)

Spatial coordinates are integrated unwrapped (the fields are periodic);
``Trajectory.wrapped_points`` maps them back into the box.  Time is not
periodic: a trajectory that leaves [t_start, t_end] is clipped on the
boundary and stops there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .currents import NodeError, SingleParticleCurrentField, VelocityField
from .kinematics import SpacetimeBox, causal_class
from .wavefunction import MultiParticleWaveFunction, as_configuration

LOCAL = "local"
NONLOCAL = "nonlocal"

COMPLETE = "complete"
EXITED = "exited_box"
NODE = "node"
STAGNATION = "stagnation"
STEP_CAP = "step_cap"

#: |j| below this fraction of the field's scale counts as a fixed point.
J_REL_EPS = 1e-12


class StagnationError(ValueError):
    """Local integration started where the current vanishes."""


@dataclass
class Trajectory:
    particle: int
    params: np.ndarray
    points: np.ndarray
    parameterization: str
    box: SpacetimeBox
    status: str = COMPLETE
    #: dX/dparam at every sample; enables cubic Hermite interpolation
    tangents: np.ndarray | None = None

    def __len__(self):
        return len(self.params)

    @property
    def wrapped_points(self) -> np.ndarray:
        return self.box.wrap(self.points)

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]


def rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _step_sizes(s_max: float, ds: float) -> np.ndarray:
    if not ds > 0:
        raise ValueError(f"step must be positive, got {ds}")
    if s_max < 0:
        raise ValueError("backward integration is not supported")
    n_full = int(np.floor(s_max / ds * (1 + 1e-12)))
    steps = [ds] * n_full
    rest = s_max - n_full * ds
    if rest > 1e-12 * ds:
        steps.append(rest)
    return np.array(steps)


def _default_cap(box: SpacetimeBox) -> float:
    return 0.5 * box.L


def _last_inside(step, y, h, inside, iterations: int = 60):
    """Largest h' in [0, h] (by bisection) whose step ``step(y, h')`` stays
    inside; used to clip a trajectory on the time boundary of the box."""
    lo, hi = 0.0, h
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if inside(step(y, mid)):
            lo = mid
        else:
            hi = mid
    return lo, step(y, lo)


def integrate_local(
    field: SingleParticleCurrentField,
    x0,
    s_max: float,
    ds: float,
    step_cap: float | None = None,
) -> Trajectory:
    """RK4 solution of dX/ds~ = j(X) from x0.

    Only the particle's own current enters.  The trajectory stops early
    (with ``status`` set) on leaving the time extent of the box, when the
    current drops below the fixed-point threshold, or when a single step
    moves further than ``step_cap``.
    """
    box = field.box
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (4,):
        raise ValueError(f"x0 must be a single four-vector, got shape {x0.shape}")
    if not box.contains_time(x0[0]):
        raise ValueError(f"x0 time {x0[0]} outside the box [{box.t_start}, {box.t_end}]")
    cap = _default_cap(box) if step_cap is None else step_cap
    j_eps = J_REL_EPS * field.scale
    if np.linalg.norm(field.evaluate(x0)) < j_eps:
        raise StagnationError(f"current vanishes at x0 = {x0}")

    params = [0.0]
    points = [x0]
    status = COMPLETE
    s, y = 0.0, x0
    for h in _step_sizes(s_max, ds):
        y_new = rk4_step(field.evaluate, y, h)
        if not box.contains_time(y_new[0]):
            status = EXITED
            h, y_new = _last_inside(
                lambda z, dh: rk4_step(field.evaluate, z, dh), y, h, lambda z: box.contains_time(z[0])
            )
            if h > 0 and np.linalg.norm(y_new - y) <= cap:
                params.append(s + h)
                points.append(y_new)
            break
        if np.linalg.norm(y_new - y) > cap:
            status = STEP_CAP
            break
        s += h
        y = y_new
        params.append(s)
        points.append(y)
        if np.linalg.norm(field.evaluate(y)) < j_eps:
            status = STAGNATION
            break
    points = np.array(points)
    return Trajectory(field.particle, np.array(params), points, LOCAL, box, status, field.evaluate(points))


def integrate_nonlocal(
    wf: MultiParticleWaveFunction,
    cfg0,
    s_max: float,
    ds: float,
    velocity: VelocityField | None = None,
    step_cap: float | None = None,
) -> list[Trajectory]:
    """Joint RK4 solution of dX_a/ds = v_a(X_1, ..., X_n) for all particles.

    Returns one Trajectory per particle on a shared s grid.  Integration
    stops for everyone when any stage point hits a node, any particle
    leaves the time extent of the box, or a step exceeds ``step_cap``.
    """
    box = wf.box
    cfg0 = as_configuration(cfg0, wf.n)
    if cfg0.ndim != 2:
        raise ValueError("cfg0 must be a single configuration of shape (n, 4)")
    if not np.all(box.contains_time(cfg0[:, 0])):
        raise ValueError("initial configuration outside the time extent of the box")
    vf = VelocityField(wf) if velocity is None else velocity
    cap = _default_cap(box) if step_cap is None else step_cap
    v0, rho0 = vf(cfg0)
    if not rho0 >= vf.node_epsilon:
        raise NodeError(f"|psi|^2 = {float(rho0):.3e} at the initial configuration is below the node threshold")

    class _Node(Exception):
        pass

    def rhs(y):
        v, rho = vf(y)
        if not rho >= vf.node_epsilon:
            raise _Node
        return v

    params = [0.0]
    points = [cfg0]
    status = COMPLETE
    s, y = 0.0, cfg0
    for h in _step_sizes(s_max, ds):
        try:
            y_new = rk4_step(rhs, y, h)
        except _Node:
            status = NODE
            break
        if not np.all(box.contains_time(y_new[:, 0])):
            status = EXITED
            try:
                h, y_new = _last_inside(
                    lambda z, dh: rk4_step(rhs, z, dh), y, h, lambda z: np.all(box.contains_time(z[:, 0]))
                )
            except _Node:
                break
            if h > 0 and np.max(np.linalg.norm(y_new - y, axis=-1)) <= cap:
                params.append(s + h)
                points.append(y_new)
            break
        if np.max(np.linalg.norm(y_new - y, axis=-1)) > cap:
            status = STEP_CAP
            break
        s += h
        y = y_new
        params.append(s)
        points.append(y)

    params = np.array(params)
    points = np.array(points)
    tangents, _ = vf(points)
    return [
        Trajectory(a, params.copy(), points[:, a, :].copy(), NONLOCAL, box, status, tangents[:, a, :].copy())
        for a in range(wf.n)
    ]


#: Status codes of ensemble members in ``flow_nonlocal``.
FLOW_OK, FLOW_EXITED, FLOW_NODE = 0, 1, 2


def flow_nonlocal(
    wf: MultiParticleWaveFunction,
    X,
    s: float,
    ds: float,
    velocity: VelocityField | None = None,
    backward: bool = False,
):
    """Advance many configurations X (M, n, 4) by parameter ``s``.

    Members that leave the box in time or meet a node at any stage are
    frozen and flagged.  Returns ``(X_final, status)`` with status codes
    FLOW_OK / FLOW_EXITED / FLOW_NODE.  ``backward=True`` flows by -s; it
    only serves to map out which points are reachable from the box.
    """
    box = wf.box
    X = as_configuration(X, wf.n).copy()
    if X.ndim != 3:
        raise ValueError("X must have shape (M, n, 4)")
    vf = VelocityField(wf) if velocity is None else velocity
    status = np.zeros(len(X), dtype=np.int8)
    sign = -1.0 if backward else 1.0

    for h in _step_sizes(s, ds):
        live = status == FLOW_OK
        if not np.any(live):
            break
        y = X[live]
        node = np.zeros(len(y), dtype=bool)

        def rhs(z):
            v, rho = vf(z)
            bad = ~(rho >= vf.node_epsilon)
            node[bad] = True
            v[bad] = 0.0
            return v

        y_new = rk4_step(rhs, y, sign * h)
        inside = np.all(box.contains_time(y_new[:, :, 0]), axis=-1)
        idx = np.flatnonzero(live)
        status[idx[node]] = FLOW_NODE
        status[idx[~node & ~inside]] = FLOW_EXITED
        ok = ~node & inside
        X[idx[ok]] = y_new[ok]
    return X, status


# -- analysis ---------------------------------------------------------------


def causal_character(traj: Trajectory, rel_tol: float = 1e-12) -> list[str]:
    """timelike / null / spacelike for every segment of the trajectory."""
    if len(traj) < 2:
        raise ValueError("need at least two samples")
    return list(causal_class(np.diff(traj.points, axis=0), rel_tol))


class _Curve:
    """Piecewise cubic Hermite curve through the samples of a trajectory.

    Without stored tangents the chords are used, which makes every piece a
    straight segment.
    """

    def __init__(self, traj: Trajectory):
        p = traj.points
        if len(p) == 1:
            p = np.vstack([p, p])
        self.p0, self.p1 = p[:-1], p[1:]
        if traj.tangents is not None and len(traj.points) > 1:
            dpar = np.diff(traj.params)[:, None]
            self.m0 = traj.tangents[:-1] * dpar
            self.m1 = traj.tangents[1:] * dpar
        else:
            self.m0 = self.m1 = self.p1 - self.p0

    def __len__(self):
        return len(self.p0)

    def evaluate(self, i, u):
        """Position, first and second u-derivatives on pieces ``i`` at ``u``."""
        u = np.asarray(u)[..., None]
        u2, u3 = u * u, u * u * u
        p0, p1, m0, m1 = self.p0[i], self.p1[i], self.m0[i], self.m1[i]
        pos = (2 * u3 - 3 * u2 + 1) * p0 + (u3 - 2 * u2 + u) * m0 + (-2 * u3 + 3 * u2) * p1 + (u3 - u2) * m1
        d1 = (6 * u2 - 6 * u) * p0 + (3 * u2 - 4 * u + 1) * m0 + (-6 * u2 + 6 * u) * p1 + (3 * u2 - 2 * u) * m1
        d2 = (12 * u - 6) * p0 + (6 * u - 4) * m0 + (-12 * u + 6) * p1 + (6 * u - 2) * m1
        return pos, d1, d2

    def in_slab(self, t_lo: float, t_hi: float) -> np.ndarray:
        ta, tb = self.p0[:, 0], self.p1[:, 0]
        return (np.maximum(ta, tb) >= t_lo) & (np.minimum(ta, tb) <= t_hi)


def _distance_to_curve(points: np.ndarray, curve: _Curve, pieces: np.ndarray,
                       candidates: int = 3, chunk: int = 1024) -> np.ndarray:
    """Distance from each point to the union of the given curve pieces.

    The nearest chords pick candidate pieces; Newton iterations on
    (H(u) - p).H'(u) = 0 then locate the closest point on each piece.
    """
    a, b = curve.p0[pieces], curve.p1[pieces]
    d = b - a
    dd = np.sum(d * d, axis=-1)
    k = min(candidates, len(pieces))
    out = np.empty(len(points))
    for lo in range(0, len(points), chunk):
        p = points[lo : lo + chunk]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.where(dd > 0, np.sum((p[:, None, :] - a) * d, axis=-1) / dd, 0.0)
        u = np.clip(u, 0.0, 1.0)
        chord_dist = np.linalg.norm(p[:, None, :] - (a + u[..., None] * d), axis=-1)
        best = np.argpartition(chord_dist, k - 1, axis=1)[:, :k]
        rows = np.arange(len(p))[:, None]
        seg = pieces[best]
        uu = u[rows, best]
        pp = p[:, None, :]
        for _ in range(8):
            pos, d1, d2 = curve.evaluate(seg, uu)
            r = pos - pp
            g = np.sum(r * d1, axis=-1)
            gp = np.sum(d1 * d1, axis=-1) + np.sum(r * d2, axis=-1)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(gp > 0, g / gp, 0.0)
            uu = np.clip(uu - step, 0.0, 1.0)
        dist = np.linalg.norm(curve.evaluate(seg, uu)[0] - pp, axis=-1)
        for end in (0.0, 1.0):
            dist = np.minimum(dist, np.linalg.norm(curve.evaluate(seg, np.full_like(uu, end))[0] - pp, axis=-1))
        out[lo : lo + chunk] = dist.min(axis=1)
    return out


def _samples_in_slab(curve: _Curve, t_lo: float, t_hi: float) -> np.ndarray:
    """Vertices and piece midpoints of ``curve`` whose time lies in the slab."""
    vertices = np.vstack([curve.p0, curve.p1[-1:]])
    mids = curve.evaluate(np.arange(len(curve)), np.full(len(curve), 0.5))[0]
    pts = np.vstack([vertices, mids])
    return pts[(pts[:, 0] >= t_lo) & (pts[:, 0] <= t_hi)]


def reparameterization_distance(traj_a: Trajectory, traj_b: Trajectory) -> float:
    """Symmetric Hausdorff distance between two trajectories in spacetime,
    after clipping both to their common time interval.

    Trajectories with tangents are compared as cubic Hermite curves, so the
    result reflects integration error rather than chord sagitta.  Zero (up
    to that error) when both trace the same curve, however parameterized.
    """
    pa, pb = traj_a.points, traj_b.points
    t_lo = max(pa[:, 0].min(), pb[:, 0].min())
    t_hi = min(pa[:, 0].max(), pb[:, 0].max())
    if t_lo > t_hi:
        raise ValueError("trajectories have no common time interval")
    ca, cb = _Curve(traj_a), _Curve(traj_b)
    worst = 0.0
    for src, dst in ((ca, cb), (cb, ca)):
        pts = _samples_in_slab(src, t_lo, t_hi)
        pieces = np.flatnonzero(dst.in_slab(t_lo, t_hi))
        if len(pts) == 0 or len(pieces) == 0:
            raise ValueError("trajectories have no common time interval")
        worst = max(worst, float(_distance_to_curve(pts, dst, pieces).max()))
    return worst


@dataclass
class ConvergenceReport:
    """Endpoint errors of a fixed-step run under repeated step halving."""

    steps: np.ndarray
    errors: np.ndarray
    reference_step: float
    slopes: np.ndarray = field(init=False)

    def __post_init__(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            self.slopes = np.log2(self.errors[:-1] / self.errors[1:])

    @property
    def order(self) -> float:
        """Least-squares slope of log(error) against log(step)."""
        return float(np.polyfit(np.log(self.steps), np.log(self.errors), 1)[0])

    @property
    def self_error(self) -> float:
        """Error estimate of the finest run, Richardson-style for RK4."""
        return float(self.errors[-1])


def step_halving(run, ds: float, halvings: int = 3, ref_factor: int = 8) -> ConvergenceReport:
    """Run ``run(step) -> endpoint array`` at ds, ds/2, ..., ds/2^halvings
    and compare each endpoint with a reference at ds / 2^halvings / ref_factor."""
    steps = ds / 2.0 ** np.arange(halvings + 1)
    ref_step = steps[-1] / ref_factor
    reference = np.asarray(run(ref_step))
    errors = np.array([np.max(np.abs(np.asarray(run(h)) - reference)) for h in steps])
    return ConvergenceReport(steps, errors, ref_step)
