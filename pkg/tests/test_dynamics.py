import math

import numpy as np
import pytest

import relbohm.wavefunction as wavefunction
from relbohm import currents as cur
from relbohm.dynamics import (
    COMPLETE,
    EXITED,
    LOCAL,
    NONLOCAL,
    StagnationError,
    Trajectory,
    causal_character,
    flow_nonlocal,
    integrate_local,
    integrate_nonlocal,
    reparameterization_distance,
    rk4_step,
    step_halving,
)
from relbohm.kinematics import SPACELIKE, TIMELIKE, SpacetimeBox
from relbohm.scenario import corpus_scenario
from relbohm.wavefunction import (
    MultiParticleWaveFunction,
    normalize_kg,
    normalize_spacetime,
    plane_wave,
    product_state,
)

TWO_PI = 2 * math.pi
BOX = SpacetimeBox(TWO_PI, 10.0)
V = TWO_PI**3


def line(points, box=BOX, tangent=None):
    points = np.asarray(points, dtype=float)
    params = np.arange(len(points), dtype=float)
    if tangent is None:
        tangent = np.gradient(points, axis=0)
    return Trajectory(0, params, points, LOCAL, box, COMPLETE, np.broadcast_to(tangent, points.shape).copy())


# -- RK4 ----------------------------------------------------------------------


def test_rk4_order_on_exponential():
    errs = []
    for n in (10, 20, 40, 80):
        y, h = np.array([1.0]), 1.0 / n
        for _ in range(n):
            y = rk4_step(lambda z: z, y, h)
        errs.append(abs(y[0] - math.e))
    slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(slopes - 4) < 0.3)


def test_rk4_order_on_entangled_scenario():
    sc = corpus_scenario("entangled")
    wf = normalize_spacetime(sc.wavefunction())
    cfg0 = sc.run.initial[0]

    def endpoint(h):
        return np.concatenate([t.end for t in integrate_nonlocal(wf, cfg0, 0.01, h)])

    report = step_halving(endpoint, 1e-4)
    assert abs(report.order - 4) < 0.3
    assert np.all(np.abs(report.slopes - 4) < 0.3)


# -- local ----------------------------------------------------------------------


def test_local_single_mode_straight_line():
    wf = normalize_kg(plane_wave(BOX, (1, 2, 2), 1.0))
    f = cur.single_particle_current(wf, 0)
    x0 = np.array([1.0, 0.1, 0.2, 0.3])
    tr = integrate_local(f, x0, 50.0, 1.0)
    k = np.array([math.sqrt(10), 1, 2, 2])
    want = x0 + tr.params[:, None] * k / (math.sqrt(10) * V)
    np.testing.assert_allclose(tr.points, want, atol=1e-12)
    assert tr.parameterization == LOCAL and tr.status == COMPLETE


def test_local_entangled_straight_line(entangled):
    f = cur.single_particle_current(entangled, 0)
    direction = (0.8 * np.array([math.sqrt(2), 1, 0, 0]) + 0.2 * np.array([math.sqrt(2), 0, 0, 1])) / (math.sqrt(2) * V)
    x0 = np.array([1.0, 0.2, 0.3, 0.4])
    tr = integrate_local(f, x0, 500.0, 10.0)
    np.testing.assert_allclose(tr.points, x0 + tr.params[:, None] * direction, atol=1e-12)


def test_local_uses_only_own_particle(entangled, monkeypatch):
    f = cur.single_particle_current(entangled, 1)

    class Sentinel:
        """Forwards to the field and records every argument it sees."""

        seen = []

        def __getattr__(self, name):
            return getattr(f, name)

        def evaluate(self, x):
            self.seen.append(np.shape(x))
            return f.evaluate(x)

    def forbidden(*args, **kwargs):
        raise AssertionError("local integration evaluated the many-particle wave function")

    monkeypatch.setattr(wavefunction, "_term_values", forbidden)
    monkeypatch.setattr(cur, "density", forbidden)
    s = Sentinel()
    tr = integrate_local(s, np.array([2.0, 0.5, 0.6, 0.7]), 100.0, 5.0)
    assert len(tr) > 2
    assert all(shape[-1] == 4 and (len(shape) == 1 or shape[0] == len(tr)) for shape in s.seen)


def test_local_clips_at_time_boundary():
    wf = normalize_kg(plane_wave(BOX, (1, 0, 0), 1.0))
    f = cur.single_particle_current(wf, 0)
    tr = integrate_local(f, np.array([9.0, 0, 0, 0]), 1e6, 7.0)
    assert tr.status == EXITED
    assert tr.end[0] == pytest.approx(BOX.t_end, abs=1e-9)
    assert np.all(np.diff(tr.params) > 0)


def test_local_stagnation_at_node():
    wf = MultiParticleWaveFunction(BOX, [1.0], [([(1, 0, 0)], 1.0), ([(-1, 0, 0)], 1.0)])
    f = cur.single_particle_current(wf, 0)
    with pytest.raises(StagnationError):
        integrate_local(f, np.array([1.0, math.pi / 2, 0, 0]), 1.0, 0.1)


def test_zero_span_keeps_initial_point(entangled):
    f = cur.single_particle_current(entangled, 0)
    x0 = np.array([1.0, 0.2, 0.3, 0.4])
    tr = integrate_local(f, x0, 0.0, 0.1)
    assert len(tr) == 1 and np.array_equal(tr.points[0], x0)
    trs = integrate_nonlocal(entangled, [x0, [2.0, 0.5, 0.6, 0.7]], 0.0, 0.1)
    assert [len(t) for t in trs] == [1, 1]


def test_bad_arguments(entangled):
    f = cur.single_particle_current(entangled, 0)
    with pytest.raises(ValueError):
        integrate_local(f, np.array([1.0, 0, 0, 0]), 1.0, 0.0)
    with pytest.raises(ValueError):
        integrate_local(f, np.array([1.0, 0, 0, 0]), -1.0, 0.1)
    with pytest.raises(ValueError):
        integrate_local(f, np.array([11.0, 0, 0, 0]), 1.0, 0.1)


# -- nonlocal -------------------------------------------------------------------


def test_nonlocal_product_straight_lines():
    wf = normalize_spacetime(product_state(plane_wave(BOX, (1, 0, 0), 1.0), plane_wave(BOX, (0, -1, 1), 0.5)))
    cfg0 = np.array([[1.0, 0.5, 0.5, 0.5], [2.0, 1.0, 2.0, 3.0]])
    trs = integrate_nonlocal(wf, cfg0, 0.002, 1e-4)
    k = [np.array([math.sqrt(2), 1, 0, 0]), np.array([math.sqrt(2.25), 0, -1, 1])]
    # j_a carries the spectator's slice integral 1, |psi|^2 its pointwise 1/(k_b^0 V)
    v = [k[0] * k[1][0] * V, k[1] * k[0][0] * V]
    for a, tr in enumerate(trs):
        np.testing.assert_allclose(tr.points, cfg0[a] + tr.params[:, None] * v[a], atol=1e-11)
        assert tr.parameterization == NONLOCAL


def test_nonlocal_shared_monotone_parameter(interference):
    sc = corpus_scenario("interference")
    trs = integrate_nonlocal(normalize_spacetime(interference), sc.run.initial[0], 0.005, 1e-4)
    assert np.array_equal(trs[0].params, trs[1].params)
    assert np.all(np.diff(trs[0].params) > 0)


def test_nonlocal_entangled_traces_the_local_line(entangled):
    sc = corpus_scenario("entangled")
    Psi = normalize_spacetime(entangled)
    trs = integrate_nonlocal(Psi, sc.run.initial[0], 0.004, 2e-5)
    x0 = sc.run.initial[0][0]
    direction = 0.8 * np.array([math.sqrt(2), 1, 0, 0]) + 0.2 * np.array([math.sqrt(2), 0, 0, 1])
    d = trs[0].points - x0
    # collinear with the constant j_1 direction, while the speed in s varies
    cross = d - np.outer(d @ direction / (direction @ direction), direction)
    assert np.max(np.abs(cross)) < 1e-10
    speed = np.linalg.norm(trs[0].tangents, axis=1)
    assert np.ptp(speed) > 1e-2 * speed.mean()


def test_nonlocal_clips_at_boundary():
    wf = normalize_spacetime(plane_wave(BOX, (1, 0, 0), 1.0))
    trs = integrate_nonlocal(wf, [[9.5, 0, 0, 0]], 10.0, 0.3)
    assert trs[0].status == EXITED
    assert trs[0].end[0] == pytest.approx(BOX.t_end, abs=1e-9)


def test_nonlocal_node_at_start():
    wf = normalize_spacetime(MultiParticleWaveFunction(BOX, [1.0], [([(1, 0, 0)], 1.0), ([(-1, 0, 0)], 1.0)]))
    with pytest.raises(cur.NodeError):
        integrate_nonlocal(wf, [[1.0, math.pi / 2, 0, 0]], 1.0, 0.1)


def test_flow_matches_joint_integration(interference):
    Psi = normalize_spacetime(interference)
    sc = corpus_scenario("interference")
    X = np.stack([sc.run.initial[0], sc.run.initial[0] + 0.1])
    out, status = flow_nonlocal(Psi, X, 0.002, 1e-4)
    assert np.all(status == 0)
    for i in range(2):
        trs = integrate_nonlocal(Psi, X[i], 0.002, 1e-4)
        np.testing.assert_allclose(out[i], np.stack([t.end for t in trs]), atol=1e-12)
    back, status = flow_nonlocal(Psi, out, 0.002, 1e-4, backward=True)
    np.testing.assert_allclose(back, X, atol=1e-9)


# -- causal character -------------------------------------------------------------


def test_moving_mode_is_timelike():
    wf = normalize_kg(plane_wave(BOX, (2, -1, 0), 0.3))
    tr = integrate_local(cur.single_particle_current(wf, 0), np.array([0.5, 0, 0, 0]), 1e3, 50.0)
    assert set(causal_character(tr)) == {TIMELIKE}


def test_spacelike_segment_in_interference_region():
    wf = normalize_kg(corpus_scenario("spacelike").wavefunction())
    f = cur.single_particle_current(wf, 0)
    # scan a (t, x) grid for points with j^0 < |j|
    t, x = np.meshgrid(np.linspace(0.5, 9.5, 19), np.linspace(0, TWO_PI, 64, endpoint=False), indexing="ij")
    P = np.stack([t, x, 0 * t, 0 * t], -1).reshape(-1, 4)
    j = f.evaluate(P)
    region = P[j[:, 0] < np.linalg.norm(j[:, 1:], axis=1)]
    assert len(region) > 0
    tr = integrate_local(f, region[0], 5.0, 0.01)
    assert SPACELIKE in causal_character(tr)


# -- reparameterization distance ----------------------------------------------------


def test_distance_identical_and_resampled():
    pts = np.array([[0.0, 0, 0, 0], [1.0, 0.5, 0, 0], [2.0, 1.0, 0, 0]])
    a = line(pts)
    fine = np.linspace(0, 2, 9)
    b = line(np.stack([fine, fine / 2, 0 * fine, 0 * fine], -1))
    assert reparameterization_distance(a, a) == 0.0
    assert reparameterization_distance(a, b) < 1e-12


def test_distance_detects_offset():
    s = np.linspace(0, 2, 11)
    a = line(np.stack([s, s / 2, 0 * s, 0 * s], -1))
    b = line(np.stack([s, s / 2, 0 * s + 0.01, 0 * s], -1))
    assert reparameterization_distance(a, b) == pytest.approx(0.01, rel=1e-9)


def test_distance_needs_overlap():
    s = np.linspace(0, 1, 5)
    a = line(np.stack([s, s, 0 * s, 0 * s], -1))
    b = line(np.stack([s + 5, s, 0 * s, 0 * s], -1))
    with pytest.raises(ValueError):
        reparameterization_distance(a, b)


def test_local_and_nonlocal_curves_coincide(entangled):
    sc = corpus_scenario("entangled")
    Psi = normalize_spacetime(entangled)
    cfg0 = sc.run.initial[0]
    nonlocal_ = integrate_nonlocal(Psi, cfg0, sc.run.s_max, sc.run.ds)
    rho0 = float(wavefunction.density(Psi, cfg0))
    for a, f in enumerate(cur.single_particle_currents(Psi)):
        local = integrate_local(f, cfg0[a], 1.5 * sc.run.s_max / rho0, sc.run.ds / rho0)
        assert reparameterization_distance(local, nonlocal_[a]) < 1e-7


def test_step_halving_report():
    rep = step_halving(lambda h: np.array([(1 + h) ** 2]), 0.1, halvings=2, ref_factor=4)
    assert rep.steps.tolist() == [0.1, 0.05, 0.025]
    assert rep.reference_step == pytest.approx(0.025 / 4)
    assert rep.self_error == rep.errors[-1]
    assert len(rep.slopes) == 2


def test_flow_flags_members_at_nodes():
    wf = normalize_spacetime(MultiParticleWaveFunction(BOX, [1.0], [([(1, 0, 0)], 1.0), ([(-1, 0, 0)], 1.0)]))
    X = np.array([[[1.0, math.pi / 2, 0, 0]], [[1.0, 0.3, 0, 0]]])
    out, status = flow_nonlocal(wf, X, 0.1, 0.05)
    assert status.tolist() == [2, 0]
    np.testing.assert_array_equal(out[0], X[0])
