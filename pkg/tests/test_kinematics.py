import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from relbohm.kinematics import (
    NULL,
    SPACELIKE,
    TIMELIKE,
    FourVector,
    Mode,
    SpacetimeBox,
    box_momenta,
    causal_class,
    lower_index,
    minkowski_dot,
    mode_momentum,
)

TWO_PI = 2 * np.pi
BOX = SpacetimeBox(TWO_PI, 10.0)

indices = st.tuples(*(st.integers(-6, 6) for _ in range(3)))
masses = st.floats(0.0, 20.0)
components = st.floats(-1e3, 1e3, allow_nan=False)


@pytest.mark.parametrize(
    "a, expected",
    [((1, 0, 0, 0), 1.0), ((0, 1, 0, 0), -1.0), ((1, 1, 0, 0), 0.0)],
)
def test_minkowski_dot_units(a, expected):
    assert minkowski_dot(FourVector(*a), FourVector(*a)) == expected


def test_minkowski_dot_broadcasts():
    a = np.arange(24.0).reshape(2, 3, 4)
    b = np.array([1.0, 2.0, 3.0, 4.0])
    want = a[..., 0] - 2 * a[..., 1] - 3 * a[..., 2] - 4 * a[..., 3]
    np.testing.assert_array_equal(minkowski_dot(a, b), want)


def test_fourvector_arithmetic():
    p = FourVector(1, 2, 3, 4)
    q = FourVector(0.5, -1, 0, 2)
    assert p + q == FourVector(1.5, 1, 3, 6)
    assert p - q == FourVector(0.5, 3, 3, 2)
    assert 2 * p == FourVector(2, 4, 6, 8)
    assert -p == FourVector(-1, -2, -3, -4)
    assert p.dot(q) == pytest.approx(0.5 + 2 - 0 - 8)
    np.testing.assert_array_equal(p.lowered(), [1, -2, -3, -4])
    np.testing.assert_array_equal(lower_index(lower_index(np.asarray(p))), np.asarray(p))
    with pytest.raises(ValueError):
        FourVector.from_array([1, 2, 3])


def test_mode_momentum_examples():
    np.testing.assert_allclose(np.asarray(mode_momentum(Mode((0, 0, 0), 1.0), BOX)), [1, 0, 0, 0])
    np.testing.assert_allclose(np.asarray(mode_momentum(Mode((1, 0, 0), 0.0), BOX)), [1, 1, 0, 0])
    k = mode_momentum(Mode((1, 2, 2), 1.0), BOX)
    assert k.t == pytest.approx(np.sqrt(10.0), rel=1e-15)
    np.testing.assert_allclose(k.spatial, [1, 2, 2])


@given(indices, masses, st.floats(0.1, 100.0))
def test_mass_shell(n_vec, m, L):
    if m == 0 and n_vec == (0, 0, 0):
        return
    k = mode_momentum(Mode(n_vec, m), SpacetimeBox(L, 1.0))
    assert k.t > 0
    scale = k.t**2
    assert abs(k.dot(k) - m * m) <= 1e-12 * scale


def test_mode_validation():
    with pytest.raises(ValueError):
        Mode((0, 0, 0), 0.0)
    with pytest.raises(ValueError):
        Mode((1, 0), 1.0)
    with pytest.raises(ValueError):
        Mode((0.5, 0, 0), 1.0)
    with pytest.raises(ValueError):
        Mode((1, 0, 0), -1.0)
    assert Mode((1, 0, 0), 0.0).momentum(BOX).t == pytest.approx(1.0)


def test_box_momenta_matches_modes():
    nv = np.array([[0, 0, 0], [1, -2, 3], [4, 0, 1]])
    k = box_momenta(nv, 0.7, BOX.L)
    for row, n in zip(k, nv):
        np.testing.assert_allclose(row, np.asarray(mode_momentum(Mode(tuple(n), 0.7), BOX)), rtol=1e-15)


def test_causal_class_examples():
    assert causal_class([1, 0.5, 0, 0]) == TIMELIKE
    assert causal_class([1, 1, 0, 0]) == NULL
    assert causal_class([0.5, 1, 0, 0]) == SPACELIKE
    # a rounding-level miss of the light cone is still null
    assert causal_class([1, 1 + 1e-15, 0, 0]) == NULL
    out = causal_class(np.array([[1, 0, 0, 0], [0, 0, 1, 0]]))
    assert list(out) == [TIMELIKE, SPACELIKE]


@given(st.tuples(components, components, components, components), st.integers(0, 2**32 - 1))
def test_causal_class_rotation_invariant(v, seed):
    v = np.array(v)
    R = Rotation.random(random_state=seed).as_matrix()
    w = v.copy()
    w[1:] = R @ v[1:]
    interval = minkowski_dot(v, v)
    band = 1e-12 * np.sum(v * v)
    # away from the band edge the class cannot change under rotation
    if abs(abs(interval) - band) <= 1e-9 * max(np.sum(v * v), 1e-300):
        return
    assert causal_class(w) == causal_class(v)


def test_box_basics():
    box = SpacetimeBox(2.0, 3.0, FourVector(1.0, -1.0, 0.0, 0.5))
    assert box.volume == 8.0
    assert box.four_volume == 24.0
    assert (box.t_start, box.t_end) == (1.0, 4.0)
    np.testing.assert_array_equal(box.extent, [3, 2, 2, 2])
    assert box.contains_time(1.0) and box.contains_time(4.0) and not box.contains_time(4.0001)
    w = box.wrap([5.0, 1.5, -0.5, 7.0])
    np.testing.assert_allclose(w, [5.0, -0.5, 1.5, 1.0])
    np.testing.assert_array_equal(box.hypersurface_element(), [8, 0, 0, 0])
    for L, T in ((0, 1), (1, -1), (np.inf, 1)):
        with pytest.raises(ValueError):
            SpacetimeBox(L, T)


@settings(max_examples=50)
@given(st.lists(components, min_size=4, max_size=4))
def test_wrap_is_periodic_and_idempotent(p):
    w = BOX.wrap(p)
    assert np.all((w[1:] >= 0) & (w[1:] < BOX.L))
    np.testing.assert_allclose(BOX.wrap(w), w, atol=1e-12)
    d = (np.array(p[1:]) - w[1:]) / BOX.L
    np.testing.assert_allclose(d, np.round(d), atol=1e-9)
