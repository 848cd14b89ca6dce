import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from nematic_gamma import qtensor as qt

finite = st.floats(-5, 5, allow_nan=False)


@given(arrays(float, 5, elements=finite))
def test_component_round_trip(q):
    Q = qt.from_components(q)
    assert np.allclose(Q, Q.T)
    assert abs(np.trace(Q)) < 1e-12
    assert np.allclose(qt.to_components(Q), q)
    assert np.isclose(qt.norm2_components(q), qt.frob(Q))


@settings(max_examples=60)
@given(st.floats(0.1, 3), st.floats(0.05, 0.95), st.integers(0, 2**31))
def test_decompose_compose(s, r, seed):
    R = qt.random_rotation(np.random.default_rng(seed))
    n, m = R[:, 0], R[:, 1]
    Q = qt.compose(s, r, n, m)
    d = qt.decompose(Q)
    assert np.isclose(d.s, s) and np.isclose(d.r, r)
    assert np.allclose(qt.compose(d.s, d.r, d.n, d.m), Q, atol=1e-10)


def test_uniaxial_is_traceless_with_top_eigenvalue(rng):
    n = rng.standard_normal(3)
    n /= np.linalg.norm(n)
    Q = qt.uniaxial(n, 1.5)
    lam = qt.eigenvalues(Q)
    assert np.allclose(lam, [1.0, -0.5, -0.5])
    assert np.allclose(qt.leading_eigenvector(Q) * np.sign(qt.leading_eigenvector(Q) @ n), n)


def test_retract_and_distance(rng):
    n = np.array([0.0, 0.6, 0.8])
    P = qt.uniaxial(n, 1.5)
    E = qt.sym0(1e-3 * rng.standard_normal((3, 3)))
    assert qt.dist_to_N(P, 1.5) < 1e-7
    R = qt.retract_to_N(P + E, 1.5)
    assert qt.dist_to_N(R, 1.5) < 1e-7
    assert np.sqrt(qt.frob(R - P - E)) <= np.sqrt(qt.frob(E)) + 1e-12


def test_oriented_n3_follows_reference():
    Q = qt.uniaxial(np.array([0.0, 0.6, 0.8]), 1.5)
    assert np.isclose(qt.oriented_n3(Q, np.array([0, 0, 1.0])), 0.8)
    assert np.isclose(qt.oriented_n3(Q, np.array([0, 0, -1.0])), -0.8)


def test_rotation_to_e3_horizontal(rng):
    t = rng.uniform(0, 2 * np.pi)
    n = np.array([np.cos(t), np.sin(t), 0.0])
    R = qt.rotation_to_e3(n)
    assert np.allclose(R @ n, qt.E3)
    assert np.allclose(R @ R.T, np.eye(3))


def test_cone_gap():
    assert np.isclose(qt.cone_gap(qt.uniaxial(np.array([1.0, 0, 0]), 1.2)), 1.2)
    # oblate: top two eigenvalues coincide
    assert qt.cone_gap(qt.uniaxial(np.array([1.0, 0, 0]), -1.2)) < 1e-12
    with pytest.raises(qt.ConeDegeneracy):
        qt.retract_to_N(qt.uniaxial(np.array([0, 0, 1.0]), -1.0), 1.5)
