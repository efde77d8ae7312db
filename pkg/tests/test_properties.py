import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spdddpm import spd

floats = st.floats(-1.5, 1.5, allow_nan=False)
dims = st.integers(1, 5)


@st.composite
def spd_matrices(draw, m=None):
    m = draw(dims) if m is None else m
    S = draw(arrays(float, (m, m), elements=floats))
    return spd.mat_exp((S + S.T) / 2)


@st.composite
def spd_pairs(draw):
    m = draw(dims)
    return draw(spd_matrices(m)), draw(spd_matrices(m))


@settings(max_examples=60, deadline=None)
@given(spd_pairs())
def test_distance_symmetry_and_nonnegativity(pair):
    X, Y = pair
    d = spd.dist_affine(X, Y)
    assert d >= 0
    assert np.isclose(d, spd.dist_affine(Y, X), rtol=1e-9, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(spd_pairs())
def test_oplus_ominus_inverse(pair):
    X, Y = pair
    np.testing.assert_allclose(spd.ominus(spd.oplus(X, Y), Y), X, rtol=1e-9, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(spd_matrices(), st.floats(-2, 2), st.floats(-2, 2))
def test_power_law(X, a, b):
    np.testing.assert_allclose(spd.odot(a, spd.odot(b, X)), spd.odot(a * b, X), rtol=1e-9, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(spd_matrices())
def test_inverse_distance_to_identity(X):
    I = np.eye(X.shape[0])
    assert np.isclose(spd.dist_affine(np.linalg.inv(X), I), spd.dist_affine(X, I), rtol=1e-9, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(spd_pairs(), st.integers(0, 2**32 - 1))
def test_congruence_invariance(pair, seed):
    X, Y = pair
    A = np.random.default_rng(seed).standard_normal(X.shape)
    d = spd.dist_affine(X, Y)
    dA = spd.dist_affine(spd.group_action(X, A), spd.group_action(Y, A))
    assert np.isclose(dA, d, rtol=1e-7, atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(spd_matrices())
def test_validated_matrices_roundtrip_log(X):
    np.testing.assert_allclose(spd.mat_exp(spd.mat_log(X)), X, rtol=1e-10, atol=1e-12)
