import numpy as np
import pytest

from spdddpm import spd
from spdddpm.errors import (
    ConvergenceFailure,
    DimensionMismatch,
    NotPositiveDefinite,
    NotSymmetricWithinTolerance,
    SingularAction,
)


def test_validate_spd_symmetrizes_and_freezes():
    X = np.array([[2.0, 1.0 + 1e-12], [1.0, 3.0]])
    V = spd.validate_spd(X)
    assert np.array_equal(V, V.T)
    assert not V.flags.writeable


def test_validate_spd_rejects_asymmetric():
    with pytest.raises(NotSymmetricWithinTolerance):
        spd.validate_spd(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_validate_spd_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite) as info:
        spd.validate_spd(np.diag([1.0, -1e-3]))
    assert info.value.eigenvalue == pytest.approx(-1e-3)


def test_validate_spd_rejects_non_finite():
    with pytest.raises(ValueError):
        spd.validate_spd(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_mat_log_exp_roundtrip(rng):
    X = spd.random_spd(4, rng, size=10)
    np.testing.assert_allclose(spd.mat_exp(spd.mat_log(X)), X, rtol=1e-12, atol=1e-12)


def test_mat_log_of_diagonal():
    np.testing.assert_allclose(spd.mat_log(np.diag([1.0, np.e, np.e**2])), np.diag([0.0, 1.0, 2.0]), atol=1e-15)


def test_mat_pow_per_matrix_exponent(rng):
    X = spd.random_spd(3, rng, size=4)
    a = np.array([0.5, -1.0, 2.0, 0.0])
    P = spd.mat_pow(X, a)
    np.testing.assert_allclose(P[1], np.linalg.inv(X[1]), rtol=1e-10)
    np.testing.assert_allclose(P[2], X[2] @ X[2], rtol=1e-10)
    np.testing.assert_allclose(P[3], np.eye(3), atol=1e-14)
    np.testing.assert_allclose(P[0] @ P[0], X[0], rtol=1e-10)


def test_oplus_commuting_is_product():
    X, Y = np.diag([2.0, 3.0]), np.diag([5.0, 0.5])
    np.testing.assert_allclose(spd.oplus(X, Y), X @ Y, rtol=1e-14)
    np.testing.assert_allclose(spd.ominus(X, Y), X @ np.linalg.inv(Y), rtol=1e-14)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        spd.oplus(np.eye(2), np.eye(3))


def test_group_action_singular():
    with pytest.raises(SingularAction):
        spd.group_action(np.eye(2), np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_group_action_value():
    A = np.array([[1.0, 2.0], [0.0, 1.0]])
    np.testing.assert_allclose(spd.group_action(np.eye(2), A), A.T @ A)


def test_dist_affine_commuting_closed_form():
    X, Y = np.diag([1.0, 4.0]), np.diag([2.0, 1.0])
    expected = np.hypot(np.log(2.0), np.log(4.0))
    assert spd.dist_affine(X, Y) == pytest.approx(expected, rel=1e-14)


def test_dist_affine_symmetric_and_zero(rng):
    X, Y = spd.random_spd(3, rng, size=2)
    assert spd.dist_affine(X, Y) == pytest.approx(spd.dist_affine(Y, X), rel=1e-12)
    assert spd.dist_affine(X, X) == pytest.approx(0.0, abs=1e-12)


def test_dist_affine_triangle(rng):
    X, Y, Z = spd.random_spd(3, rng, size=3)
    assert spd.dist_affine(X, Z) <= spd.dist_affine(X, Y) + spd.dist_affine(Y, Z) + 1e-12


def test_dist_frobenius():
    assert spd.dist_frobenius(np.eye(2), 2 * np.eye(2)) == pytest.approx(np.sqrt(2))


def test_volume_density():
    X = np.diag([2.0, 3.0])
    assert spd.volume_density(X) == pytest.approx(6.0 ** -1.5)


def test_eig_reconstructs(rng):
    X = spd.random_spd(5, rng)
    dec = spd.eig(X)
    np.testing.assert_allclose(dec.reconstruct(), X, atol=1e-13)
    assert np.all(np.diff(dec.eigenvalues) >= 0)


def test_eig_failure_maps_to_convergence_failure(monkeypatch):
    def boom(_):
        raise np.linalg.LinAlgError("no convergence")

    monkeypatch.setattr(np.linalg, "eigh", boom)
    with pytest.raises(ConvergenceFailure):
        spd.eig(np.eye(2))


def test_random_spd_eigen_range(rng):
    X = spd.random_spd(4, rng, size=50)
    w = np.linalg.eigvalsh(X)
    assert w.min() >= 0.5 - 1e-12 and w.max() <= 2.0 + 1e-12
