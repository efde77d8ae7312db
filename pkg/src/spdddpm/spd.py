"""Symmetric positive definite matrices: validation, spectral functions,
the log-Euclidean algebra at the identity and the two metrics in use.

Every routine accepts a single ``(m, m)`` matrix or a stack ``(..., m, m)``
and broadcasts over the leading axes. Matrices are plain ``ndarray``;
:func:`validate_spd` returns read-only arrays so a validated value cannot be
mutated in place.
"""
from typing import NamedTuple

import numpy as np

from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    NotPositiveDefinite,
    NotSymmetricWithinTolerance,
    SingularAction,
    SpdError,
)

SPD_FLOOR = 1e-12
ASYMMETRY_TOL = 1e-8
SINGULAR_DET = 1e-12


class SpectralDecomposition(NamedTuple):
    """Eigenvalues (ascending) and orthogonal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        return _compose(self.eigenvectors, self.eigenvalues)


def symmetrize(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _as_square(M, name="matrix"):
    a = np.asarray(M, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise SpdError(f"{name} has non-finite entries")
    return a


def _check_same_dim(X, Y):
    if X.shape[-1] != Y.shape[-1]:
        raise DimensionMismatch(
            f"dimension mismatch: {X.shape[-1]} vs {Y.shape[-1]}"
        )


def _compose(U, w):
    return symmetrize((U * w[..., None, :]) @ np.swapaxes(U, -1, -2))


def validate_spd(M, floor=SPD_FLOOR):
    """Return the symmetrized copy of ``M`` after checking it is SPD.

    Raises
    ------
    NotSymmetricWithinTolerance
        If ``||M - M'||_F / ||M||_F`` exceeds ``1e-8`` for any matrix.
    NotPositiveDefinite
        If some eigenvalue is ``<= floor``; the offending value is attached.
    """
    a = _as_square(M)
    scale = np.linalg.norm(a, axis=(-2, -1))
    asym = np.linalg.norm(a - np.swapaxes(a, -1, -2), axis=(-2, -1))
    if np.any(asym > ASYMMETRY_TOL * np.maximum(scale, np.finfo(float).tiny)):
        raise NotSymmetricWithinTolerance(
            f"relative asymmetry {np.max(asym / np.maximum(scale, 1e-300)):.3g}"
            f" exceeds {ASYMMETRY_TOL}"
        )
    s = symmetrize(a)
    lam_min = np.min(eigvalsh(s))
    if not lam_min > floor:
        raise NotPositiveDefinite(lam_min, floor)
    s.setflags(write=False)
    return s


def is_spd(M, floor=SPD_FLOOR):
    try:
        validate_spd(M, floor)
    except SpdError:
        return False
    return True


def eigvalsh(S):
    try:
        return np.linalg.eigvalsh(S)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc


def eig(S):
    """Spectral decomposition of a symmetric matrix (LAPACK ``syevd``)."""
    a = symmetrize(_as_square(S))
    try:
        w, U = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return SpectralDecomposition(w, U)


def spectral_apply(S, fn):
    """``U fn(w) U'`` for the eigendecomposition of symmetric ``S``."""
    w, U = eig(S)
    return _compose(U, fn(w))


def mat_log(X):
    return spectral_apply(X, np.log)


def mat_exp(S):
    return spectral_apply(S, np.exp)


def mat_pow(X, a):
    """``X**a``. ``a`` is a scalar or an array matching the batch shape of ``X``."""
    a = np.asarray(a, dtype=float)
    if a.ndim:
        a = a[..., None]
    return spectral_apply(X, lambda w: w ** a)


def mat_sqrt(X):
    return spectral_apply(X, np.sqrt)


def mat_invsqrt(X):
    return spectral_apply(X, lambda w: 1.0 / np.sqrt(w))


def oplus(X, Y):
    """``exp(log X + log Y)``."""
    X, Y = np.asarray(X, float), np.asarray(Y, float)
    _check_same_dim(X, Y)
    return mat_exp(mat_log(X) + mat_log(Y))


def ominus(X, Y):
    """``exp(log X - log Y)``."""
    X, Y = np.asarray(X, float), np.asarray(Y, float)
    _check_same_dim(X, Y)
    return mat_exp(mat_log(X) - mat_log(Y))


def odot(a, X):
    """Scalar multiplication ``exp(a log X) = X**a``."""
    return mat_pow(X, a)


def group_action(X, A):
    """Congruence ``A' X A``; an isometry of the affine-invariant metric."""
    X = np.asarray(X, float)
    A = _as_square(A, "A")
    _check_same_dim(X, A)
    if np.any(np.abs(np.linalg.det(A)) <= SINGULAR_DET):
        raise SingularAction("group action requires |det A| > 1e-12")
    return validate_spd(np.swapaxes(A, -1, -2) @ X @ A)


def dist_affine(X, Y):
    """Affine-invariant distance ``||log(X^-1/2 Y X^-1/2)||_F``."""
    X, Y = np.asarray(X, float), np.asarray(Y, float)
    _check_same_dim(X, Y)
    Xi = mat_invsqrt(X)
    w = eigvalsh(symmetrize(Xi @ Y @ Xi))
    return np.sqrt(np.sum(np.log(w) ** 2, axis=-1))


def dist_frobenius(X, Y):
    X, Y = np.asarray(X, float), np.asarray(Y, float)
    _check_same_dim(X, Y)
    return np.sqrt(np.sum((X - Y) ** 2, axis=(-2, -1)))


def volume_density(X):
    """Riemannian volume density ``det(X)^(-(m+1)/2)`` w.r.t. Lebesgue
    measure on the upper-triangular entries."""
    X = np.asarray(X, float)
    m = X.shape[-1]
    return np.exp(-0.5 * (m + 1) * np.sum(np.log(eigvalsh(X)), axis=-1))


def random_spd(m, rng, log_low=np.log(0.5), log_high=np.log(2.0), size=None):
    """Random SPD matrix with Haar eigenvectors and log-uniform spectrum."""
    from .prob import haar_orthogonal

    shape = () if size is None else (size,)
    O = haar_orthogonal(m, rng, size=size)
    w = np.exp(rng.uniform(log_low, log_high, size=shape + (m,)))
    return validate_spd(_compose(O, w))
