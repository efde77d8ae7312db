"""Riemannian Gaussian distribution on SPD matrices and the Karcher mean.

The density ``exp(-d(X, M)^2 / 2 sigma^2)`` is taken w.r.t. the Riemannian
volume ``dv(X) = det(X)^(-(m+1)/2) prod_{i<=j} dX_ij``. Writing
``X = O diag(exp(r)) O'`` with ``O`` orthogonal, the volume factorizes as::

    dv(X) = c_m * prod_{i<j} sinh(|r_i - r_j| / 2) dr dO

with ``dO`` the normalized Haar measure and ``c_m`` given by
:func:`spectral_constant`. Sampling therefore draws ``r`` from the spectral
density by Metropolis-Hastings, rotates by a Haar matrix, and translates to
a general mean by congruence with ``M^(1/2)``.
"""
import functools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import gammaln

from . import kernels
from .errors import DimensionMismatch, EmptySampleSet, NonConvergence, UnsupportedDimension
from .spd import (
    _compose,
    dist_affine,
    eig,
    mat_exp,
    mat_invsqrt,
    mat_log,
    mat_sqrt,
    symmetrize,
    validate_spd,
)


@dataclass(frozen=True)
class EigenSamplerConfig:
    """Metropolis-Hastings settings for the spectral sampler.

    ``proposal_std`` is relative to sigma (the proposal scale is
    ``proposal_std * sigma``). ``burn_in`` and ``thinning`` only affect
    :func:`sample_standard_chain`; independent draws run ``mh_steps`` steps
    each.
    """

    mh_steps: int = 400
    proposal_std: float = 0.5
    burn_in: int = 200
    thinning: int = 5

    def __post_init__(self):
        if self.mh_steps < 1 or self.burn_in < 0 or self.thinning < 1:
            raise ValueError("mh_steps and thinning must be >= 1, burn_in >= 0")
        if not self.proposal_std > 0:
            raise ValueError("proposal_std must be positive")


@dataclass(frozen=True)
class FrechetConfig:
    max_iters: int = 200
    step: float = 1.0
    tol: float = 1e-8

    def __post_init__(self):
        if self.max_iters < 1 or not (0 < self.step <= 1) or not self.tol > 0:
            raise ValueError("invalid FrechetConfig")


@dataclass(frozen=True)
class RiemannianGaussian:
    mean: np.ndarray
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "mean", validate_spd(self.mean))

    @property
    def dim(self):
        return self.mean.shape[-1]

    def log_density_unnormalized(self, X):
        return log_density_unnormalized(self, X)

    def sample(self, rng, cfg=None, size=None, method="mh"):
        return sample(self, rng, cfg, size=size, method=method)


def log_density_unnormalized(g, X):
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != g.dim:
        raise DimensionMismatch(f"expected dim {g.dim}, got {X.shape[-1]}")
    return -dist_affine(X, g.mean) ** 2 / (2.0 * g.sigma**2)


# ---------------------------------------------------------------------------
# Spectral density and quadrature

def orthogonal_group_volume(m):
    """Volume of O(m) for the metric ``<A, B> = tr(A'B)/2`` on skew matrices."""
    log_vol = math.log(2.0) + sum(
        math.log(2.0) + 0.5 * k * math.log(math.pi) - gammaln(0.5 * k)
        for k in range(2, m + 1)
    )
    return math.exp(log_vol)


def spectral_constant(m):
    """``c_m`` such that ``int f dv = c_m int_{R^m} f(r) prod sinh(|r_i-r_j|/2) dr``
    for rotation-invariant ``f``. ``c_1 = 1``, ``c_2 = pi``, ``c_3 = 8 pi^2 / 3``."""
    return orthogonal_group_volume(m) * 2.0 ** (m * (m - 1) / 2) / (
        2.0**m * math.factorial(m)
    )


def _sphere_nodes(m, n=400):
    if m == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if m == 2:
        phi = 2 * np.pi * (np.arange(2 * n) + 0.5) / (2 * n)
        u = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        return u, np.full(2 * n, 2 * np.pi / (2 * n))
    if m == 3:
        z, wz = np.polynomial.legendre.leggauss(n // 2)
        phi = 2 * np.pi * (np.arange(n) + 0.5) / n
        Z, P = np.meshgrid(z, phi, indexing="ij")
        s = np.sqrt(1 - Z**2)
        u = np.stack([s * np.cos(P), s * np.sin(P), Z], axis=-1).reshape(-1, 3)
        w = (wz[:, None] * np.full(n, 2 * np.pi / n)[None, :]).ravel()
        return u, w
    raise UnsupportedDimension(f"spectral quadrature supports m <= 3, got {m}")


@functools.lru_cache(maxsize=64)
def _radial_grid(sigma, m, n_rho=4001):
    rmax = 10.0 * sigma + sigma**2 * (m - 1)
    rho = np.linspace(0.0, rmax, n_rho)
    u, w = _sphere_nodes(m, 400 if m == 2 else 160)
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    if pairs:
        gap = np.stack([np.abs(u[:, i] - u[:, j]) for i, j in pairs], axis=-1)
        sphere = np.empty(n_rho)
        for lo in range(0, n_rho, 256):
            arg = 0.5 * rho[lo:lo + 256, None, None] * gap[None]
            sphere[lo:lo + 256] = np.sum(w * np.prod(np.sinh(arg), axis=-1), axis=-1)
    else:
        sphere = np.full(n_rho, w.sum())
    dens = rho ** (m - 1) * np.exp(-(rho**2) / (2 * sigma**2)) * sphere
    rho.setflags(write=False)
    dens.setflags(write=False)
    return rho, dens


def radial_density(sigma, m):
    """Grid ``(rho, p(rho))`` of the normalized density of ``d(X, I)`` for
    ``X ~ G(I, sigma^2)``, computed by quadrature."""
    rho, dens = _radial_grid(float(sigma), m)
    return rho, dens / np.trapezoid(dens, rho)


def normalizer_zeta(sigma, m, include_group_volume=True):
    """Normalizing constant of ``G(M, sigma^2)`` (independent of ``M``).

    Radial quadrature of ``int exp(-|r|^2/2s^2) prod_{i<j} sinh(|r_i-r_j|/2) dr``.
    With ``include_group_volume`` the spectral constant ``c_m`` is applied so
    the value is the integral against ``dv``; ``m = 1`` gives
    ``sqrt(2 pi) sigma``.
    """
    if m not in (1, 2, 3):
        raise UnsupportedDimension(f"normalizer_zeta supports m <= 3, got {m}")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    rho, dens = _radial_grid(float(sigma), m)
    val = np.trapezoid(dens, rho)
    return val * spectral_constant(m) if include_group_volume else val


def distance_quantiles(sigma, m, q):
    """Quantiles of ``d(X, I)`` under ``G(I, sigma^2)`` by quadrature."""
    rho, dens = _radial_grid(float(sigma), m)
    cdf = cumulative_trapezoid(dens, rho, initial=0.0)
    cdf /= cdf[-1]
    return np.interp(q, cdf, rho)


def distance_moment(sigma, m, power=2):
    """``E d(X, I)^power`` under ``G(I, sigma^2)`` by quadrature."""
    rho, dens = _radial_grid(float(sigma), m)
    return np.trapezoid(rho**power * dens, rho) / np.trapezoid(dens, rho)


# ---------------------------------------------------------------------------
# Sampling

def haar_orthogonal(m, rng, size=None):
    """Haar-distributed orthogonal matrix via sign-corrected QR."""
    shape = (m, m) if size is None else (size, m, m)
    Z = rng.standard_normal(shape)
    Q, R = np.linalg.qr(Z)
    d = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    d[d == 0] = 1.0
    return Q * d[..., None, :]


def _tangent_log_eigs(sigma, m, n, rng):
    # eigenvalues of a symmetric S with density prop. to exp(-||S||_F^2 / 2 sigma^2)
    A = rng.standard_normal((n, m, m)) * sigma
    S = (A + np.swapaxes(A, -1, -2)) / 2.0
    return np.linalg.eigvalsh(S)


def sample_log_eigs(sigma, m, n, cfg, rng):
    """Independent draws of log-eigenvalues, shape ``(n, m)``."""
    r0 = _tangent_log_eigs(sigma, m, n, rng)
    if m == 1:
        return r0
    normals = rng.standard_normal((cfg.mh_steps, n, m))
    uniforms = rng.random((cfg.mh_steps, n))
    r, _ = kernels.mh_spectral(
        r0, 1.0 / (2 * sigma**2), cfg.proposal_std * sigma, normals, uniforms
    )
    return r


def sample_standard(sigma, m, cfg=None, rng=None, size=None, method="mh"):
    """Draw from ``G(I, sigma^2)``.

    ``method="mh"`` is exact up to MCMC mixing; ``method="tangent"`` draws a
    Gaussian symmetric matrix in log coordinates, which ignores the sinh
    volume factor and is only approximate for ``m > 1``.
    """
    cfg = cfg or EigenSamplerConfig()
    rng = np.random.default_rng() if rng is None else rng
    n = 1 if size is None else size
    if method == "mh":
        r = sample_log_eigs(sigma, m, n, cfg, rng)
    elif method == "tangent":
        r = _tangent_log_eigs(sigma, m, n, rng)
    else:
        raise ValueError(f"unknown method {method!r}")
    O = haar_orthogonal(m, rng, size=n)
    X = validate_spd(_compose(O, np.exp(r)))
    return X[0] if size is None else X


def sample_standard_chain(sigma, m, n, cfg=None, rng=None):
    """``n`` correlated draws from one chain after ``burn_in``, keeping every
    ``thinning``-th state."""
    cfg = cfg or EigenSamplerConfig()
    rng = np.random.default_rng() if rng is None else rng
    r = _tangent_log_eigs(sigma, m, 1, rng)
    step = cfg.proposal_std * sigma
    inv = 1.0 / (2 * sigma**2)

    def advance(r, k):
        if k == 0:
            return r
        normals = rng.standard_normal((k, 1, m))
        return kernels.mh_spectral(r, inv, step, normals, rng.random((k, 1)))[0]

    r = advance(r, cfg.burn_in)
    out = np.empty((n, m))
    for i in range(n):
        r = advance(r, cfg.thinning)
        out[i] = r[0]
    O = haar_orthogonal(m, rng, size=n)
    return validate_spd(_compose(O, np.exp(out)))


def sample(g, rng=None, cfg=None, size=None, method="mh"):
    """Draw from ``G(M, sigma^2)`` as ``M^(1/2) eps M^(1/2)``, ``eps ~ G(I, sigma^2)``."""
    eps = sample_standard(g.sigma, g.dim, cfg, rng, size=size, method=method)
    root = mat_sqrt(g.mean)
    return validate_spd(root @ eps @ root)


# ---------------------------------------------------------------------------
# Karcher mean

@dataclass
class FrechetResult:
    mean: np.ndarray
    converged: bool
    n_iter: int
    grad_norm: float
    objective: list = field(default_factory=list)


def frechet_objective(X, samples):
    return float(np.mean(dist_affine(X, samples) ** 2))


def _tangent_mean(X, samples):
    Xi = mat_invsqrt(X)
    w, U = eig(symmetrize(Xi @ samples @ Xi))
    return np.mean(_compose(U, np.log(w)), axis=0)


def frechet_mean(samples, cfg=None):
    """Minimizer of ``(1/N) sum d(X, X_n)^2`` by Karcher fixed-point descent.

    Starts from the log-Euclidean mean. A step that raises the objective is
    retried with half the step size; accepted steps grow back toward
    ``cfg.step``. Emits :class:`NonConvergence` and
    returns the best iterate if ``max_iters`` is hit.
    """
    cfg = cfg or FrechetConfig()
    S = np.asarray(samples, dtype=float)
    if S.ndim == 2:
        S = S[None]
    if S.shape[0] == 0:
        raise EmptySampleSet("frechet_mean needs at least one sample")
    if S.ndim != 3 or S.shape[-1] != S.shape[-2]:
        raise DimensionMismatch(f"samples must have shape (N, m, m), got {S.shape}")
    S = validate_spd(S)
    if S.shape[0] == 1:
        return FrechetResult(np.array(S[0]), True, 0, 0.0, [0.0])

    X = mat_exp(np.mean(mat_log(S), axis=0))
    obj = frechet_objective(X, S)
    trace = [obj]
    step = cfg.step
    grad = _tangent_mean(X, S)
    gnorm = float(np.linalg.norm(grad))
    it = 0
    while it < cfg.max_iters and gnorm >= cfg.tol:
        it += 1
        root = mat_sqrt(X)
        w, U = eig(grad * step)
        cand = symmetrize(root @ _compose(U, np.exp(w)) @ root)
        cand_obj = frechet_objective(cand, S)
        # objective changes below roundoff are not treated as increases
        if cand_obj > obj + 1e-13 * max(obj, 1.0) and step > 1e-8:
            step *= 0.5
            continue
        X, obj = cand, cand_obj
        step = min(cfg.step, 2.0 * step)
        trace.append(obj)
        grad = _tangent_mean(X, S)
        gnorm = float(np.linalg.norm(grad))
    converged = gnorm < cfg.tol
    if not converged:
        warnings.warn(
            f"Karcher mean stopped after {it} iterations, gradient norm {gnorm:.3g}",
            NonConvergence,
            stacklevel=2,
        )
    return FrechetResult(validate_spd(X), converged, it, gnorm, trace)
