"""Forward and backward rules for the matrix layers.

All functions take stacks of matrices ``(B, d, d)``. Backward rules receive
the upstream gradient ``G`` of a scalar loss w.r.t. the layer output and
return gradients w.r.t. the inputs. Spectral functions are differentiated
with the Loewner (divided-difference) matrix::

    dF = U (L o (U' dX U)) U',   L_ij = (f(l_i) - f(l_j)) / (l_i - l_j)

where ``L_ii = f'(l_i)`` and near-equal eigenvalues use ``f'`` at the midpoint.
"""
import numpy as np

from .. import kernels
from ..errors import ConvergenceFailure, ShapeMismatch
from ..spd import symmetrize

REEIG_FLOOR = 1e-4


def _T(a):
    return np.swapaxes(a, -1, -2)


def _eigh(X):
    try:
        return np.linalg.eigh(symmetrize(X))
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc


def bimap_forward(W, X):
    """``W X W'``; ``W`` is ``(o, i)`` or a per-sample stack ``(B, o, i)``."""
    if W.shape[-1] != X.shape[-1]:
        raise ShapeMismatch(f"W has {W.shape[-1]} columns, X is {X.shape[-1]}x{X.shape[-1]}")
    return W @ X @ _T(W)


def bimap_backward(W, X, G):
    """Returns ``(grad_W, grad_X)``. For symmetric ``G`` this is
    ``grad_W = 2 G W X`` and ``grad_X = W' G W``."""
    gX = _T(W) @ G @ W
    gW = (G + _T(G)) @ W @ X
    if W.ndim == 2 and gW.ndim == 3:
        gW = gW.sum(axis=0)
    return gW, gX


def spectral_forward(X, kind, param=0.0, floor=REEIG_FLOOR):
    """Apply a scalar function to the spectrum. Returns ``(Y, (w, U))``."""
    w, U = _eigh(X)
    fw = kernels._pykernels._f(w, kind, param, floor)
    return symmetrize((U * fw[..., None, :]) @ _T(U)), (w, U)


def spectral_backward(cache, G, kind, param=0.0, floor=REEIG_FLOOR):
    w, U = cache
    batched = w.ndim == 2
    L = kernels.loewner(w if batched else w[None], kind, param, floor)
    if not batched:
        L = L[0]
    inner = _T(U) @ symmetrize(G) @ U
    return U @ (L * inner) @ _T(U)


def reeig_forward(X, floor=REEIG_FLOOR):
    return spectral_forward(X, kernels.CLAMP, 0.0, floor)


def reeig_backward(cache, G, floor=REEIG_FLOOR):
    return spectral_backward(cache, G, kernels.CLAMP, 0.0, floor)


def embed_identity(X, dim):
    """Place ``X`` in the top-left block of an identity of size ``dim``."""
    d = X.shape[-1]
    if dim < d:
        raise ShapeMismatch(f"cannot embed {d}x{d} into {dim}x{dim}")
    out = np.broadcast_to(np.eye(dim), X.shape[:-2] + (dim, dim)).copy()
    out[..., :d, :d] = X
    return out


def sinusoidal_embedding(t, width):
    """Transformer-style embedding of integer time steps, shape ``(B, width)``."""
    t = np.asarray(t, dtype=float).reshape(-1)
    half = width // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half, 1))
    arg = t[:, None] * freqs[None, :]
    emb = np.concatenate([np.sin(arg), np.cos(arg)], axis=-1)
    if width % 2:
        emb = np.concatenate([emb, np.zeros((emb.shape[0], 1))], axis=-1)
    return emb
