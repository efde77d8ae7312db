"""Backend selection for the hot loops.

The compiled extension is used when importable; set ``SPDDDPM_PURE_PYTHON=1``
to force the NumPy fallback.
"""
import os

import numpy as np

from . import _pykernels
from ._pykernels import CLAMP, EXP, LOG, POW  # noqa: F401

_pure = os.environ.get("SPDDDPM_PURE_PYTHON", "").strip() not in ("", "0")

if _pure:
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"


def mh_spectral(r0, inv_two_s2, step, normals, uniforms):
    """Run independent random-walk Metropolis chains on log-eigenvalues.

    Parameters
    ----------
    r0 : ndarray, shape (n_chains, m)
        Starting points; must have pairwise-distinct coordinates.
    inv_two_s2 : float
        ``1 / (2 sigma**2)``.
    step : float
        Proposal standard deviation.
    normals : ndarray, shape (n_steps, n_chains, m)
    uniforms : ndarray, shape (n_steps, n_chains)
        Pre-drawn randomness, so both backends replay identically.

    Returns
    -------
    r : ndarray, shape (n_chains, m)
    accepted : ndarray of int, shape (n_chains,)
    """
    return _impl.mh_spectral(
        np.ascontiguousarray(r0, dtype=float),
        float(inv_two_s2),
        float(step),
        np.ascontiguousarray(normals, dtype=float),
        np.ascontiguousarray(uniforms, dtype=float),
    )


def loewner(w, kind, param=0.0, floor=0.0):
    """Divided-difference matrices of a scalar function for each row of ``w``.

    ``w`` has shape ``(B, d)``; the result has shape ``(B, d, d)``.
    """
    w = np.ascontiguousarray(w, dtype=float)
    return _impl.loewner(w, int(kind), float(param), float(floor))


def get_backend(name):
    """Return the kernel module for ``"python"`` or ``"cython"``."""
    if name == "python":
        return _pykernels
    from . import _ckernels

    return _ckernels
