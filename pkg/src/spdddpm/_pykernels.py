"""NumPy implementations of the compiled kernels in ``_ckernels.pyx``.

Vectorized across chains / batch entries; the loop over MH steps stays in
Python.
"""
import numpy as np

LOG2 = np.log(2.0)
DEGENERATE_GAP = 1e-9

CLAMP, LOG, POW, EXP = 0, 1, 2, 3


def _log_sinh(x):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = x + np.log(-np.expm1(-2.0 * x)) - LOG2
    return np.where(x > 0.0, out, -1e300)


def log_target(r, inv_two_s2):
    """Unnormalized log density of log-eigenvalues ``r`` (shape ``(n, m)``)."""
    acc = -np.sum(r * r, axis=-1) * inv_two_s2
    m = r.shape[-1]
    for i in range(m):
        for j in range(i + 1, m):
            acc = acc + _log_sinh(0.5 * np.abs(r[..., i] - r[..., j]))
    return acc


def mh_spectral(r0, inv_two_s2, step, normals, uniforms):
    r = np.array(r0, dtype=float, copy=True)
    accepted = np.zeros(r.shape[0], dtype=np.int64)
    cur = log_target(r, inv_two_s2)
    log_u = np.log(uniforms)
    for s in range(normals.shape[0]):
        prop = r + step * normals[s]
        new = log_target(prop, inv_two_s2)
        ok = log_u[s] < new - cur
        r[ok] = prop[ok]
        cur = np.where(ok, new, cur)
        accepted += ok
    return r, accepted


def _f(x, kind, param, floor):
    if kind == CLAMP:
        return np.maximum(x, floor)
    if kind == LOG:
        return np.log(x)
    if kind == POW:
        return x ** param
    return np.exp(x)


def _df(x, kind, param, floor):
    if kind == CLAMP:
        return (x > floor).astype(float)
    if kind == LOG:
        return 1.0 / x
    if kind == POW:
        return param * x ** (param - 1.0)
    return np.exp(x)


def loewner(w, kind, param, floor):
    w = np.asarray(w, dtype=float)
    fw = _f(w, kind, param, floor)
    gap = w[..., :, None] - w[..., None, :]
    degenerate = np.abs(gap) < DEGENERATE_GAP
    with np.errstate(divide="ignore", invalid="ignore"):
        dd = (fw[..., :, None] - fw[..., None, :]) / gap
    mid = _df(0.5 * (w[..., :, None] + w[..., None, :]), kind, param, floor)
    L = np.where(degenerate, mid, dd)
    d = w.shape[-1]
    idx = np.arange(d)
    L[..., idx, idx] = _df(w, kind, param, floor)
    return L
