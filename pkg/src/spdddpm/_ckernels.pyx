# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Must stay numerically in step with _pykernels.py."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1, fabs, log, pow

cnp.import_array()

cdef double LOG2 = 0.6931471805599453
cdef double DEGENERATE_GAP = 1e-9


cdef inline double _log_sinh(double x) noexcept nogil:
    if x <= 0.0:
        return -1e300
    return x + log(-expm1(-2.0 * x)) - LOG2


cdef double _log_target(double[:] r, Py_ssize_t m, double inv_two_s2) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i, j
    for i in range(m):
        acc -= r[i] * r[i] * inv_two_s2
    for i in range(m):
        for j in range(i + 1, m):
            acc += _log_sinh(0.5 * fabs(r[i] - r[j]))
    return acc


def mh_spectral(double[:, :] r0, double inv_two_s2, double step,
                double[:, :, :] normals, double[:, :] uniforms):
    cdef Py_ssize_t n_steps = normals.shape[0]
    cdef Py_ssize_t n = r0.shape[0]
    cdef Py_ssize_t m = r0.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.array(r0, dtype=np.float64, copy=True)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] accepted = np.zeros(n, dtype=np.int64)
    cdef double[:, :] r = out
    cdef long long[:] acc = accepted
    cdef double[:] prop = np.empty(m, dtype=np.float64)
    cdef double cur, new
    cdef Py_ssize_t c, s, k
    with nogil:
        for c in range(n):
            cur = _log_target(r[c], m, inv_two_s2)
            for s in range(n_steps):
                for k in range(m):
                    prop[k] = r[c, k] + step * normals[s, c, k]
                new = _log_target(prop, m, inv_two_s2)
                if log(uniforms[s, c]) < new - cur:
                    for k in range(m):
                        r[c, k] = prop[k]
                    cur = new
                    acc[c] += 1
    return out, accepted


cdef inline double _f(double x, int kind, double param, double floor) noexcept nogil:
    if kind == 0:
        return x if x > floor else floor
    elif kind == 1:
        return log(x)
    elif kind == 2:
        return pow(x, param)
    return exp(x)


cdef inline double _df(double x, int kind, double param, double floor) noexcept nogil:
    if kind == 0:
        return 1.0 if x > floor else 0.0
    elif kind == 1:
        return 1.0 / x
    elif kind == 2:
        return param * pow(x, param - 1.0)
    return exp(x)


def loewner(double[:, :] w, int kind, double param, double floor):
    cdef Py_ssize_t B = w.shape[0]
    cdef Py_ssize_t d = w.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] out = np.empty((B, d, d), dtype=np.float64)
    cdef double[:, :, :] L = out
    cdef double[:] fw = np.empty(d, dtype=np.float64)
    cdef Py_ssize_t b, i, j
    cdef double gap, v
    with nogil:
        for b in range(B):
            for i in range(d):
                fw[i] = _f(w[b, i], kind, param, floor)
            for i in range(d):
                L[b, i, i] = _df(w[b, i], kind, param, floor)
                for j in range(i + 1, d):
                    gap = w[b, i] - w[b, j]
                    if fabs(gap) < DEGENERATE_GAP:
                        v = _df(0.5 * (w[b, i] + w[b, j]), kind, param, floor)
                    else:
                        v = (fw[i] - fw[j]) / gap
                    L[b, i, j] = v
                    L[b, j, i] = v
    return out
