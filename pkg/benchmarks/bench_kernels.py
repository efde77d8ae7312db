"""Time the compiled kernels against the NumPy fallback.

Run with ``python benchmarks/bench_kernels.py``. Both backends get identical
pre-drawn randomness, so their outputs are compared as well as timed.
"""
import argparse
import time

import numpy as np

from spdddpm import kernels
from spdddpm._pykernels import CLAMP, EXP, LOG, POW


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_mh(backend, rng, n_chains, m, n_steps):
    r0 = np.sort(rng.normal(size=(n_chains, m)), axis=1)
    normals = rng.normal(size=(n_steps, n_chains, m))
    uniforms = rng.random((n_steps, n_chains))
    return lambda: backend.mh_spectral(r0, 0.5, 0.5, normals, uniforms)


def bench_loewner(backend, rng, batch, d, kind, param, floor):
    w = np.sort(rng.uniform(0.2, 3.0, size=(batch, d)), axis=1)
    return lambda: backend.loewner(w, kind, param, floor)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    py = kernels.get_backend("python")
    try:
        cy = kernels.get_backend("cython")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return
    cases = [
        ("mh_spectral 2000 chains m=2 400 steps", lambda b: bench_mh(b, np.random.default_rng(0), 2000, 2, 400)),
        ("mh_spectral 2000 chains m=3 400 steps", lambda b: bench_mh(b, np.random.default_rng(0), 2000, 3, 400)),
        ("loewner log B=150 d=3", lambda b: bench_loewner(b, np.random.default_rng(1), 150, 3, LOG, 0.0, 0.0)),
        ("loewner clamp B=150 d=10", lambda b: bench_loewner(b, np.random.default_rng(1), 150, 10, CLAMP, 0.0, 1.0)),
        ("loewner pow B=2000 d=10", lambda b: bench_loewner(b, np.random.default_rng(1), 2000, 10, POW, 0.5, 0.0)),
        ("loewner exp B=2000 d=10", lambda b: bench_loewner(b, np.random.default_rng(1), 2000, 10, EXP, 0.0, 0.0)),
    ]
    print(f"{'case':40s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s} {'max diff':>9s}")
    for name, make in cases:
        tp, op = best_of(make(py), args.repeat)
        tc, oc = best_of(make(cy), args.repeat)
        op = op if isinstance(op, tuple) else (op,)
        oc = oc if isinstance(oc, tuple) else (oc,)
        diff = max(float(np.max(np.abs(np.asarray(a, float) - np.asarray(b, float)))) for a, b in zip(op, oc))
        print(f"{name:40s} {1e3 * tp:10.2f} {1e3 * tc:10.2f} {tp / tc:8.1f} {diff:9.1e}")


if __name__ == "__main__":
    main()
