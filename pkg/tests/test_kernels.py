import os
import subprocess
import sys

import numpy as np
import pytest

from spdddpm import _pykernels as py
from spdddpm import kernels

try:
    from spdddpm import _ckernels as cy
except ImportError:
    cy = None

needs_ext = pytest.mark.skipif(cy is None, reason="compiled extension not built")


@needs_ext
@pytest.mark.parametrize("m", [2, 3, 5])
def test_mh_backends_agree(m):
    rng = np.random.default_rng(m)
    r0 = np.sort(rng.normal(size=(50, m)), axis=1)
    normals = rng.normal(size=(100, 50, m))
    uniforms = rng.random((100, 50))
    rp, ap = py.mh_spectral(r0, 0.7, 0.4, normals, uniforms)
    rc, ac = cy.mh_spectral(r0, 0.7, 0.4, normals, uniforms)
    np.testing.assert_allclose(rc, rp, rtol=0, atol=1e-13)
    np.testing.assert_array_equal(ac, ap)


@needs_ext
@pytest.mark.parametrize("kind,param,floor", [(py.CLAMP, 0.0, 1.0), (py.LOG, 0.0, 0.0),
                                              (py.POW, -0.7, 0.0), (py.EXP, 0.0, 0.0)])
def test_loewner_backends_agree(kind, param, floor):
    rng = np.random.default_rng(1)
    w = np.sort(rng.uniform(0.3, 3.0, size=(20, 6)), axis=1)
    w[0, 1] = w[0, 0]  # exact tie takes the degenerate branch
    np.testing.assert_allclose(cy.loewner(w, kind, param, floor), py.loewner(w, kind, param, floor),
                               rtol=1e-12, atol=1e-14)


def test_loewner_divided_differences():
    w = np.array([[1.0, 2.0]])
    L = py.loewner(w, py.LOG, 0.0, 0.0)[0]
    assert L[0, 1] == pytest.approx(np.log(2.0))
    assert L[0, 0] == pytest.approx(1.0)
    assert L[1, 1] == pytest.approx(0.5)


def test_loewner_degenerate_uses_derivative():
    w = np.array([[2.0, 2.0 + 1e-12]])
    L = py.loewner(w, py.EXP, 0.0, 0.0)[0]
    assert L[0, 1] == pytest.approx(np.exp(2.0), rel=1e-9)


def test_clamp_subgradient_zero_at_kink():
    L = py.loewner(np.array([[0.5, 1.0]]), py.CLAMP, 0.0, 1.0)[0]
    assert L[1, 1] == 0.0 and L[0, 0] == 0.0


def test_mh_rejects_everything_with_zero_uniform_threshold():
    r0 = np.array([[0.0, 1.0]])
    normals = np.ones((5, 1, 2))
    r, acc = py.mh_spectral(r0, 0.5, 0.1, normals, np.ones((5, 1)) * (1 - 1e-16))
    # proposals shift both coordinates equally, so only the Gaussian term changes
    assert acc[0] == 0
    np.testing.assert_array_equal(r, r0)


def test_backend_flag():
    assert kernels.BACKEND in ("cython", "python")


def test_pure_python_env_forces_fallback():
    env = dict(os.environ, SPDDDPM_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import spdddpm.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
