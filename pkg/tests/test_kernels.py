"""The compiled kernels must agree with the pure-Python reference."""
import os
import subprocess
import sys

import numpy as np
import pytest

from relpov import _backend, _kernels_py as py

ck = pytest.importorskip("relpov._ckernels")


def test_backend_prefers_compiled_module():
    if os.environ.get("RELPOV_PURE_PYTHON", "") not in ("", "0"):
        pytest.skip("pure-Python backend forced by the environment")
    assert _backend.BACKEND == "cython"


def test_env_var_forces_python_backend():
    env = dict(os.environ, RELPOV_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import relpov; print(relpov.BACKEND)"],
        env=env, check=True, capture_output=True, text=True,
    )
    assert out.stdout.strip() == "python"


@pytest.fixture
def sorted_values(rng):
    return np.sort(rng.lognormal(size=500))


@pytest.mark.parametrize("u,b", [(0.5, 0.3), (0.5, 0.05), (0.1, 0.1), (0.93, 0.02), (0.5, 1e-3)])
def test_qdensity_matches(sorted_values, u, b):
    assert ck.qdensity(sorted_values, u, b) == pytest.approx(py.qdensity(sorted_values, u, b),
                                                             rel=1e-12, abs=1e-12)


def test_bootstrap_headcounts_identical(sorted_values, rng):
    idx = rng.integers(0, sorted_values.size, size=(40, sorted_values.size))
    a = ck.bootstrap_headcounts(sorted_values, idx, 0.5)
    b = py.bootstrap_headcounts(sorted_values, idx, 0.5)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("alpha,beta", [(0.2, 0.4), (-0.3, 0.7), (0.0, 0.0), (1.2, -0.4), (1e-9, 0.5)])
def test_gld_quantile_and_cdf_match(alpha, beta):
    u = np.linspace(0.001, 0.999, 57)
    qa = ck.gld_quantile(u, 1.0, 2.0, alpha, beta)
    qb = py.gld_quantile(u, 1.0, 2.0, alpha, beta)
    np.testing.assert_allclose(qa, qb, rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(ck.gld_cdf(qa, 1.0, 2.0, alpha, beta),
                               py.gld_cdf(qa, 1.0, 2.0, alpha, beta), rtol=0, atol=1e-12)


def test_profile_and_nelder_mead_match():
    u = np.arange(1, 10) / 10.0
    x = py.gld_quantile(u, 0.5, 1.5, 0.3, 0.1) + 0.01 * np.sin(np.arange(9))
    for a0, b0 in [(0.0, 0.0), (1.0, -0.5), (0.5, 1.5)]:
        pa = ck.gld_profile(a0, b0, u, x)
        pb = py.gld_profile(a0, b0, u, x)
        np.testing.assert_allclose(pa, pb, rtol=1e-12)
        na = ck.gld_nelder_mead(u, x, a0, b0)
        nb = py.gld_nelder_mead(u, x, a0, b0)
        np.testing.assert_allclose(na[:3], nb[:3], rtol=1e-9, atol=1e-12)
