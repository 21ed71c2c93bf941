import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mrtensor import _kernels
from mrtensor.svd import jacobi_svd, truncated_svd, truncation_rank

KERNELS = [pytest.param(_kernels.jacobi_sweeps_numpy, id="numpy")]
if _kernels.HAS_NUMBA:
    KERNELS.append(pytest.param(_kernels.jacobi_sweeps_numba, id="numba"))


def check_svd(A, U, s, Vt, tol=1e-12):
    k = min(A.shape)
    assert U.shape == (A.shape[0], k) and s.shape == (k,) and Vt.shape == (k, A.shape[1])
    scale = max(np.linalg.norm(A), 1.0)
    assert np.linalg.norm((U * s) @ Vt - A) <= tol * scale
    np.testing.assert_allclose(U.T @ U, np.eye(k), atol=tol * 10)
    np.testing.assert_allclose(Vt @ Vt.T, np.eye(k), atol=tol * 10)
    assert np.all(np.diff(s) <= 0) and np.all(s >= 0)


@pytest.mark.parametrize("kernel", KERNELS)
@pytest.mark.parametrize("shape", [(1, 1), (5, 3), (3, 5), (12, 12), (40, 7), (1, 9)])
def test_matches_lapack(rng, kernel, shape):
    A = rng.standard_normal(shape)
    U, s, Vt = jacobi_svd(A, kernel=kernel)
    check_svd(A, U, s, Vt)
    np.testing.assert_allclose(s, np.linalg.svd(A, compute_uv=False), rtol=1e-12, atol=1e-13)


@pytest.mark.parametrize("kernel", KERNELS)
def test_rank_deficient_and_zero(rng, kernel):
    A = rng.standard_normal((10, 3)) @ rng.standard_normal((3, 8))
    U, s, Vt = jacobi_svd(A, kernel=kernel)
    check_svd(A, U, s, Vt)
    assert np.all(s[3:] < 1e-12 * s[0])
    Z = np.zeros((4, 6))
    U, s, Vt = jacobi_svd(Z, kernel=kernel)
    check_svd(Z, U, s, Vt)
    assert np.all(s == 0)


def test_graded_spectrum_relative_accuracy():
    # diagonal scaling over 12 orders of magnitude; small values stay accurate
    rng = np.random.default_rng(1)
    Q1, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    Q2, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    sv = 10.0 ** -np.arange(0, 12, 1.5)
    A = (Q1 * sv) @ Q2.T
    _, s, _ = jacobi_svd(A)
    np.testing.assert_allclose(s[:4], sv[:4], rtol=1e-10)


@pytest.mark.skipif(not _kernels.HAS_NUMBA, reason="numba not available")
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_kernels_agree(m, n, seed):
    A = np.random.default_rng(seed).standard_normal((m, n))
    U1, s1, V1 = jacobi_svd(A, kernel=_kernels.jacobi_sweeps_numpy)
    U2, s2, V2 = jacobi_svd(A, kernel=_kernels.jacobi_sweeps_numba)
    np.testing.assert_allclose(s1, s2, rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose((U1 * s1) @ V1, (U2 * s2) @ V2, atol=1e-12)


def test_sign_convention(rng):
    U, _, _ = jacobi_svd(rng.standard_normal((6, 4)))
    for col in U.T:
        assert col[np.argmax(np.abs(col))] > 0


def test_truncation_rank():
    s = np.array([3.0, 2.0, 1.0, 1e-20])
    assert truncation_rank(s, (4, 4)) == 3
    assert truncation_rank(s, (4, 4), max_rank=2) == 2
    assert truncation_rank(s, (4, 4), abs_tol=1.0) == 2
    assert truncation_rank(s, (4, 4), abs_tol=np.sqrt(5.0) + 1e-12) == 1
    assert truncation_rank(np.zeros(3), (3, 3)) == 0


def test_truncated_svd_eckart_young(rng):
    A = rng.standard_normal((9, 7))
    U, s, Vt = truncated_svd(A, max_rank=3)
    full = np.linalg.svd(A, compute_uv=False)
    assert np.linalg.norm(A - (U * s) @ Vt) == pytest.approx(np.sqrt(np.sum(full[3:] ** 2)), rel=1e-12)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, MRTENSOR_DISABLE_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "from mrtensor import _kernels; print(_kernels.BACKEND, _kernels.HAS_NUMBA)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.split() == ["numpy", "False"]
