"""Deterministic thin SVD built on one-sided Jacobi rotations.

The matrix is first reduced with a column-pivoted QR factorisation so the
Jacobi sweeps act on a small, well-ordered triangular factor; this cuts the
sweep count to a handful and preserves the high relative accuracy of Jacobi.
"""

import numpy as np
import scipy.linalg

from . import _kernels

EPS = np.finfo(np.float64).eps


def _complete_basis(B, k):
    """Orthonormal columns spanning the complement of ``B`` (n x j) up to k columns."""
    n, j = B.shape
    if j >= k:
        return B[:, :k]
    Q, _ = np.linalg.qr(np.hstack([B, np.eye(n)]), mode="reduced")
    return np.hstack([B, Q[:, j:k]])


def _fix_signs(U, Vt):
    # largest-magnitude entry of each left vector is made positive
    if U.shape[1] == 0:
        return U, Vt
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, Vt * signs[:, None]


def jacobi_svd(A, kernel=None):
    """Thin SVD ``A = U @ diag(s) @ Vt`` with ``s`` sorted descending.

    Parameters
    ----------
    A : (m, n) array_like
    kernel : callable, optional
        Row-orthogonalisation kernel with the signature of
        ``_kernels.jacobi_sweeps``; defaults to the active backend.

    Returns
    -------
    U : (m, k) ndarray
    s : (k,) ndarray
    Vt : (k, n) ndarray
        with ``k = min(m, n)``. Ties in ``s`` keep their original order.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {A.shape}")
    m, n = A.shape
    if m < n:
        U, s, Vt = jacobi_svd(A.T, kernel=kernel)
        V, Ut = Vt.T, U.T
        # re-apply the sign rule to the new left factor
        V, Ut = _fix_signs(V, Ut)
        return V, s, Ut
    k = n
    if k == 0:
        return np.zeros((m, 0)), np.zeros(0), np.zeros((0, n))
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix contains non-finite entries")

    Q, R, perm = scipy.linalg.qr(A, mode="economic", pivoting=True)
    X = np.ascontiguousarray(R)
    Y = np.eye(k)
    kernel = kernel or _kernels.jacobi_sweeps
    kernel(X, Y, float(k) * EPS)

    s = np.sqrt(np.einsum("ij,ij->i", X, X))
    order = np.argsort(-s, kind="stable")
    s, X, Y = s[order], X[order], Y[order]

    floor = s[0] * EPS * 1e-3 if s[0] > 0 else 0.0
    live = int(np.count_nonzero(s > floor))
    W = np.zeros((k, k))
    W[:live] = X[:live] / s[:live, None]
    if live < k:
        s[live:] = 0.0
        W = _complete_basis(W[:live].T, k).T

    U = Q @ Y.T
    Vt = np.empty((k, n))
    Vt[:, perm] = W
    U, Vt = _fix_signs(U, Vt)
    return U, s, Vt


def numerical_rank_floor(s, shape):
    """Singular values at or below this are treated as exact zeros."""
    if len(s) == 0 or s[0] == 0.0:
        return 0.0
    return s[0] * max(shape) * EPS


def truncation_rank(s, shape, max_rank=None, abs_tol=None):
    """Number of singular values to keep.

    Drops numerically-zero values, then applies an absolute Frobenius
    tolerance (discarded tail norm <= ``abs_tol``) and a rank cap.
    """
    s = np.asarray(s)
    r = int(np.count_nonzero(s > numerical_rank_floor(s, shape)))
    if abs_tol is not None and r > 0:
        # tail[i] = norm of s[i:]
        tail = np.sqrt(np.cumsum((s[::-1] ** 2))[::-1])
        tail = np.append(tail, 0.0)
        ok = np.nonzero(tail[: r + 1] <= abs_tol)[0]
        r = int(ok[0]) if len(ok) else r
    if max_rank is not None:
        r = min(r, int(max_rank))
    return max(r, 0)


def truncated_svd(A, max_rank=None, abs_tol=None):
    """Best rank-limited factors ``(U_r * s_r) @ Vt_r`` of ``A``."""
    U, s, Vt = jacobi_svd(A)
    r = truncation_rank(s, A.shape, max_rank=max_rank, abs_tol=abs_tol)
    return U[:, :r], s[:r], Vt[:r]
