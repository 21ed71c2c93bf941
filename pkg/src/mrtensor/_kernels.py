"""Hot inner loops, compiled with numba when available.

Set ``MRTENSOR_DISABLE_NUMBA=1`` to force the pure-numpy path. Both paths
implement the same one-sided (Hestenes) Jacobi orthogonalisation; they differ
only in pair ordering (cyclic-by-row for numba, round-robin for numpy so that
each round vectorises over disjoint column pairs) and so agree to rounding.
"""

import os

import numpy as np

MAX_SWEEPS = 80

_disabled = os.environ.get("MRTENSOR_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError("numba disabled by MRTENSOR_DISABLE_NUMBA")
    from numba import njit
    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


def _rotation(alpha, beta, gamma):
    # Rotation angle that zeroes the (p, q) entry of the 2x2 Gram block.
    zeta = (beta - alpha) / (2.0 * gamma)
    t = np.sign(zeta) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
    t = np.where(zeta == 0.0, 1.0, t)
    c = 1.0 / np.sqrt(1.0 + t * t)
    return c, c * t, t


def jacobi_sweeps_numpy(X, Y, tol):
    """Orthogonalise the rows of ``X`` in place, applying the same rotations to ``Y``.

    Rows are used (not columns) so both kernels walk contiguous memory.
    Returns the number of sweeps performed.
    """
    n = X.shape[0]
    if n < 2:
        return 0
    idx = list(range(n)) + ([-1] if n % 2 else [])
    m = len(idx)
    norms = np.einsum("ij,ij->i", X, X)
    for sweep in range(1, MAX_SWEEPS + 1):
        rotated = False
        order = idx[:]
        for _ in range(m - 1):
            pairs = [(order[i], order[m - 1 - i]) for i in range(m // 2)]
            pairs = [(min(a, b), max(a, b)) for a, b in pairs if a >= 0 and b >= 0]
            p = np.array([a for a, _ in pairs], dtype=np.intp)
            q = np.array([b for _, b in pairs], dtype=np.intp)
            Xp, Xq = X[p], X[q]
            alpha, beta = norms[p], norms[q]
            gamma = np.einsum("ij,ij->i", Xp, Xq)
            active = np.abs(gamma) > tol * np.sqrt(alpha * beta)
            active &= (alpha > 0.0) & (beta > 0.0)
            if active.any():
                rotated = True
                p, q = p[active], q[active]
                Xp, Xq = Xp[active], Xq[active]
                alpha, beta, gamma = alpha[active], beta[active], gamma[active]
                c, s, _ = _rotation(alpha, beta, gamma)
                c, s = c[:, None], s[:, None]
                X[p] = c * Xp - s * Xq
                X[q] = s * Xp + c * Xq
                Yp, Yq = Y[p], Y[q]
                Y[p] = c * Yp - s * Yq
                Y[q] = s * Yp + c * Yq
                norms[p] = np.einsum("ij,ij->i", X[p], X[p])
                norms[q] = np.einsum("ij,ij->i", X[q], X[q])
            # round-robin: keep the first slot fixed, rotate the rest
            order = [order[0], order[-1]] + order[1:-1]
        if not rotated:
            return sweep
    return MAX_SWEEPS


def _jacobi_sweeps_loop(X, Y, tol):
    n, m = X.shape
    my = Y.shape[1]
    norms = np.empty(n)
    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += X[j, i] * X[j, i]
        norms[j] = acc
    for sweep in range(1, MAX_SWEEPS + 1):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = norms[p]
                beta = norms[q]
                if alpha == 0.0 or beta == 0.0:
                    continue
                gamma = 0.0
                for i in range(m):
                    gamma += X[p, i] * X[q, i]
                if abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                if zeta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                ap = 0.0
                aq = 0.0
                for i in range(m):
                    xp = X[p, i]
                    xq = X[q, i]
                    up = c * xp - s * xq
                    uq = s * xp + c * xq
                    X[p, i] = up
                    X[q, i] = uq
                    ap += up * up
                    aq += uq * uq
                norms[p] = ap
                norms[q] = aq
                for i in range(my):
                    yp = Y[p, i]
                    yq = Y[q, i]
                    Y[p, i] = c * yp - s * yq
                    Y[q, i] = s * yp + c * yq
        if not rotated:
            return sweep
    return MAX_SWEEPS


if HAS_NUMBA:
    jacobi_sweeps_numba = njit(cache=True, nogil=True)(_jacobi_sweeps_loop)
    jacobi_sweeps = jacobi_sweeps_numba
else:
    jacobi_sweeps_numba = None
    jacobi_sweeps = jacobi_sweeps_numpy

BACKEND = "numba" if HAS_NUMBA else "numpy"
