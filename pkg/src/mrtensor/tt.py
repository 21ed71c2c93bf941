"""Tensor-train format.

A TT tensor of order ``d`` stores cores ``G_k`` of shape ``(r_{k-1}, n_k, r_k)``
with ``r_0 = r_d = 1``. The zero tensor has no cores at all; every operation
short-circuits on it. For ``d = 2`` the cores are just a low-rank matrix
factorisation ``G_1 @ G_2``.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import dense
from .dense import ShapeError
from .svd import truncated_svd


@dataclass(frozen=True, eq=False)
class TTTensor:
    shape: tuple
    cores: tuple = ()

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        object.__setattr__(self, "shape", shape)
        cores = tuple(np.asarray(c, dtype=np.float64) for c in self.cores)
        object.__setattr__(self, "cores", cores)
        if not shape or any(n < 1 for n in shape):
            raise ShapeError(f"invalid TT shape {shape}")
        if not cores:
            return
        if len(cores) != len(shape):
            raise ShapeError(f"{len(cores)} cores for an order-{len(shape)} tensor")
        left = 1
        for k, (c, n) in enumerate(zip(cores, shape)):
            if c.ndim != 3 or c.shape[0] != left or c.shape[1] != n or c.shape[2] < 1:
                raise ShapeError(f"core {k} has shape {c.shape}, expected ({left}, {n}, r)")
            left = c.shape[2]
        if left != 1:
            raise ShapeError(f"last core must have right rank 1, got {left}")

    @classmethod
    def zeros(cls, shape):
        return cls(tuple(shape))

    @property
    def d(self):
        return len(self.shape)

    @property
    def is_zero(self):
        return not self.cores

    @property
    def ranks(self):
        """Internal rank chain ``(r_1, ..., r_{d-1})``; all zeros for the zero tensor."""
        if self.is_zero:
            return (0,) * (self.d - 1)
        return tuple(c.shape[2] for c in self.cores[:-1])

    @property
    def num_params(self):
        return sum(c.size for c in self.cores)

    def __neg__(self):
        return tt_scale(self, -1.0)

    def __add__(self, other):
        return tt_add(self, other)

    def __sub__(self, other):
        return tt_add(self, tt_scale(other, -1.0))

    def __repr__(self):
        return f"TTTensor(shape={self.shape}, ranks={self.ranks})"


def max_ranks(shape):
    """Largest meaningful rank chain for ``shape``."""
    shape = tuple(shape)
    return tuple(
        min(math.prod(shape[:k]), math.prod(shape[k:])) for k in range(1, len(shape))
    )


def normalize_ranks(ranks, d):
    """Expand a scalar budget to a chain of length ``d - 1``."""
    if ranks is None:
        return None
    if np.isscalar(ranks):
        return (int(ranks),) * (d - 1)
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != d - 1:
        raise ValueError(f"rank chain {ranks} has length {len(ranks)}, expected {d - 1}")
    if any(r < 0 for r in ranks):
        raise ValueError(f"negative rank in {ranks}")
    return ranks


def clip_ranks(ranks, shape):
    """Clip a rank budget to the feasible chain for ``shape``."""
    chain = normalize_ranks(ranks, len(shape))
    return tuple(min(r, m) for r, m in zip(chain, max_ranks(shape)))


def random_tt(shape, ranks, rng):
    shape = tuple(shape)
    chain = (1,) + tuple(normalize_ranks(ranks, len(shape))) + (1,)
    if 0 in chain:
        return TTTensor.zeros(shape)
    cores = [rng.standard_normal((chain[k], n, chain[k + 1])) for k, n in enumerate(shape)]
    return TTTensor(shape, cores)


def tt_to_dense(X):
    if X.is_zero:
        dense.check_size(X.shape)
        return np.zeros(X.shape)
    dense.check_size(X.shape)
    out = X.cores[0].reshape(X.shape[0], -1)
    for c in X.cores[1:]:
        out = (out @ c.reshape(c.shape[0], -1)).reshape(-1, c.shape[2])
    return out.reshape(X.shape)


def _split_budget(ranks, eps, norm, d):
    chain = normalize_ranks(ranks, d) if ranks is not None else (None,) * (d - 1)
    abs_tol = None
    if eps is not None:
        if eps < 0:
            raise ValueError(f"tolerance must be >= 0, got {eps}")
        abs_tol = eps * norm / math.sqrt(d - 1) if d > 1 else 0.0
    return chain, abs_tol


def tt_svd(T, ranks=None, eps=None):
    """Quasi-optimal TT approximation of a dense tensor.

    With ``eps`` the result satisfies ``||T - X|| <= eps * ||T||``; with
    ``ranks`` no chain entry exceeds the budget. Both may be combined.
    Without either the decomposition is lossless (numerical zeros dropped).
    The sweep runs right to left, matching :func:`tt_round`.
    """
    T = dense.as_tensor(T)
    shape, d = T.shape, T.ndim
    norm = dense.frobenius_norm(T)
    if norm == 0.0:
        return TTTensor.zeros(shape)
    if d == 1:
        return TTTensor(shape, [T.reshape(1, -1, 1)])
    chain, abs_tol = _split_budget(ranks, eps, norm, d)
    cores = [None] * d
    right = 1
    C = T.reshape(-1, shape[-1])
    for k in range(d - 1, 0, -1):
        M = C.reshape(-1, shape[k] * right)
        U, s, Vt = truncated_svd(M, max_rank=chain[k - 1], abs_tol=abs_tol)
        r = len(s)
        if r == 0:
            return TTTensor.zeros(shape)
        cores[k] = Vt.reshape(r, shape[k], right)
        C = U * s
        right = r
    cores[0] = C.reshape(1, shape[0], right)
    return TTTensor(shape, cores)


def _left_orthogonalize(cores):
    cores = list(cores)
    for k in range(len(cores) - 1):
        a, n, b = cores[k].shape
        Q, R = np.linalg.qr(cores[k].reshape(a * n, b))
        cores[k] = Q.reshape(a, n, Q.shape[1])
        cores[k + 1] = np.einsum("ij,jkl->ikl", R, cores[k + 1])
    return cores


def tt_round(X, ranks=None, eps=None):
    """Recompress ``X``: left-to-right QR, then right-to-left truncated SVDs.

    Same contract as :func:`tt_svd` relative to ``tt_to_dense(X)``; no rank
    ever grows.
    """
    if X.is_zero:
        return X
    d = X.d
    cores = _left_orthogonalize(X.cores)
    norm = float(np.linalg.norm(cores[-1]))
    if norm == 0.0:
        return TTTensor.zeros(X.shape)
    if d == 1:
        return TTTensor(X.shape, cores)
    chain, abs_tol = _split_budget(ranks, eps, norm, d)
    for k in range(d - 1, 0, -1):
        a, n, b = cores[k].shape
        U, s, Vt = truncated_svd(cores[k].reshape(a, n * b), max_rank=chain[k - 1], abs_tol=abs_tol)
        r = len(s)
        if r == 0:
            return TTTensor.zeros(X.shape)
        cores[k] = Vt.reshape(r, n, b)
        cores[k - 1] = np.einsum("ijk,kl->ijl", cores[k - 1], U * s)
    return TTTensor(X.shape, cores)


def _check_same(X, Y):
    if X.shape != Y.shape:
        raise ShapeError(f"shape mismatch {X.shape} vs {Y.shape}")


def tt_add(X, Y):
    """Sum with ranks adding (block-diagonal cores)."""
    _check_same(X, Y)
    if X.is_zero:
        return Y
    if Y.is_zero:
        return X
    d = X.d
    if d == 1:
        return TTTensor(X.shape, [X.cores[0] + Y.cores[0]])
    cores = [np.concatenate([X.cores[0], Y.cores[0]], axis=2)]
    for A, B in zip(X.cores[1:-1], Y.cores[1:-1]):
        a1, n, b1 = A.shape
        a2, _, b2 = B.shape
        C = np.zeros((a1 + a2, n, b1 + b2))
        C[:a1, :, :b1] = A
        C[a1:, :, b1:] = B
        cores.append(C)
    cores.append(np.concatenate([X.cores[-1], Y.cores[-1]], axis=0))
    return TTTensor(X.shape, cores)


def tt_scale(X, alpha):
    if X.is_zero or alpha == 0:
        return TTTensor.zeros(X.shape)
    cores = list(X.cores)
    cores[0] = float(alpha) * cores[0]
    return TTTensor(X.shape, cores)


def tt_hadamard(X, Y):
    """Elementwise product; ranks multiply."""
    _check_same(X, Y)
    if X.is_zero or Y.is_zero:
        return TTTensor.zeros(X.shape)
    cores = []
    for A, B in zip(X.cores, Y.cores):
        a1, n, b1 = A.shape
        a2, _, b2 = B.shape
        cores.append(np.einsum("aib,cid->acibd", A, B).reshape(a1 * a2, n, b1 * b2))
    return TTTensor(X.shape, cores)


def tt_inner(X, Y):
    _check_same(X, Y)
    if X.is_zero or Y.is_zero:
        return 0.0
    M = np.ones((1, 1))
    for A, B in zip(X.cores, Y.cores):
        M = np.einsum("ac,aib,cid->bd", M, A, B)
    return float(M[0, 0])


def tt_norm(X):
    """Frobenius norm through left-orthogonalisation (no dense materialisation)."""
    if X.is_zero:
        return 0.0
    return float(np.linalg.norm(_left_orthogonalize(X.cores)[-1]))


def tt_mode_contract(X, j, v):
    """Contract mode ``j`` (1-based) with ``v``; the matrix left over is merged into a neighbour."""
    d = X.d
    axis = dense._mode_axis(j, d)
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (X.shape[axis],):
        raise ShapeError(f"vector of length {v.shape} does not match mode size {X.shape[axis]}")
    shape = X.shape[:axis] + X.shape[axis + 1 :] or (1,)
    if X.is_zero:
        return TTTensor.zeros(shape)
    M = np.einsum("aib,i->ab", X.cores[axis], v)
    if d == 1:
        return TTTensor(shape, [M.reshape(1, 1, 1)])
    cores = list(X.cores)
    if axis < d - 1:
        cores[axis + 1] = np.einsum("ab,bic->aic", M, cores[axis + 1])
    else:
        cores[axis - 1] = np.einsum("aib,bc->aic", cores[axis - 1], M)
    del cores[axis]
    return TTTensor(shape, cores)


def tt_ext(X, level, bs):
    """``ext`` applied to each core's mode fibre; ranks are unchanged."""
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    shape = tuple(n * bs**level for n in X.shape)
    if X.is_zero:
        return TTTensor.zeros(shape)
    return TTTensor(shape, [dense.ext_axis(c, 1, level, bs) for c in X.cores])


def tt_ave(X, level, bs):
    """``ave`` applied to each core's mode fibre; ranks are unchanged."""
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    f = bs**level
    bad = [n for n in X.shape if n % f]
    if bad:
        raise ShapeError(f"mode sizes {bad} of {X.shape} are not divisible by {f}")
    shape = tuple(n // f for n in X.shape)
    if X.is_zero:
        return TTTensor.zeros(shape)
    return TTTensor(shape, [dense.ave_axis(c, 1, level, bs) for c in X.cores])


def tt_sum(X):
    """Sum of all entries."""
    if X.is_zero:
        return 0.0
    v = np.ones((1,))
    for c in X.cores:
        v = v @ c.sum(axis=1)
    return float(v[0])
