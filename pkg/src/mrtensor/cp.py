"""Canonical (CP) format: weights times outer products of unit-norm columns."""

from dataclasses import dataclass, field

import numpy as np

from . import dense
from .dense import ShapeError
from .svd import jacobi_svd

RIDGE = 1e-12
DIVERGENCE_FACTOR = 1e8


@dataclass(frozen=True, eq=False)
class CPTensor:
    shape: tuple
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    factors: tuple = ()

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        object.__setattr__(self, "shape", shape)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "weights", weights)
        r = len(weights)
        factors = tuple(np.asarray(U, dtype=np.float64) for U in self.factors)
        if r == 0:
            factors = tuple(np.zeros((n, 0)) for n in shape)
        object.__setattr__(self, "factors", factors)
        if not shape or any(n < 1 for n in shape):
            raise ShapeError(f"invalid CP shape {shape}")
        if len(factors) != len(shape):
            raise ShapeError(f"{len(factors)} factors for an order-{len(shape)} tensor")
        for U, n in zip(factors, shape):
            if U.shape != (n, r):
                raise ShapeError(f"factor of shape {U.shape}, expected {(n, r)}")

    @classmethod
    def zeros(cls, shape):
        return cls(tuple(shape))

    @classmethod
    def from_factors(cls, factors, weights=None):
        """Build from arbitrary columns, moving their norms into the weights."""
        factors = [np.array(U, dtype=np.float64) for U in factors]
        r = factors[0].shape[1]
        w = np.ones(r) if weights is None else np.array(weights, dtype=np.float64)
        shape = tuple(U.shape[0] for U in factors)
        for U in factors:
            norms = np.linalg.norm(U, axis=0)
            w = w * norms
            _normalize_columns(U, norms)
        return cls(shape, w, tuple(factors))

    @property
    def d(self):
        return len(self.shape)

    @property
    def rank(self):
        return len(self.weights)

    @property
    def is_zero(self):
        return self.rank == 0

    @property
    def num_params(self):
        return self.rank * (1 + sum(self.shape))

    def __repr__(self):
        return f"CPTensor(shape={self.shape}, rank={self.rank})"


def _normalize_columns(U, norms):
    # zero columns become e_1 so the unit-norm invariant survives (weight is 0)
    nz = norms > 0
    U[:, nz] /= norms[nz]
    if (~nz).any():
        U[:, ~nz] = 0.0
        U[0, ~nz] = 1.0


@dataclass
class ALSInfo:
    sweeps: int = 0
    residuals: list = field(default_factory=list)
    converged: bool = False
    instability: bool = False


def random_cp(shape, rank, rng):
    return CPTensor.from_factors([rng.standard_normal((n, rank)) for n in shape])


def _khatri_rao(mats):
    # rows ordered with the last matrix's index fastest (C order)
    out = mats[0]
    for M in mats[1:]:
        out = (out[:, None, :] * M[None, :, :]).reshape(-1, out.shape[1])
    return out


def _unfold(T, axis):
    return np.moveaxis(T, axis, 0).reshape(T.shape[axis], -1)


def cp_to_dense(X):
    dense.check_size(X.shape)
    if X.is_zero:
        return np.zeros(X.shape)
    if X.d == 1:
        return X.factors[0] @ X.weights
    rest = _khatri_rao(list(X.factors[1:]))
    return ((X.factors[0] * X.weights) @ rest.T).reshape(X.shape)


def _hosvd_init(T, rank, rng):
    factors = []
    for axis, n in enumerate(T.shape):
        A = _unfold(T, axis)
        U, _, _ = jacobi_svd(A @ A.T)
        k = min(rank, n)
        F = np.empty((n, rank))
        F[:, :k] = U[:, :k]
        if rank > k:
            F[:, k:] = rng.standard_normal((n, rank - k))
        factors.append(F)
    return factors


def cp_als(T, rank, init="hosvd", seed=0, max_sweeps=200, tol=1e-8, return_info=False):
    """Alternating least squares for a rank-``rank`` CP approximation.

    Each factor update solves the normal equations with a small ridge so that
    collinear factors do not break the solve. Iteration stops after
    ``max_sweeps`` or once the relative change of the residual drops below
    ``tol``; the best iterate seen is returned. If a weight grows beyond
    ``1e8 * ||T||`` the run stops and ``info.instability`` is set.
    """
    T = dense.as_tensor(T)
    info = ALSInfo()
    norm_T = dense.frobenius_norm(T)
    if rank < 0:
        raise ValueError(f"rank must be >= 0, got {rank}")
    if rank == 0 or norm_T == 0.0:
        out = CPTensor.zeros(T.shape)
        info.residuals.append(norm_T)
        info.converged = True
        return (out, info) if return_info else out

    rng = np.random.default_rng(seed)
    d = T.ndim
    if init == "hosvd":
        factors = _hosvd_init(T, rank, rng)
    elif init == "random":
        factors = [rng.standard_normal((n, rank)) for n in T.shape]
    else:
        raise ValueError(f"unknown init {init!r}")
    for U in factors:
        _normalize_columns(U, np.linalg.norm(U, axis=0))
    unfoldings = [_unfold(T, a) for a in range(d)]
    weights = np.ones(rank)

    best, best_res, prev = None, np.inf, None
    for sweep in range(1, max_sweeps + 1):
        for j in range(d):
            others = [factors[i] for i in range(d) if i != j]
            G = np.ones((rank, rank))
            for U in others:
                G *= U.T @ U
            G[np.diag_indices(rank)] += RIDGE
            M = unfoldings[j] @ _khatri_rao(others) if others else unfoldings[j]
            if not others:
                M = np.tile(M, (1, rank))
            F = np.linalg.solve(G, M.T).T
            weights = np.linalg.norm(F, axis=0)
            _normalize_columns(F, weights)
            factors[j] = F
        X = CPTensor(T.shape, weights.copy(), tuple(U.copy() for U in factors))
        res = dense.frobenius_norm(T - cp_to_dense(X))
        info.sweeps = sweep
        info.residuals.append(res)
        if res < best_res:
            best, best_res = X, res
        if np.max(np.abs(weights)) > DIVERGENCE_FACTOR * norm_T:
            info.instability = True
            break
        if res <= 1e-15 * norm_T or (prev is not None and abs(prev - res) <= tol * prev):
            info.converged = True
            break
        prev = res
    return (best, info) if return_info else best


def cp_add(X, Y):
    if X.shape != Y.shape:
        raise ShapeError(f"shape mismatch {X.shape} vs {Y.shape}")
    if X.is_zero:
        return Y
    if Y.is_zero:
        return X
    return CPTensor(
        X.shape,
        np.concatenate([X.weights, Y.weights]),
        tuple(np.hstack([A, B]) for A, B in zip(X.factors, Y.factors)),
    )


def cp_scale(X, alpha):
    if X.is_zero or alpha == 0:
        return CPTensor.zeros(X.shape)
    return CPTensor(X.shape, float(alpha) * X.weights, X.factors)


def _map_factors(X, fn, shape):
    if X.is_zero:
        return CPTensor.zeros(shape)
    return CPTensor.from_factors([fn(U) for U in X.factors], X.weights)


def cp_ext(X, level, bs):
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    shape = tuple(n * bs**level for n in X.shape)
    return _map_factors(X, lambda U: dense.ext_axis(U, 0, level, bs), shape)


def cp_ave(X, level, bs):
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    f = bs**level
    bad = [n for n in X.shape if n % f]
    if bad:
        raise ShapeError(f"mode sizes {bad} of {X.shape} are not divisible by {f}")
    shape = tuple(n // f for n in X.shape)
    return _map_factors(X, lambda U: dense.ave_axis(U, 0, level, bs), shape)


def cp_mode_contract(X, j, v):
    axis = dense._mode_axis(j, X.d)
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (X.shape[axis],):
        raise ShapeError(f"vector of length {v.shape} does not match mode size {X.shape[axis]}")
    shape = X.shape[:axis] + X.shape[axis + 1 :] or (1,)
    if X.is_zero:
        return CPTensor.zeros(shape)
    w = X.weights * (v @ X.factors[axis])
    factors = [U for i, U in enumerate(X.factors) if i != axis]
    if not factors:
        factors = [np.ones((1, X.rank))]
    return CPTensor(shape, w, tuple(factors))


def cp_sum(X):
    if X.is_zero:
        return 0.0
    s = X.weights.copy()
    for U in X.factors:
        s = s * U.sum(axis=0)
    return float(s.sum())
