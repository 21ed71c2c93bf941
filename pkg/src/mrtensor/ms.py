"""Multiresolution tensors: sums of compressed components on nested grids.

An :class:`MSTensor` holds one payload per level ``k = 0..L`` (level 0 is the
coarsest grid). Its value is ``sum_k ext_{L-k}(T_k)``. All payloads share one
base format, tensor train (``"tt"``) or canonical (``"cp"``).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import cp, dense, tt
from .cp import CPTensor
from .dense import GridSpec, ShapeError
from .tt import TTTensor

FORMATS = ("tt", "cp")


class FormatMismatchError(ValueError):
    """Operands use different grids or base formats, or the format is unsupported."""


# payload dispatch ---------------------------------------------------------

def payload_zeros(fmt, shape):
    return TTTensor.zeros(shape) if fmt == "tt" else CPTensor.zeros(shape)


def payload_format(X):
    if isinstance(X, TTTensor):
        return "tt"
    if isinstance(X, CPTensor):
        return "cp"
    raise TypeError(f"unsupported payload {type(X).__name__}")


def payload_to_dense(X):
    return tt.tt_to_dense(X) if isinstance(X, TTTensor) else cp.cp_to_dense(X)


def payload_add(X, Y):
    return tt.tt_add(X, Y) if isinstance(X, TTTensor) else cp.cp_add(X, Y)


def payload_scale(X, alpha):
    return tt.tt_scale(X, alpha) if isinstance(X, TTTensor) else cp.cp_scale(X, alpha)


def payload_ext(X, level, bs):
    return tt.tt_ext(X, level, bs) if isinstance(X, TTTensor) else cp.cp_ext(X, level, bs)


def payload_ave(X, level, bs):
    return tt.tt_ave(X, level, bs) if isinstance(X, TTTensor) else cp.cp_ave(X, level, bs)


def payload_norm(X):
    if isinstance(X, TTTensor):
        return tt.tt_norm(X)
    return dense.frobenius_norm(cp.cp_to_dense(X))


def payload_mode_contract(X, j, v):
    if isinstance(X, TTTensor):
        return tt.tt_mode_contract(X, j, v)
    return cp.cp_mode_contract(X, j, v)


def payload_ranks(X):
    return X.ranks if isinstance(X, TTTensor) else X.rank


# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MSTensor:
    grid: GridSpec
    fmt: str
    levels: tuple

    def __post_init__(self):
        if self.fmt not in FORMATS:
            raise FormatMismatchError(f"unknown base format {self.fmt!r}")
        levels = tuple(self.levels)
        object.__setattr__(self, "levels", levels)
        if len(levels) != self.grid.L + 1:
            raise ShapeError(f"{len(levels)} levels for L = {self.grid.L}")
        for k, X in enumerate(levels):
            if payload_format(X) != self.fmt:
                raise FormatMismatchError(f"level {k} is {payload_format(X)}, expected {self.fmt}")
            if X.shape != self.grid.level_shape(k):
                raise ShapeError(
                    f"level {k} has shape {X.shape}, expected {self.grid.level_shape(k)}"
                )

    @classmethod
    def zeros(cls, grid, fmt="tt"):
        return cls(grid, fmt, [payload_zeros(fmt, grid.level_shape(k)) for k in range(grid.L + 1)])

    @property
    def L(self):
        return self.grid.L

    @property
    def bs(self):
        return self.grid.bs

    @property
    def shape(self):
        return self.grid.base_shape

    @property
    def d(self):
        return self.grid.d

    @property
    def ranks(self):
        return [payload_ranks(X) for X in self.levels]

    def with_level(self, k, X):
        levels = list(self.levels)
        levels[k] = X
        return MSTensor(self.grid, self.fmt, levels)

    def __repr__(self):
        return f"MSTensor(shape={self.shape}, bs={self.bs}, L={self.L}, fmt={self.fmt!r}, ranks={self.ranks})"


def embed_finest(X, bs, L):
    """Place a single TT or CP tensor on the finest level of an otherwise empty MS tensor."""
    fmt = payload_format(X)
    grid = GridSpec(bs, L, X.shape)
    return MSTensor.zeros(grid, fmt).with_level(L, X)


def _check_compatible(X, Y):
    if X.grid != Y.grid:
        raise FormatMismatchError(f"grid mismatch {X.grid} vs {Y.grid}")
    if X.fmt != Y.fmt:
        raise FormatMismatchError(f"format mismatch {X.fmt} vs {Y.fmt}")


def _require_tt(X, what):
    if X.fmt != "tt":
        raise FormatMismatchError(f"{what} is only available for the tt base format")


def ms_partial_reconstruct(X, scales):
    """Dense ``sum_{k in scales} ext_{L-k}(T_k)``."""
    scales = set(int(k) for k in scales)
    bad = [k for k in scales if not 0 <= k <= X.L]
    if bad:
        raise IndexError(f"scales {sorted(bad)} outside 0..{X.L}")
    dense.check_size(X.shape)
    acc = np.zeros(X.grid.level_shape(0))
    for k in range(X.L + 1):
        if k:
            acc = dense.ext(acc, 1, X.bs)
        if k in scales:
            acc = acc + payload_to_dense(X.levels[k])
    return acc


def ms_reconstruct(X):
    return ms_partial_reconstruct(X, range(X.L + 1))


def ms_add(X, Y):
    _check_compatible(X, Y)
    return MSTensor(X.grid, X.fmt, [payload_add(A, B) for A, B in zip(X.levels, Y.levels)])


def ms_scale(X, alpha):
    return MSTensor(X.grid, X.fmt, [payload_scale(A, alpha) for A in X.levels])


def ms_round(X, eps):
    """Round every level so the total error stays below ``eps * sum_k ||T_k||``.

    Level ``k`` is rounded at relative tolerance ``eps * bs**(-d(L-k)/2)``,
    compensating the norm growth ``||ext_l(E)|| = bs**(d l/2) ||E||``.
    """
    _require_tt(X, "ms_round")
    if eps < 0:
        raise ValueError(f"tolerance must be >= 0, got {eps}")
    d, L, bs = X.d, X.L, X.bs
    levels = [tt.tt_round(T, eps=eps * bs ** (-d * (L - k) / 2)) for k, T in enumerate(X.levels)]
    return MSTensor(X.grid, X.fmt, levels)


def ms_hadamard(X, Y, eps=0.0):
    """Elementwise product computed level by level.

    Pairs of components land on the finer of their two levels. With running
    prefix sums ``P^Y_k = Y_k + ext_1(P^Y_{k-1})`` (through level ``k``) and
    ``P^X_{k-1}`` (strictly below ``k``), level ``k`` of the product is
    ``X_k * P^Y_k + Y_k * ext_1(P^X_{k-1})``. Prefixes and results are
    rounded at relative tolerance ``eps`` (``eps = 0`` only drops numerical
    zeros).
    """
    _check_compatible(X, Y)
    _require_tt(X, "ms_hadamard")
    bs = X.bs
    levels = []
    prefix_x = prefix_y = None
    for k, (A, B) in enumerate(zip(X.levels, Y.levels)):
        shape = A.shape
        below_x = tt.tt_ext(prefix_x, 1, bs) if prefix_x is not None else TTTensor.zeros(shape)
        below_y = tt.tt_ext(prefix_y, 1, bs) if prefix_y is not None else TTTensor.zeros(shape)
        prefix_y = tt.tt_round(tt.tt_add(B, below_y), eps=eps)
        R = tt.tt_add(tt.tt_hadamard(A, prefix_y), tt.tt_hadamard(B, below_x))
        levels.append(tt.tt_round(R, eps=eps))
        prefix_x = tt.tt_round(tt.tt_add(A, below_x), eps=eps)
    return MSTensor(X.grid, X.fmt, levels)


def ms_mode_contract(X, j, v):
    """Contract mode ``j`` (1-based) with ``v``.

    Level ``k`` becomes ``bs**(L-k) * (T_k x_j ave_{L-k}(v))``. The result is
    an MS tensor of order ``d - 1``; contracting an order-1 tensor returns the
    scalar value instead.
    """
    axis = dense._mode_axis(j, X.d)
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (X.shape[axis],):
        raise ShapeError(f"vector of length {v.shape} does not match mode size {X.shape[axis]}")
    L, bs = X.L, X.bs
    averaged = [None] * (L + 1)
    averaged[L] = v
    for k in range(L, 0, -1):
        averaged[k - 1] = dense.ave_axis(averaged[k], 0, 1, bs)
    parts = [
        payload_scale(payload_mode_contract(T, j, averaged[k]), bs ** (L - k))
        for k, T in enumerate(X.levels)
    ]
    if X.d == 1:
        return float(sum(payload_to_dense(P)[0] for P in parts))
    grid = GridSpec(bs, L, X.shape[:axis] + X.shape[axis + 1 :])
    return MSTensor(grid, X.fmt, parts)


def ms_norm(X):
    """Frobenius norm as the all-ones contraction of ``X * X``."""
    _require_tt(X, "ms_norm")
    H = ms_hadamard(X, X, eps=0.0)
    for _ in range(X.d):
        H = ms_mode_contract(H, 1, np.ones(H.shape[0]))
    return math.sqrt(max(H, 0.0))


def level_norms(X):
    return [payload_norm(T) for T in X.levels]


def extended_level_norms(X):
    """Norms of the contributions ``ext_{L-k}(T_k)`` on the finest grid."""
    d, L, bs = X.d, X.L, X.bs
    return [bs ** (d * (L - k) / 2) * n for k, n in enumerate(level_norms(X))]


def stability_margin(X):
    """``max_k ||T_k|| / ||X||`` (infinite for a zero sum with nonzero parts)."""
    norms = level_norms(X)
    total = ms_norm(X) if X.fmt == "tt" else dense.frobenius_norm(ms_reconstruct(X))
    peak = max(norms)
    if total == 0.0:
        return 0.0 if peak == 0.0 else math.inf
    return peak / total


@dataclass(frozen=True)
class StorageReport:
    level_params: tuple
    total_params: int
    dense_elements: int

    @property
    def ratio(self):
        """Dense element count over stored parameter count."""
        return math.inf if self.total_params == 0 else self.dense_elements / self.total_params


def ms_storage(X):
    params = tuple(int(T.num_params) for T in X.levels)
    return StorageReport(params, sum(params), math.prod(X.shape))
