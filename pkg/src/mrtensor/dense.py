"""Dense tensors as float64 numpy arrays, and the grid transfer operators.

``ext`` replicates every entry into a constant block of side ``b_s**level``;
``ave`` averages such blocks back down and is the left inverse of ``ext``.
Mode indices in the public API are 1-based (mode ``j`` is axis ``j - 1``).
"""

import math
import os
from dataclasses import dataclass

import numpy as np

DEFAULT_MAX_ELEMENTS = 2**31


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class ElementLimitError(MemoryError):
    """A dense result would exceed the configured element cap."""


def max_elements():
    """Current element cap (``MRTENSOR_MAX_ELEMENTS`` overrides the default)."""
    value = os.environ.get("MRTENSOR_MAX_ELEMENTS")
    return int(value) if value else DEFAULT_MAX_ELEMENTS


def check_size(shape, limit=None):
    limit = max_elements() if limit is None else limit
    size = math.prod(shape)
    if size > limit:
        raise ElementLimitError(
            f"dense tensor of shape {tuple(shape)} has {size} elements, above the cap of {limit}"
        )


def as_tensor(data):
    """Validate and convert to a float64 array of order >= 1."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 0:
        raise ShapeError("tensors need at least one mode")
    if any(n < 1 for n in arr.shape):
        raise ShapeError(f"mode sizes must be positive, got {arr.shape}")
    return arr


@dataclass(frozen=True)
class GridSpec:
    """Block size ``bs``, level count ``L`` and the finest-grid shape."""

    bs: int
    L: int
    base_shape: tuple

    def __post_init__(self):
        object.__setattr__(self, "base_shape", tuple(int(n) for n in self.base_shape))
        if self.bs < 2:
            raise ValueError(f"batch size must be >= 2, got {self.bs}")
        if self.L < 0:
            raise ValueError(f"level count must be >= 0, got {self.L}")
        if not self.base_shape:
            raise ShapeError("grid needs at least one mode")
        block = self.bs**self.L
        bad = [n for n in self.base_shape if n < 1 or n % block]
        if bad:
            raise ShapeError(
                f"mode sizes {bad} of {self.base_shape} are not divisible by bs**L = {block}"
            )

    @property
    def d(self):
        return len(self.base_shape)

    def level_shape(self, k):
        """Shape of the level-``k`` grid (level 0 coarsest, level ``L`` finest)."""
        if not 0 <= k <= self.L:
            raise IndexError(f"level {k} outside 0..{self.L}")
        f = self.bs ** (self.L - k)
        return tuple(n // f for n in self.base_shape)

    @classmethod
    def fit(cls, shape, bs, L=None):
        """Grid for ``shape``; ``L`` defaults to the largest level count that divides every mode."""
        if L is None:
            L = max_levels(shape, bs)
        return cls(bs, L, tuple(shape))


def max_levels(shape, bs):
    L = 0
    while all(n % bs ** (L + 1) == 0 for n in shape):
        L += 1
    return L


def inner(T, S):
    T, S = np.asarray(T, dtype=np.float64), np.asarray(S, dtype=np.float64)
    if T.shape != S.shape:
        raise ShapeError(f"shape mismatch {T.shape} vs {S.shape}")
    return float(np.dot(T.ravel(), S.ravel()))


def frobenius_norm(T):
    T = np.asarray(T, dtype=np.float64)
    return float(np.linalg.norm(T.ravel()))


def ext(T, level, bs):
    """Replace every entry by a constant block of side ``bs**level``."""
    T = as_tensor(T)
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    if level == 0:
        return T.copy()
    f = bs**level
    check_size(tuple(n * f for n in T.shape))
    out = T
    for axis in range(T.ndim):
        out = np.repeat(out, f, axis=axis)
    return out


def ave(T, level, bs):
    """Block means over blocks of side ``bs**level``; left inverse of :func:`ext`."""
    T = as_tensor(T)
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    if level == 0:
        return T.copy()
    f = bs**level
    bad = [n for n in T.shape if n % f]
    if bad:
        raise ShapeError(f"mode sizes {bad} of {T.shape} are not divisible by {f}")
    split = []
    for n in T.shape:
        split += [n // f, f]
    return T.reshape(split).mean(axis=tuple(range(1, 2 * T.ndim, 2)))


def ext_axis(A, axis, level, bs):
    """``ext`` along a single axis (used on TT cores and CP factors)."""
    if level == 0:
        return np.array(A, dtype=np.float64)
    return np.repeat(A, bs**level, axis=axis)


def ave_axis(A, axis, level, bs):
    """``ave`` along a single axis."""
    A = np.asarray(A, dtype=np.float64)
    if level == 0:
        return A.copy()
    f = bs**level
    n = A.shape[axis]
    if n % f:
        raise ShapeError(f"mode size {n} is not divisible by {f}")
    shape = A.shape[:axis] + (n // f, f) + A.shape[axis + 1 :]
    return A.reshape(shape).mean(axis=axis + 1)


def _same_shape(T, S):
    T, S = np.asarray(T, dtype=np.float64), np.asarray(S, dtype=np.float64)
    if T.shape != S.shape:
        raise ShapeError(f"shape mismatch {T.shape} vs {S.shape}")
    return T, S


def hadamard(T, S):
    T, S = _same_shape(T, S)
    return T * S


def add(T, S):
    T, S = _same_shape(T, S)
    return T + S


def scale(T, alpha):
    return float(alpha) * np.asarray(T, dtype=np.float64)


def _mode_axis(j, d):
    if not 1 <= j <= d:
        raise IndexError(f"mode index {j} outside 1..{d}")
    return j - 1


def mode_contract(T, j, v):
    """Contract mode ``j`` (1-based) of ``T`` with the vector ``v``.

    Contracting the only mode of a vector gives a one-element tensor.
    """
    T = as_tensor(T)
    axis = _mode_axis(j, T.ndim)
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (T.shape[axis],):
        raise ShapeError(f"vector of length {v.shape} does not match mode size {T.shape[axis]}")
    out = np.tensordot(T, v, axes=([axis], [0]))
    return np.reshape(out, (1,)) if out.ndim == 0 else out
