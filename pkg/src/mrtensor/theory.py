"""Reference constructions: a three-scale test tensor, its explicit
multiresolution approximant with an a-priori error bound, and a sequence
showing that the format is not closed.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import dense, tt
from .cp import CPTensor, cp_scale, cp_to_dense, random_cp
from .dense import GridSpec
from .ms import MSTensor, payload_zeros
from .tt import TTTensor


def _log_exact(n, bs):
    L = 0
    while bs**L < n:
        L += 1
    if bs**L != n:
        raise ValueError(f"n = {n} is not a power of bs = {bs}")
    return L


def multiscale_test_tensor(n, d, bs=2):
    """Grid samples of ``prod sin(x_j) + prod sin(2 x_j) + prod sin(4 x_j)`` on ``[0, pi]^d``.

    Returns the dense tensor and the rank-one terms as lists of per-mode
    factors, ordered ``[sin x, sin 2x, sin 4x]``.
    """
    _log_exact(n, bs)
    x = np.linspace(0.0, np.pi, n)
    components = [[np.sin(f * x) for _ in range(d)] for f in (1, 2, 4)]
    dense.check_size((n,) * d)
    T = np.zeros((n,) * d)
    for factors in components:
        T += _outer(factors)
    return T, components


def _outer(factors):
    out = factors[0]
    for f in factors[1:]:
        out = np.multiply.outer(out, f)
    return np.asarray(out, dtype=np.float64)


def block_deviation_sum(b):
    """Closed form of ``sum_i (sum_m |i - m|)^2`` over ``i, m = 1..b``."""
    num = b * (7 * b**4 - 15 * b**2 + 8)
    assert num % 60 == 0
    return num // 60


def block_deviation_sum_brute(b):
    return sum(sum(abs(i - m) for m in range(1, b + 1)) ** 2 for i in range(1, b + 1))


@dataclass(frozen=True)
class BoundResult:
    deltas: tuple
    term_norms: tuple
    bound: float
    asymptotic: float


def theorem_bound(factors, omegas, C, bs, n, a, b):
    """A-priori error of the averaged multiresolution approximant.

    ``factors[k][j]`` is the mode-``j`` vector of term ``k``; terms are ordered
    by increasing length scale ``omegas`` (finest first). ``C`` bounds the
    derivative of each profile, as a scalar or an ``(r, d)`` array. Returns
    per-term relative perturbations ``delta_k`` (zero for the finest term,
    which is kept exactly), the bound ``sum_k delta_k ||T_k||`` and its
    first-order large-``n`` form.
    """
    r = len(factors)
    d = len(factors[0])
    omegas = np.asarray(omegas, dtype=np.float64)
    if len(omegas) != r:
        raise ValueError("need one length scale per term")
    if np.any(np.diff(omegas) <= 0) or np.any(omegas <= 0):
        raise ValueError(f"length scales must be positive and increasing, got {omegas}")
    C = np.broadcast_to(np.asarray(C, dtype=np.float64), (r, d))
    deltas, norms, first_order = [], [], []
    for k in range(r):
        u_norms = [float(np.linalg.norm(u)) for u in factors[k]]
        norms.append(math.prod(u_norms))
        if k == 0:
            deltas.append(0.0)
            first_order.append(0.0)
            continue
        q = bs ** (2 * k)
        radical = math.sqrt((7 * q - 15 + 8 / q) / 60)
        rel = [(b - a) * C[k, j] * radical / (math.sqrt(n) * omegas[k] * u_norms[j]) for j in range(d)]
        deltas.append(math.prod(1 + x for x in rel) - 1)
        first_order.append(sum(rel))
    bound = sum(dk * nk for dk, nk in zip(deltas, norms))
    asymptotic = sum(fk * nk for fk, nk in zip(first_order, norms))
    return BoundResult(tuple(deltas), tuple(norms), bound, asymptotic)


def prescribed_ms_approximation(components, bs=2):
    """Put term ``k`` (finest first) on the grid ``k`` steps coarser, averaged down.

    Returns a CP-based :class:`MSTensor` with one rank-one payload per term.
    """
    r = len(components)
    shape = tuple(len(u) for u in components[0])
    L = max(_log_exact(n, bs) for n in shape)
    if r - 1 > L:
        raise ValueError(f"{r} terms need at least {r - 1} levels, grid has {L}")
    grid = GridSpec(bs, L, shape)
    levels = [payload_zeros("cp", grid.level_shape(k)) for k in range(L + 1)]
    for k, factors in enumerate(components):
        cols = [dense.ave_axis(np.asarray(u, dtype=np.float64)[:, None], 0, k, bs) for u in factors]
        levels[L - k] = CPTensor.from_factors(cols)
    return MSTensor(grid, "cp", levels)


def closedness_sequence(n):
    """``T_n = n J - v v^T`` with ``v = (sqrt(n+1), sqrt(n-1))`` and its rank-(1, 1) witness.

    ``T_n`` tends to ``diag(-1, 1)``, which has no rank-(1, 1) representation,
    while both witness components grow like ``2 n``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    v = np.array([math.sqrt(n + 1), math.sqrt(n - 1)])
    T = n * np.ones((2, 2)) - np.outer(v, v)
    grid = GridSpec(2, 1, (2, 2))
    coarse = TTTensor((1, 1), [np.full((1, 1, 1), float(n)), np.ones((1, 1, 1))])
    fine = TTTensor((2, 2), [-v.reshape(1, 2, 1), v.reshape(1, 2, 1)])
    return T, MSTensor(grid, "tt", [coarse, fine])


CLOSEDNESS_LIMIT = np.diag([-1.0, 1.0])


def closedness_error(n):
    """``||T_n - diag(-1, 1)||`` in closed form, without cancellation."""
    return math.sqrt(2.0) / (n + math.sqrt(n * n - 1.0))


def random_ms(grid, ranks, rng, fmt="tt", normalize=False):
    """Random MS tensor with the given per-level ranks (clipped to each level)."""
    levels = []
    for k, r in enumerate(ranks):
        shape = grid.level_shape(k)
        if fmt == "tt":
            chain = tt.clip_ranks(r, shape)
            X = tt.random_tt(shape, chain, rng) if shape and (not chain or min(chain) > 0) else TTTensor.zeros(shape)
            if normalize and not X.is_zero:
                X = tt.tt_scale(X, 1.0 / tt.tt_norm(X))
        else:
            X = random_cp(shape, int(r), rng) if r else CPTensor.zeros(shape)
            if normalize and not X.is_zero:
                X = cp_scale(X, 1.0 / dense.frobenius_norm(cp_to_dense(X)))
        levels.append(X)
    return MSTensor(grid, fmt, levels)
