"""Alternating multiresolution decomposition.

Each iteration sweeps down the grid hierarchy, averaging the residual with
the finer components removed, then sweeps back up, re-fitting every level to
what is left once the coarser, already-updated levels are subtracted. A
level update is a rank-limited rounding of an averaged residual, which
minimises the full-grid error for that level with all others held fixed.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import cp, dense, tt
from .dense import GridSpec
from .ms import MSTensor, payload_norm, payload_to_dense, payload_zeros
from .tt import TTTensor


@dataclass
class DecomposeConfig:
    """Settings for :func:`alternating_decompose`.

    ``ranks`` holds one entry per level (coarsest first); an entry is an int
    (CP rank, or a uniform TT chain) or an explicit TT rank chain. ``L``
    defaults to ``len(ranks) - 1``.
    """

    ranks: list
    bs: int = 2
    L: int = None
    max_iter: int = 10
    tol: float = 1e-8
    fmt: str = "tt"
    init: MSTensor = None
    seed: int = 0
    als_sweeps: int = 200
    als_tol: float = 1e-8
    hygiene_eps: float = 1e-14

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.fmt not in ("tt", "cp"):
            raise ValueError(f"unknown base format {self.fmt!r}")
        if self.L is None:
            self.L = len(self.ranks) - 1


@dataclass
class DecomposeTrace:
    residuals: list = field(default_factory=list)
    level_norms: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    clipped: dict = field(default_factory=dict)
    # restructured variant, keyed by level
    inner_residuals: dict = field(default_factory=dict)
    level_errors: dict = field(default_factory=dict)
    e_norms: dict = field(default_factory=dict)
    d_norms: dict = field(default_factory=dict)

    @property
    def iterations(self):
        return len(self.residuals)


def _level_budgets(ranks, grid, fmt, trace):
    if len(ranks) != grid.L + 1:
        raise ValueError(f"rank vector has {len(ranks)} entries, expected L + 1 = {grid.L + 1}")
    budgets = []
    for k, r in enumerate(ranks):
        shape = grid.level_shape(k)
        if fmt == "cp":
            if not np.isscalar(r):
                raise ValueError(f"cp ranks must be integers, got {r!r} at level {k}")
            if int(r) < 0:
                raise ValueError(f"negative rank at level {k}")
            budgets.append(int(r))
            continue
        requested = tt.normalize_ranks(r, len(shape))
        used = tt.clip_ranks(requested, shape)
        if used != requested:
            trace.clipped[k] = (requested, used)
        budgets.append(used)
    return budgets


def _is_empty(budget):
    return budget == 0 if np.isscalar(budget) else (len(budget) > 0 and min(budget) == 0)


class _DenseOps:
    """Level arithmetic on dense arrays, rounding into TT or CP payloads."""

    def __init__(self, cfg):
        self.cfg = cfg

    def sub(self, A, B):
        return A - payload_to_dense(B) if not isinstance(B, np.ndarray) else A - B

    def add(self, A, B):
        return A + payload_to_dense(B)

    def ave(self, A, bs):
        return dense.ave(A, 1, bs)

    def ext(self, A, bs):
        return dense.ext(A, 1, bs)

    def zeros(self, shape):
        return np.zeros(shape)

    def norm(self, A):
        return dense.frobenius_norm(A)

    def round(self, A, budget):
        cfg = self.cfg
        if _is_empty(budget):
            return payload_zeros(cfg.fmt, A.shape)
        if cfg.fmt == "tt":
            return tt.tt_svd(A, ranks=budget)
        return cp.cp_als(A, budget, init="hosvd", seed=cfg.seed, max_sweeps=cfg.als_sweeps, tol=cfg.als_tol)


class _TTOps:
    """Level arithmetic kept entirely in TT form, with light rounding after each update."""

    def __init__(self, cfg):
        self.eps = cfg.hygiene_eps

    def sub(self, A, B):
        return tt.tt_round(tt.tt_add(A, tt.tt_scale(B, -1.0)), eps=self.eps)

    def add(self, A, B):
        return tt.tt_round(tt.tt_add(A, B), eps=self.eps)

    def ave(self, A, bs):
        return tt.tt_ave(A, 1, bs)

    def ext(self, A, bs):
        return tt.tt_ext(A, 1, bs)

    def zeros(self, shape):
        return TTTensor.zeros(shape)

    def norm(self, A):
        return tt.tt_norm(A)

    def round(self, A, budget):
        if _is_empty(budget):
            return TTTensor.zeros(A.shape)
        return tt.tt_round(A, ranks=budget)


def _prepare(T, cfg):
    if isinstance(T, TTTensor):
        if cfg.fmt != "tt":
            raise ValueError("compressed input is only supported with the tt base format")
        return T, _TTOps(cfg)
    return dense.as_tensor(T), _DenseOps(cfg)


def alternating_decompose(T, cfg, callback=None):
    """Approximate ``T`` (dense array or :class:`TTTensor`) in multiresolution form.

    Runs at most ``cfg.max_iter`` down/up sweeps starting from all-zero levels
    (or ``cfg.init``), stopping early once the relative residual improvement
    falls below ``cfg.tol``. ``callback(n, levels)`` is invoked after every
    iteration. Returns the :class:`MSTensor` and a :class:`DecomposeTrace`.
    """
    T, ops = _prepare(T, cfg)
    grid = GridSpec.fit(T.shape, cfg.bs, cfg.L)
    L, bs = grid.L, grid.bs
    trace = DecomposeTrace()
    budgets = _level_budgets(cfg.ranks, grid, cfg.fmt, trace)

    if cfg.init is not None:
        if cfg.init.grid != grid or cfg.init.fmt != cfg.fmt:
            raise ValueError("initial guess does not match the grid or base format")
        levels = list(cfg.init.levels)
    else:
        levels = [payload_zeros(cfg.fmt, grid.level_shape(k)) for k in range(L + 1)]

    for n in range(1, cfg.max_iter + 1):
        start = time.perf_counter()
        down = [None] * (L + 1)
        down[L] = T
        for k in range(L, 0, -1):
            down[k - 1] = ops.ave(ops.sub(down[k], levels[k]), bs)
        up = ops.zeros(grid.level_shape(0))
        for k in range(L):
            levels[k] = ops.round(ops.sub(down[k], up), budgets[k])
            up = ops.ext(ops.add(up, levels[k]), bs)
        rest = ops.sub(T, up)
        levels[L] = ops.round(rest, budgets[L])
        residual = ops.norm(ops.sub(rest, levels[L]))

        trace.seconds.append(time.perf_counter() - start)
        trace.residuals.append(residual)
        trace.level_norms.append([payload_norm(X) for X in levels])
        if callback is not None:
            callback(n, list(levels))
        if residual == 0.0:
            break
        if cfg.tol is not None and n > 1:
            prev = trace.residuals[-2]
            if prev > 0 and (prev - residual) / prev < cfg.tol:
                break
    return MSTensor(grid, cfg.fmt, levels), trace


def _combine_ranks(ranks, fmt, d):
    if fmt == "cp":
        return sum(int(r) for r in ranks)
    chains = [tt.normalize_ranks(r, d) for r in ranks]
    return tuple(sum(c) for c in zip(*chains)) if chains else (0,) * (d - 1)


def restructured_decompose(T, cfg, reference=None):
    """Level-by-level variant: converge one scale at a time.

    For each level ``k`` the residual left by the already-fixed coarser
    levels is decomposed with a two-level rank vector: ``r_k`` on level ``k``
    and ``r_{k+1} + ... + r_L`` on the finest level. The level-``k`` result
    is kept and the finest-level companion discarded. ``cfg.max_iter`` and
    ``cfg.tol`` apply to each inner run.

    If ``reference`` (the exact MS decomposition of ``T``) is given, the trace
    also records per-iteration errors ``||T_k - T_k^(n)||`` and the norms of
    the two amalgamated residual terms of the local convergence analysis.
    """
    T, ops = _prepare(T, cfg)
    grid = GridSpec.fit(T.shape, cfg.bs, cfg.L)
    L, bs, d = grid.L, grid.bs, grid.d
    trace = DecomposeTrace()
    budgets = _level_budgets(cfg.ranks, grid, cfg.fmt, trace)
    levels = [payload_zeros(cfg.fmt, grid.level_shape(k)) for k in range(L + 1)]

    diag = None
    if reference is not None:
        diag = _Diagnostics(T, reference)

    residual = T
    for k in range(L + 1):
        if k > 0:
            residual = ops.sub(residual, _extend(levels[k - 1], L - k + 1, bs, ops))
        if _is_empty(budgets[k]):
            continue
        sub_ranks = [0] * (L + 1) if cfg.fmt == "cp" else [(0,) * (d - 1)] * (L + 1)
        sub_ranks[k] = budgets[k]
        if k < L:
            sub_ranks[L] = _combine_ranks(budgets[k + 1 :], cfg.fmt, d)
        init = None
        if cfg.init is not None:
            init = _two_level_init(cfg.init, k, budgets, cfg.fmt)
        sub_cfg = DecomposeConfig(
            ranks=sub_ranks, bs=bs, L=L, max_iter=cfg.max_iter, tol=cfg.tol, fmt=cfg.fmt,
            init=init, seed=cfg.seed, als_sweeps=cfg.als_sweeps, als_tol=cfg.als_tol,
            hygiene_eps=cfg.hygiene_eps,
        )
        callback = diag.recorder(k, levels, trace) if diag else None
        result, inner = alternating_decompose(residual, sub_cfg, callback=callback)
        levels[k] = result.levels[k]
        trace.inner_residuals[k] = inner.residuals
        trace.seconds.extend(inner.seconds)
        trace.residuals.append(inner.residuals[-1])
        trace.level_norms.append([payload_norm(X) for X in levels])
        trace.clipped.update({(k, key): v for key, v in inner.clipped.items()})
    return MSTensor(grid, cfg.fmt, levels), trace


def _extend(X, level, bs, ops):
    if isinstance(ops, _TTOps):
        return tt.tt_ext(X, level, bs)
    return dense.ext(payload_to_dense(X), level, bs)


def _two_level_init(init, k, budgets, fmt):
    # level k from the guess; finest level carries everything finer than k
    grid = init.grid
    L, bs = grid.L, grid.bs
    levels = [payload_zeros(fmt, grid.level_shape(i)) for i in range(L + 1)]
    levels[k] = init.levels[k]
    if k < L:
        acc = np.zeros(grid.level_shape(k + 1))
        for i in range(k + 1, L + 1):
            if i > k + 1:
                acc = dense.ext(acc, 1, bs)
            acc = acc + payload_to_dense(init.levels[i])
        if fmt == "tt":
            levels[L] = tt.tt_svd(acc)
        else:
            levels[L] = cp.cp_als(acc, _combine_ranks(budgets[k + 1 :], fmt, grid.d))
    return MSTensor(grid, fmt, levels)


class _Diagnostics:
    """Dense bookkeeping of errors against a known exact decomposition."""

    def __init__(self, T, reference):
        self.ref = reference
        self.L, self.bs = reference.L, reference.bs
        self.ref_dense = [payload_to_dense(X) for X in reference.levels]
        self.T = T if isinstance(T, np.ndarray) else tt.tt_to_dense(T)
        recon = np.zeros(reference.shape)
        for k, X in enumerate(self.ref_dense):
            recon += dense.ext(X, self.L - k, self.bs)
        self.R = self.T - recon

    def recorder(self, k, fixed, trace):
        L, bs = self.L, self.bs
        trace.level_errors[k] = []
        trace.e_norms[k] = []
        trace.d_norms[k] = []
        # sum over finished coarser levels of ext(T_l - T_l^(M))
        lag = np.zeros(self.ref.shape)
        for i in range(k):
            lag += dense.ext(self.ref_dense[i] - payload_to_dense(fixed[i]), L - i, bs)
        finer = np.zeros(self.ref.shape)
        for i in range(k + 1, L + 1):
            finer += dense.ext(self.ref_dense[i], L - i, bs)

        def record(n, levels):
            Tk = payload_to_dense(levels[k])
            S = payload_to_dense(levels[L]) if k < L else np.zeros(self.ref.shape)
            trace.level_errors[k].append(dense.frobenius_norm(self.ref_dense[k] - Tk))
            E = dense.ave(self.R - S + finer + lag, L - k, bs)
            D = self.R + dense.ext(self.ref_dense[k] - Tk, L - k, bs) + lag
            trace.e_norms[k].append(dense.frobenius_norm(E))
            trace.d_norms[k].append(dense.frobenius_norm(D))

        return record
