"""Experiment drivers shared by the CLI demos, the benchmark and the tests."""

import math
import time
from dataclasses import dataclass

import numpy as np

from . import cp, dense, tt
from .decompose import DecomposeConfig, alternating_decompose, restructured_decompose
from .dense import GridSpec
from .ms import MSTensor, ms_reconstruct, ms_storage, payload_to_dense
from .svd import truncated_svd
from .theory import (
    closedness_error,
    closedness_sequence,
    multiscale_test_tensor,
    prescribed_ms_approximation,
    random_ms,
    theorem_bound,
)


def relative_error(T, approx):
    norm = dense.frobenius_norm(T)
    err = dense.frobenius_norm(T - approx)
    return err / norm if norm > 0 else err


# synthetic multiscale image ----------------------------------------------

def synthetic_multiscale_image(n=256, bs=2, L=4, scales=(0, 2, 4), rank=4, noise=0.01, seed=0):
    """Sum of low-rank matrices living on the given grid levels, plus white noise.

    Each planted level has ``rank`` random orthonormal directions with
    singular values ``1, 1/2, 1/4, ...`` and is scaled so that every
    extended contribution has unit norm. Gaussian noise of relative size
    ``noise`` is added last.
    """
    rng = np.random.default_rng(seed)
    grid = GridSpec(bs, L, (n, n))
    T = np.zeros((n, n))
    for k in scales:
        m = grid.level_shape(k)[0]
        U, _ = np.linalg.qr(rng.standard_normal((m, rank)))
        V, _ = np.linalg.qr(rng.standard_normal((m, rank)))
        A = (U * 0.5 ** np.arange(rank)) @ V.T
        E = dense.ext(A, L - k, bs)
        T += E / dense.frobenius_norm(E)
    N = rng.standard_normal((n, n))
    T += noise * dense.frobenius_norm(T) * N / dense.frobenius_norm(N)
    return T


# compression sweeps --------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    method: str
    rank: int
    relative_error: float
    compression_ratio: float
    seconds: float


def ms_compress(T, rank_vector, bs=2, L=None, fmt="tt", max_iter=10, seed=0, restructured=False):
    if L is None:
        L = len(rank_vector) - 1
    cfg = DecomposeConfig(ranks=list(rank_vector), bs=bs, L=L, max_iter=max_iter, fmt=fmt, seed=seed)
    run = restructured_decompose if restructured else alternating_decompose
    return run(T, cfg)


def baseline_compress(T, rank, fmt="tt", seed=0):
    """Single-grid compression at uniform rank: truncated SVD for matrices, TT-SVD otherwise, or CP-ALS."""
    if fmt == "cp":
        X = cp.cp_als(T, rank, seed=seed)
        return cp.cp_to_dense(X), X.num_params
    if T.ndim == 2:
        U, s, Vt = truncated_svd(T, max_rank=rank)
        return (U * s) @ Vt, len(s) * sum(T.shape)
    X = tt.tt_svd(T, ranks=rank)
    return tt.tt_to_dense(X), X.num_params


def rank_sweep(T, ranks, bs=2, L=None, fmt="tt", max_iter=10, seed=0, timing=True):
    """MS at uniform rank vector ``(r, ..., r)`` and the single-grid baseline, for each ``r``."""
    if L is None:
        L = GridSpec.fit(T.shape, bs).L
    size = math.prod(T.shape)
    rows = []
    for r in ranks:
        start = time.perf_counter()
        X, _ = ms_compress(T, [r] * (L + 1), bs=bs, L=L, fmt=fmt, max_iter=max_iter, seed=seed)
        err = relative_error(T, ms_reconstruct(X))
        secs = time.perf_counter() - start if timing else 0.0
        rows.append(SweepRow("ms", r, err, ms_storage(X).ratio, secs))

        start = time.perf_counter()
        approx, params = baseline_compress(T, r, fmt=fmt, seed=seed)
        err = relative_error(T, approx)
        secs = time.perf_counter() - start if timing else 0.0
        rows.append(SweepRow("baseline", r, err, size / params if params else math.inf, secs))
    return rows


def ratio_at_error(errors, ratios, target):
    """Compression ratio at ``target`` error by log-log interpolation along the sweep.

    Uses the first bracketing pair of consecutive sweep points; returns
    ``nan`` when the sweep never reaches the target.
    """
    e = np.asarray(errors, dtype=np.float64)
    c = np.asarray(ratios, dtype=np.float64)
    for i in range(len(e) - 1):
        hi, lo = e[i], e[i + 1]
        if hi >= target >= lo and hi > lo:
            t = (math.log(hi) - math.log(target)) / (math.log(hi) - math.log(lo))
            return math.exp((1 - t) * math.log(c[i]) + t * math.log(c[i + 1]))
    hit = np.flatnonzero(e == target)
    return float(c[hit[0]]) if hit.size else math.nan


def compression_advantage(T, ranks, target=0.05, bs=2, L=None, max_iter=10):
    """MS ratio over baseline ratio at the matched error ``target``."""
    rows = rank_sweep(T, ranks, bs=bs, L=L, max_iter=max_iter, timing=False)
    ms_rows = [r for r in rows if r.method == "ms"]
    base_rows = [r for r in rows if r.method == "baseline"]
    ms_ratio = ratio_at_error([r.relative_error for r in ms_rows], [r.compression_ratio for r in ms_rows], target)
    base_ratio = ratio_at_error(
        [r.relative_error for r in base_rows], [r.compression_ratio for r in base_rows], target
    )
    return ms_ratio / base_ratio, ms_ratio, base_ratio, rows


# local convergence ----------------------------------------------------------

def local_convergence_ranks(n):
    """Matrix rank vector for the local-convergence instance on an ``n x n`` grid.

    ``n = 64`` gives ``(0, 0, 0, 4, 0, 5, 5)``; larger ``n`` keep the level-3
    rank at ``n / 16`` and ranks ``5 n / 64`` from level 5 up, with one
    extra finest level per doubling.
    """
    if n == 128:
        return (0, 0, 0, 8, 0, 10, 10, 10)
    L = int(round(math.log2(n)))
    if 2**L != n or L < 5:
        raise ValueError(f"n must be a power of two >= 32, got {n}")
    ranks = [0] * (L + 1)
    ranks[3] = max(1, n // 16)
    for k in range(5, L + 1):
        ranks[k] = max(1, 5 * n // 64)
    return tuple(ranks)


def local_convergence_instance(n=64, seed=0, perturbation=0.1, ranks=None):
    """Exact MS matrix with unit-norm random levels and a perturbed starting guess.

    Returns ``(T, reference, init, ranks)``. Every nonzero level of ``init``
    equals the reference level plus a random perturbation of relative size
    ``perturbation``, recompressed to the level's rank.
    """
    ranks = tuple(ranks) if ranks is not None else local_convergence_ranks(n)
    L = len(ranks) - 1
    rng = np.random.default_rng(seed)
    grid = GridSpec(2, L, (n, n))
    ref = random_ms(grid, ranks, rng, fmt="tt", normalize=True)
    init_levels = []
    for k, X in enumerate(ref.levels):
        if X.is_zero:
            init_levels.append(X)
            continue
        A = payload_to_dense(X)
        P = rng.standard_normal(A.shape)
        A = A + perturbation * dense.frobenius_norm(A) * P / dense.frobenius_norm(P)
        init_levels.append(tt.tt_svd(A, ranks=ranks[k]))
    init = MSTensor(grid, "tt", init_levels)
    return ms_reconstruct(ref), ref, init, ranks


def geometric_ratio(errors, start=5, stop=25):
    """Average per-iteration contraction between two (1-based) iterations."""
    last = min(stop, len(errors)) - 1
    first = start - 1
    if last <= first or errors[first] <= 0:
        return math.nan
    return (errors[last] / errors[first]) ** (1.0 / (last - first))


def local_convergence(n=64, seed=0, perturbation=0.1, max_iter=150, ranks=None):
    """Run the level-by-level decomposition on an exact instance.

    Returns the trace and, per nonzero level, the final error and the
    measured geometric ratio over iterations 5 to 25. The finest level is
    fitted in one step once the coarser levels are fixed, so its ratio is
    reported as ``nan``.
    """
    T, ref, init, ranks = local_convergence_instance(n, seed, perturbation, ranks)
    cfg = DecomposeConfig(ranks=list(ranks), bs=2, max_iter=max_iter, tol=0.0, init=init)
    _, trace = restructured_decompose(T, cfg, reference=ref)
    summary = {}
    L = len(ranks) - 1
    for k, errs in trace.level_errors.items():
        summary[k] = (errs[-1], geometric_ratio(errs) if k < L else math.nan)
    return trace, summary


# motivating example -------------------------------------------------------------

def motivating_scaling(ns, d=3, max_iter=1):
    """Relative errors of MS-CP ``(0, ..., 0, 1, 1, 1)`` and rank-2 CP on the three-scale tensor."""
    rows = []
    for n in ns:
        T, _ = multiscale_test_tensor(n, d)
        L = GridSpec.fit(T.shape, 2).L
        start = time.perf_counter()
        X, _ = ms_compress(T, [0] * (L - 2) + [1, 1, 1], L=L, fmt="cp", max_iter=max_iter)
        ms_err = relative_error(T, ms_reconstruct(X))
        secs = time.perf_counter() - start
        cp_err = relative_error(T, cp.cp_to_dense(cp.cp_als(T, 2)))
        rows.append((n, ms_err, cp_err, secs))
    return rows


def bound_report(n, d=3):
    """A-priori error bound versus the true error of the prescribed approximant."""
    T, comps = multiscale_test_tensor(n, d)
    finest_first = comps[::-1]
    res = theorem_bound(finest_first, [0.25, 0.5, 1.0], 1.0, 2, n, 0.0, math.pi)
    X = prescribed_ms_approximation(finest_first)
    err = dense.frobenius_norm(T - ms_reconstruct(X))
    # large-n constant in units of pi / n times the norm of the coarsest term
    constant = res.asymptotic / (math.pi / n * res.term_norms[-1])
    return res, err, constant


def closedness_rows(n_max):
    """``(n, numeric error, closed-form error, coarse component norm)`` for ``n = 10, 100, ..., n_max``."""
    rows = []
    n = 10
    ns = []
    while n < n_max:
        ns.append(n)
        n *= 10
    ns.append(int(n_max))
    for n in ns:
        _, witness = closedness_sequence(n)
        numeric = _closedness_numeric(n)
        coarse = dense.frobenius_norm(dense.ext(payload_to_dense(witness.levels[0]), 1, 2))
        rows.append((n, numeric, closedness_error(n), coarse))
    return rows


def _closedness_numeric(n):
    _, witness = closedness_sequence(n)
    return dense.frobenius_norm(ms_reconstruct(witness) - np.diag([-1.0, 1.0]))
