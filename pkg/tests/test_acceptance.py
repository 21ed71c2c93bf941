"""Acceptance suite: one test per criterion, each with its runtime budget.

Run ``pytest tests/test_acceptance.py`` (or this file directly); a
PASS/FAIL line per criterion is printed at the end of the session.
"""

import io as stdio
import math
import time

import numpy as np
import pytest

from mrtensor import cp, dense, experiments, io, tt
from mrtensor.cli import main as cli_main
from mrtensor.decompose import DecomposeConfig, alternating_decompose
from mrtensor.dense import GridSpec
from mrtensor.ms import (
    level_norms,
    ms_add,
    ms_hadamard,
    ms_mode_contract,
    ms_norm,
    ms_reconstruct,
    ms_round,
)
from mrtensor.theory import (
    block_deviation_sum,
    block_deviation_sum_brute,
    closedness_error,
    closedness_sequence,
    random_ms,
)


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.1f}s, budget {self.seconds}s"


def rel(a, b):
    nb = float(np.linalg.norm(b))
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b))) / nb if nb > 0 else float(np.linalg.norm(a))


def _random_grid_case(rng, max_mode=16):
    bs = int(rng.choice([2, 3]))
    d = int(rng.integers(1, 5))
    # total refinement the identities need, kept within max_mode per mode
    depth = int(rng.integers(1, 3 if bs == 2 else 2) + 1)
    coarse_cap = max(1, max_mode // bs**depth)
    base = tuple(int(rng.integers(1, coarse_cap + 1)) for _ in range(d))
    return bs, depth, base


@pytest.mark.criterion(1, "grid operator identities and adjoint (200 tensors)")
def test_criterion_1_operator_identities():
    rng = np.random.default_rng(1)
    with Budget(10):
        for _ in range(200):
            bs, depth, base = _random_grid_case(rng)
            T = rng.standard_normal(base)
            l1 = int(rng.integers(0, depth + 1))
            l2 = depth - l1
            # ext composition
            a = dense.ext(dense.ext(T, l2, bs), l1, bs)
            assert rel(a, dense.ext(T, depth, bs)) <= 1e-12
            # ave composition
            S = rng.standard_normal(tuple(n * bs**depth for n in base))
            assert rel(dense.ave(dense.ave(S, l2, bs), l1, bs), dense.ave(S, depth, bs)) <= 1e-12
            # left inverse
            assert rel(dense.ave(dense.ext(T, depth, bs), depth, bs), T) <= 1e-12
            # ave_l after ext_k, l <= k
            k, ell = depth, l1
            assert rel(dense.ave(dense.ext(T, k, bs), ell, bs), dense.ext(T, k - ell, bs)) <= 1e-12
            # adjoint: <A, ext S> = bs^(l d) <ave A, S>
            lhs = dense.inner(S, dense.ext(T, depth, bs))
            rhs = bs ** (depth * T.ndim) * dense.inner(dense.ave(S, depth, bs), T)
            assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), np.linalg.norm(S) * np.linalg.norm(dense.ext(T, depth, bs)))


@pytest.mark.criterion(2, "TT and CP ext/ave match dense (100 instances)")
def test_criterion_2_compressed_grid_operators():
    rng = np.random.default_rng(2)
    with Budget(10):
        for _ in range(100):
            bs, depth, base = _random_grid_case(rng)
            d = len(base)
            ranks = tuple(int(r) for r in rng.integers(1, 4, size=d - 1))
            X = tt.random_tt(base, ranks, rng)
            assert rel(tt.tt_to_dense(tt.tt_ext(X, depth, bs)), dense.ext(tt.tt_to_dense(X), depth, bs)) <= 1e-12
            fine = tuple(n * bs**depth for n in base)
            Y = tt.random_tt(fine, ranks, rng)
            assert rel(tt.tt_to_dense(tt.tt_ave(Y, depth, bs)), dense.ave(tt.tt_to_dense(Y), depth, bs)) <= 1e-12
            r = int(rng.integers(1, 4))
            C = cp.random_cp(base, r, rng)
            assert rel(cp.cp_to_dense(cp.cp_ext(C, depth, bs)), dense.ext(cp.cp_to_dense(C), depth, bs)) <= 1e-12
            D = cp.random_cp(fine, r, rng)
            assert rel(cp.cp_to_dense(cp.cp_ave(D, depth, bs)), dense.ave(cp.cp_to_dense(D), depth, bs)) <= 1e-12


@pytest.mark.criterion(3, "a-priori bound at n=256: validity, 9.65 pi/n constant, sum identity")
def test_criterion_3_theorem_bound():
    with Budget(60):
        res, err, constant = experiments.bound_report(256, d=3)
        print(f"bound {res.bound:.4e}, true error {err:.4e}, constant {constant:.4f}")
        assert err <= res.bound
        assert abs(constant - 9.65) <= 0.02 * 9.65
        for b in (2, 3, 4, 8):
            assert block_deviation_sum_brute(b) == block_deviation_sum(b)


@pytest.mark.criterion(4, "motivating example: O(1/n) error, below the rank-2 CP floor")
def test_criterion_4_motivating_scaling():
    with Budget(120):
        errs = {}
        for n in (32, 64, 128, 256):
            T, _ = experiments.multiscale_test_tensor(n, 3)
            L = int(math.log2(n))
            X, _ = alternating_decompose(T, DecomposeConfig(ranks=[0] * (L - 2) + [1, 1, 1], fmt="cp", max_iter=1))
            errs[n] = rel(ms_reconstruct(X), T)
            del T, X
        print("errors", errs)
        for n in (64, 128):
            assert 1.6 <= errs[n] / errs[2 * n] <= 2.4
        assert errs[256] < 1 / math.sqrt(3) - 0.1


@pytest.mark.criterion(5, "alternating sweeps: monotone (d=2, 50 runs) and quasi-monotone (d=3)")
def test_criterion_5_monotonicity():
    with Budget(120):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            T = rng.standard_normal((64, 64))
            ranks = [int(r) for r in rng.integers(0, 4, size=7)]
            ranks[-1] = max(ranks[-1], 1)
            _, trace = alternating_decompose(T, DecomposeConfig(ranks=ranks, max_iter=10, tol=0.0))
            r = trace.residuals
            assert all(b <= a + 1e-10 for a, b in zip(r, r[1:])), (seed, ranks, r)
        for seed in range(5):
            rng = np.random.default_rng(100 + seed)
            T = rng.standard_normal((16, 16, 16))
            _, trace = alternating_decompose(T, DecomposeConfig(ranks=[1, 2, 2, 3, 3], max_iter=5, tol=0.0))
            assert trace.residuals[-1] <= trace.residuals[0] + 1e-10


@pytest.mark.criterion(6, "closedness: vanishing error with diverging components at n=1e6")
def test_criterion_6_closedness():
    with Budget(1):
        n = 10**6
        T, witness = closedness_sequence(n)
        numeric = dense.frobenius_norm(ms_reconstruct(witness) - np.diag([-1.0, 1.0]))
        closed = closedness_error(n)
        coarse = dense.frobenius_norm(dense.ext(tt.tt_to_dense(witness.levels[0]), 1, 2))
        print(f"numeric {numeric:.6e}, closed form {closed:.6e}, coarse component {coarse:.3e}")
        assert numeric < 1.5e-6 and closed < 1.5e-6
        assert abs(numeric - closed) <= 1e-9
        assert coarse >= 2e6


@pytest.mark.criterion(7, "local convergence of the level-by-level variant (5 seeds)")
def test_criterion_7_local_convergence():
    with Budget(120):
        for seed in range(5):
            _, summary = experiments.local_convergence(n=64, seed=seed, perturbation=0.1)
            print(seed, summary)
            for k, (err, ratio) in summary.items():
                assert err < 1e-8, (seed, k, err)
                if not math.isnan(ratio):
                    assert ratio < 0.95, (seed, k, ratio)


@pytest.mark.criterion(8, "synthetic multiscale image: >= 1.2x compression at error 0.05")
def test_criterion_8_compression_advantage():
    with Budget(120):
        T = experiments.synthetic_multiscale_image(n=256, L=4, scales=(0, 2, 4), noise=0.01, seed=0)
        advantage, ms_ratio, base_ratio, _ = experiments.compression_advantage(T, range(1, 13), target=0.05, L=4)
        print(f"MS ratio {ms_ratio:.2f}, SVD ratio {base_ratio:.2f}, advantage {advantage:.3f}")
        assert advantage >= 1.2


@pytest.mark.criterion(9, "compressed MS operations against dense oracles (50 instances)")
def test_criterion_9_ms_operations():
    rng = np.random.default_rng(9)
    with Budget(60):
        for _ in range(50):
            d = int(rng.integers(1, 4))
            L = int(rng.integers(0, 4))
            n = int(rng.choice([m for m in (8, 16, 32) if m % 2**L == 0 and m**d <= 32**3]))
            grid = GridSpec(2, L, (n,) * d)
            X = random_ms(grid, [int(r) for r in rng.integers(0, 3, size=L + 1)], rng)
            Y = random_ms(grid, [int(r) for r in rng.integers(0, 3, size=L + 1)], rng)
            A, B = ms_reconstruct(X), ms_reconstruct(Y)
            assert rel(ms_reconstruct(ms_add(X, Y)), A + B) <= 1e-10
            assert rel(ms_reconstruct(ms_hadamard(X, Y)), A * B) <= 1e-10
            j = int(rng.integers(1, d + 1))
            v = rng.standard_normal(n)
            C = ms_mode_contract(X, j, v)
            expected = dense.mode_contract(A, j, v)
            got = np.array([C]) if d == 1 else ms_reconstruct(C)
            assert rel(got, expected) <= 1e-10
            assert abs(ms_norm(X) - np.linalg.norm(A)) <= 1e-10 * np.linalg.norm(A)
            for eps in (0.1, 0.01):
                R = ms_round(X, eps)
                assert np.linalg.norm(ms_reconstruct(R) - A) <= eps * sum(level_norms(X)) * (1 + 1e-12)


def _cli(*argv):
    out = stdio.StringIO()
    code = cli_main(list(argv), out=out)
    assert code == 0
    return out.getvalue()


@pytest.mark.criterion(10, "serialization round-trips, lossless CLI pipeline, deterministic bench CSV")
def test_criterion_10_serialization_and_cli(tmp_path):
    rng = np.random.default_rng(10)
    with Budget(10):
        for fmt in ("tt", "cp"):
            X = random_ms(GridSpec(2, 2, (8, 8, 4)), [1, 2, 2], rng, fmt=fmt)
            data = io.archive_to_bytes(X)
            assert io.archive_to_bytes(io.archive_from_bytes(data)) == data

        src = tmp_path / "t.mrt0"
        io.write_tensor(src, rng.standard_normal((16, 16)))
        arc, rec = tmp_path / "t.mrtc", tmp_path / "r.mrt0"
        _cli("compress", "--input", str(src), "--base-format", "tt", "--bs", "2", "--levels", "2",
             "--ranks", "0,0,16", "--max-iter", "1", "--output", str(arc))
        _cli("decompress", "--input", str(arc), "--output", str(rec))
        reported = float(_cli("error", "--original", str(src), "--compressed", str(arc)).split(":")[1])
        assert reported <= 1e-10
        assert reported == pytest.approx(rel(io.read_tensor(rec), io.read_tensor(src)), rel=1e-12, abs=1e-15)

        outs = []
        for name in ("a.csv", "b.csv"):
            _cli("bench", "--input", str(src), "--base-format", "tt", "--bs", "2", "--levels", "2",
                 "--rank-sweep", "1:3", "--max-iter", "3", "--seed", "7", "--csv", str(tmp_path / name),
                 "--no-timing")
            outs.append((tmp_path / name).read_bytes())
        assert outs[0] == outs[1]
        assert len(outs[0].decode().strip().splitlines()) == 1 + 3 * 2


@pytest.mark.slow
def test_local_convergence_full_size():
    for seed in range(2):
        _, summary = experiments.local_convergence(n=128, seed=seed, perturbation=0.1, max_iter=400)
        print(seed, summary)
        for k, (err, ratio) in summary.items():
            assert err < 1e-8
            if not math.isnan(ratio):
                assert ratio < 1.0


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))
