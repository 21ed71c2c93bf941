import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mrtensor import dense, tt
from mrtensor.dense import ShapeError
from mrtensor.tt import TTTensor

from conftest import rel_err


def random_dense_tt(rng, shape, ranks):
    return tt.tt_to_dense(tt.random_tt(shape, ranks, rng))


def test_constructor_validation():
    with pytest.raises(ShapeError):
        TTTensor((2, 3), [np.ones((1, 2, 2)), np.ones((1, 3, 1))])
    with pytest.raises(ShapeError):
        TTTensor((2,), [np.ones((1, 2, 2))])
    Z = TTTensor.zeros((3, 4, 5))
    assert Z.is_zero and Z.ranks == (0, 0) and Z.num_params == 0


def test_tt_svd_lossless_and_ranks(rng):
    T = random_dense_tt(rng, (4, 5, 6, 3), (2, 3, 2))
    X = tt.tt_svd(T)
    assert X.ranks == (2, 3, 2)
    assert rel_err(tt.tt_to_dense(X), T) < 1e-13
    A = rng.standard_normal((5, 7))
    assert tt.tt_svd(A).ranks == (5,)
    assert tt.tt_svd(np.zeros((3, 3))).is_zero
    v = rng.standard_normal(6)
    np.testing.assert_allclose(tt.tt_to_dense(tt.tt_svd(v)), v)


def test_tt_svd_matrix_is_truncated_svd(rng):
    A = rng.standard_normal((8, 6))
    X = tt.tt_svd(A, ranks=2)
    s = np.linalg.svd(A, compute_uv=False)
    assert np.linalg.norm(A - tt.tt_to_dense(X)) == pytest.approx(np.sqrt(np.sum(s[2:] ** 2)), rel=1e-12)


@pytest.mark.parametrize("eps", [0.3, 0.1, 0.01])
def test_tt_svd_tolerance(rng, eps):
    T = rng.standard_normal((5, 6, 4, 3))
    X = tt.tt_svd(T, eps=eps)
    assert np.linalg.norm(T - tt.tt_to_dense(X)) <= eps * np.linalg.norm(T) * (1 + 1e-12)


def test_round_after_add_restores_ranks(rng):
    X = tt.random_tt((4, 5, 6), (2, 3), rng)
    Y = tt.tt_round(tt.tt_add(X, X), eps=1e-12)
    assert Y.ranks == (2, 3)
    assert rel_err(tt.tt_to_dense(Y), 2 * tt.tt_to_dense(X)) < 1e-12


def test_round_matches_tt_svd(rng):
    T = rng.standard_normal((4, 5, 6))
    X = tt.tt_svd(T)
    for ranks in [(2, 2), (3, 1), (4, 6)]:
        a = tt.tt_to_dense(tt.tt_round(X, ranks=ranks))
        b = tt.tt_to_dense(tt.tt_svd(T, ranks=ranks))
        assert rel_err(a, b) < 1e-10


def test_algebra_against_dense(rng):
    shape = (3, 4, 5)
    X, Y = tt.random_tt(shape, (2, 3), rng), tt.random_tt(shape, (3, 2), rng)
    A, B = tt.tt_to_dense(X), tt.tt_to_dense(Y)
    assert rel_err(tt.tt_to_dense(tt.tt_add(X, Y)), A + B) < 1e-13
    assert rel_err(tt.tt_to_dense(X - Y), A - B) < 1e-13
    assert rel_err(tt.tt_to_dense(tt.tt_scale(X, -2.5)), -2.5 * A) < 1e-14
    H = tt.tt_hadamard(X, Y)
    assert H.ranks == (6, 6)
    assert rel_err(tt.tt_to_dense(H), A * B) < 1e-13
    assert tt.tt_inner(X, Y) == pytest.approx(dense.inner(A, B), rel=1e-12)
    assert tt.tt_norm(X) == pytest.approx(dense.frobenius_norm(A), rel=1e-12)
    assert tt.tt_sum(X) == pytest.approx(A.sum(), rel=1e-12)
    Z = TTTensor.zeros(shape)
    assert tt.tt_add(X, Z) is X and tt.tt_hadamard(X, Z).is_zero and tt.tt_norm(Z) == 0.0


@pytest.mark.parametrize("j", [1, 2, 3])
def test_mode_contract(rng, j):
    X = tt.random_tt((3, 4, 5), (2, 3), rng)
    v = rng.standard_normal(X.shape[j - 1])
    out = tt.tt_mode_contract(X, j, v)
    assert rel_err(tt.tt_to_dense(out), dense.mode_contract(tt.tt_to_dense(X), j, v)) < 1e-13
    w = tt.random_tt((7,), (), rng)
    val = tt.tt_to_dense(tt.tt_mode_contract(w, 1, np.ones(7)))
    assert val.shape == (1,) and val[0] == pytest.approx(tt.tt_to_dense(w).sum())


@st.composite
def tt_case(draw):
    bs = draw(st.sampled_from([2, 3]))
    d = draw(st.integers(1, 3))
    level = draw(st.integers(0, 2))
    base = draw(st.lists(st.integers(1, 3), min_size=d, max_size=d))
    ranks = draw(st.lists(st.integers(1, 3), min_size=d - 1, max_size=d - 1))
    seed = draw(st.integers(0, 2**32 - 1))
    return bs, level, tuple(base), tuple(ranks), np.random.default_rng(seed)


@given(tt_case())
def test_ext_ave_match_dense(case):
    bs, level, base, ranks, rng = case
    X = tt.random_tt(base, ranks, rng)
    E = tt.tt_ext(X, level, bs)
    assert E.ranks == X.ranks
    assert rel_err(tt.tt_to_dense(E), dense.ext(tt.tt_to_dense(X), level, bs)) < 1e-13
    Y = tt.random_tt(E.shape, ranks, rng)
    assert rel_err(tt.tt_to_dense(tt.tt_ave(Y, level, bs)), dense.ave(tt.tt_to_dense(Y), level, bs)) < 1e-12


# quasi-optimality against a brute-force ALS search ---------------------------

def _als_best(T, ranks, restarts, sweeps, rng):
    """Best TT approximation found by alternating least squares from many random starts."""
    shape, d = T.shape, T.ndim
    chain = (1,) + tuple(ranks) + (1,)
    best = np.inf
    for _ in range(restarts):
        cores = [rng.standard_normal((chain[k], n, chain[k + 1])) for k, n in enumerate(shape)]
        for _ in range(sweeps):
            for k in range(d):
                left = np.ones((1, 1))
                for c in cores[:k]:
                    left = (left @ c.reshape(c.shape[0], -1)).reshape(-1, c.shape[2])
                right = np.ones((1, 1))
                for c in reversed(cores[k + 1 :]):
                    right = (c.reshape(-1, c.shape[2]) @ right).reshape(c.shape[0], -1)
                # T[i, j, l] ~ left[i, a] G[a, j, b] right[b, l]
                M = T.reshape(left.shape[0], shape[k], right.shape[1])
                rhs = np.einsum("ia,ijl,bl->ajb", left, M, right)
                GL = np.linalg.pinv(left.T @ left)
                GR = np.linalg.pinv(right @ right.T)
                cores[k] = np.einsum("ac,cjd,db->ajb", GL, rhs, GR)
        err = np.linalg.norm(T - tt.tt_to_dense(TTTensor(shape, cores)))
        best = min(best, err)
    return best


@pytest.mark.parametrize("seed", [0, 1])
def test_tt_svd_quasi_optimal_vs_als_search(seed):
    rng = np.random.default_rng(seed)
    T = rng.standard_normal((4, 4, 4))
    ranks = (2, 2)
    best = _als_best(T, ranks, restarts=200, sweeps=15, rng=rng)
    err = np.linalg.norm(T - tt.tt_to_dense(tt.tt_svd(T, ranks=ranks)))
    assert err <= math.sqrt(T.ndim - 1) * best * (1 + 1e-10)
    # the search is a genuine competitor, not a straw man
    assert best <= err * (1 + 1e-8)
