"""Dense/low-rank linear-algebra kernels."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bse_rbx import (
    LowRankFactor,
    NotPdError,
    NotPsdError,
    RankExceededError,
    frobenius_tail_rank,
    nonsym_eig,
    pivoted_cholesky,
    solve_spd,
    spectral_norm_est,
    sym_eig,
    sym_sqrt,
    truncate_symmetric,
    truncated_svd,
)
from conftest import random_spd

# 16x16 geometric-decay PSD test matrix, seed 42: eigenvalue ladder and
# the trace-tail rank at 1e-6, both frozen from a dense eigendecomposition.
DECAY16_EIGS = [
    1.401651826433e+01, 2.309279051611e+00, 8.737945862451e-01,
    4.638712987438e-01, 1.098774627732e-01, 3.208662599579e-02,
    2.037173337293e-02, 7.132397731233e-03,
]
DECAY16_TRACE = 17.83669493243552
DECAY16_RANK_1E6 = 15


def decay16():
    rng = np.random.default_rng(42)
    b = np.zeros((16, 16))
    for k in range(16):
        w = rng.standard_normal(16)
        b += np.exp(-float(k)) * np.outer(w, w)
    return (b + b.T) / 2.0


def chol_of(b, tol, max_rank=None):
    return pivoted_cholesky(lambda i, j: b[i, j], np.diag(b).copy(),
                            b.shape[0], tol, max_rank=max_rank)


def test_pivoted_cholesky_identity():
    lr = chol_of(np.eye(4), 1e-8)
    assert lr.rank == 4
    assert_allclose(lr.dense(), np.eye(4), atol=1e-14)


def test_pivoted_cholesky_rank_one():
    v = np.array([3.0, 0.0, -4.0])
    lr = chol_of(np.outer(v, v), 1e-12)
    assert lr.rank == 1
    # column is v up to sign
    assert_allclose(np.abs(lr.factor[:, 0]), np.abs(v), atol=1e-12)


def test_pivoted_cholesky_rejects_indefinite():
    b = np.diag([1.0, -1.0])
    with pytest.raises(NotPsdError):
        chol_of(b, 1e-10)


def test_pivoted_cholesky_rank_cap():
    b = np.diag([4.0, 3.0, 2.0, 1.0])
    with pytest.raises(RankExceededError):
        chol_of(b, 1e-10, max_rank=2)
    lr = chol_of(b, 3.5, max_rank=2)  # residual trace 3 <= 3.5 after 2 pivots
    assert lr.rank == 2


def test_pivoted_cholesky_decay16_matches_eig_tail_oracle():
    b = decay16()
    vals = np.linalg.eigvalsh(b)[::-1]
    assert_allclose(vals[:8], DECAY16_EIGS, rtol=1e-9)
    assert_allclose(b.trace(), DECAY16_TRACE, rtol=1e-12)

    tol = 1e-6
    lr = chol_of(b, tol)
    resid = b - lr.dense()
    assert np.trace(resid) <= tol * (1 + 1e-9)
    # greedy pivoting may need one extra column over the optimal
    # eigenvalue-tail count, never fewer
    assert DECAY16_RANK_1E6 <= lr.rank <= DECAY16_RANK_1E6 + 1
    assert np.linalg.norm(resid) <= 1e-2


def test_pivoted_cholesky_zero_matrix():
    lr = chol_of(np.zeros((5, 5)), 1e-10)
    assert lr.rank == 0
    assert lr.dense().shape == (5, 5)
    assert not lr.dense().any()


def test_frobenius_tail_rank():
    s = np.array([3.0, 1.0, 1e-9])
    assert frobenius_tail_rank(s, 1e-6) == 2
    assert frobenius_tail_rank(s, 0.0) == 3
    assert frobenius_tail_rank(s, 10.0) == 0
    assert frobenius_tail_rank(np.array([]), 1e-6) == 0


def test_truncated_svd_zero_and_diag():
    u, s, vt = truncated_svd(np.zeros((4, 3)), 0.0)
    assert s.size == 0 and u.shape == (4, 0) and vt.shape == (0, 3)
    _, s, _ = truncated_svd(np.diag([3.0, 1.0, 1e-9]), 1e-6)
    assert_allclose(s, [3.0, 1.0], rtol=1e-12)


def test_truncated_svd_reconstruction_bound(rng):
    m = rng.standard_normal((20, 12))
    for eps in [1e-8, 1e-2, 0.5]:
        u, s, vt = truncated_svd(m, eps)
        assert np.linalg.norm(m - (u * s) @ vt) <= eps * (1 + 1e-12)


def test_truncated_svd_rank_monotone_in_eps(rng):
    m = rng.standard_normal((15, 15))
    ranks = [truncated_svd(m, eps)[1].size
             for eps in np.geomspace(1e-10, 10.0, 12)]
    assert all(a >= b for a, b in zip(ranks, ranks[1:]))


def test_truncate_symmetric():
    m = np.diag([5.0, -3.0, 1.0, 1e-9])
    lr = truncate_symmetric(m, 1e-6)
    assert lr.rank == 3
    assert_allclose(lr.dense(), np.diag([5.0, -3.0, 1.0, 0.0]), atol=1e-12)

    rng = np.random.default_rng(3)
    a = rng.standard_normal((10, 10))
    a = a + a.T
    for eps in [0.0, 1e-3, 1.0]:
        lr = truncate_symmetric(a, eps)
        d = lr.dense()
        assert_allclose(d, d.T, atol=1e-13)
        assert np.linalg.norm(a - d) <= eps + 1e-12 * np.linalg.norm(a)


def test_sym_eig_examples():
    ep = sym_eig(np.diag([2.0, -1.0]))
    assert_allclose(ep.values, [-1.0, 2.0], atol=1e-14)
    ep = sym_eig(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert_allclose(ep.values, [-1.0, 1.0], atol=1e-14)
    assert_allclose(ep.vectors.T @ ep.vectors, np.eye(2), atol=1e-14)


def test_sym_eig_trace_identity(rng):
    m = rng.standard_normal((30, 30))
    m = m + m.T
    ep = sym_eig(m)
    assert abs(ep.values.sum() - np.trace(m)) <= 1e-10 * max(
        1.0, abs(np.trace(m)))
    assert_allclose(ep.vectors @ np.diag(ep.values) @ ep.vectors.T, m,
                    atol=1e-12 * np.linalg.norm(m))


def test_nonsym_eig_rotation_gives_imaginary_pair():
    ep = nonsym_eig(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    assert_allclose(sorted(ep.values.imag), [-1.0, 1.0], atol=1e-14)
    assert_allclose(ep.values.real, [0.0, 0.0], atol=1e-14)


def test_nonsym_eig_diag_and_symmetric_agreement(rng):
    ep = nonsym_eig(np.diag([1.0, 2.0, 3.0]))
    assert_allclose(ep.values, [1.0, 2.0, 3.0], atol=1e-14)

    m = rng.standard_normal((12, 12))
    m = m + m.T
    assert_allclose(nonsym_eig(m).values.real, sym_eig(m).values, atol=1e-8)
    assert_allclose(nonsym_eig(m).values.imag, 0.0, atol=1e-10)


def test_sym_sqrt_examples():
    assert_allclose(sym_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]),
                    atol=1e-13)
    assert_allclose(sym_sqrt(np.eye(3)), np.eye(3), atol=1e-14)
    with pytest.raises(NotPdError):
        sym_sqrt(np.diag([1.0, 0.0]))
    with pytest.raises(NotPdError):
        sym_sqrt(np.diag([1.0, -2.0]))


def test_sym_sqrt_square_and_commute():
    a = random_spd(20, seed=11)
    s = sym_sqrt(a)
    assert_allclose(s @ s, a, atol=1e-9 * np.linalg.norm(a))
    assert_allclose(s @ a, a @ s, atol=1e-9 * np.linalg.norm(a) ** 1.5)
    assert_allclose(s, s.T, atol=1e-14)


def test_solve_spd():
    b = np.array([1.0, -2.0, 3.0])
    assert_allclose(solve_spd(np.eye(3), b), b, atol=1e-14)
    assert_allclose(solve_spd(np.diag([2.0, 4.0, 8.0]), b), b / [2, 4, 8],
                    atol=1e-14)
    a = random_spd(25, seed=4)
    x = solve_spd(a, b := np.random.default_rng(9).standard_normal(25))
    assert np.linalg.norm(a @ x - b) <= 1e-10 * np.linalg.norm(b)
    with pytest.raises(NotPdError):
        solve_spd(np.diag([1.0, -1.0]), np.ones(2))


def test_spectral_norm_est(rng):
    m = rng.standard_normal((40, 25))
    exact = np.linalg.norm(m, 2)
    est = spectral_norm_est(m)
    assert abs(est - exact) <= 1e-6 * exact
    # deterministic across calls
    assert spectral_norm_est(m) == est
    assert spectral_norm_est(np.zeros((3, 3))) == 0.0


def test_low_rank_factor_dense_and_matvec(rng):
    f = rng.standard_normal((8, 3))
    c = random_spd(3, seed=2)
    lr = LowRankFactor(factor=f, core=c)
    assert lr.rows == 8 and lr.rank == 3
    assert_allclose(lr.dense(), f @ c @ f.T, atol=1e-13)
    x = rng.standard_normal(8)
    assert_allclose(lr.matvec(x), f @ (c @ (f.T @ x)), atol=1e-13)

    plain = LowRankFactor(factor=f)
    assert_allclose(plain.dense(), f @ f.T, atol=1e-13)
