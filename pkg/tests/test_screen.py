"""Static screening: Woodbury core, screened blocks, regrouping."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bse_rbx import (
    DimensionMismatchError,
    GapNotPositiveError,
    RankMismatchError,
    ScreenCore,
    SizeGuardError,
    build_core,
    delta_eps,
    dense_z,
    regroup_w_bar,
    regroup_w_bar_dense,
    regroup_w_tilde,
    regroup_w_tilde_dense,
    w_block,
)
from bse_rbx.tei import (
    PairFactor,
    cholesky_tei,
    pair_factor,
    v_factor_ext,
    v_factor_ov,
    vo_pairs,
)
from conftest import make_input


def fake_ov_factor(n_ov, rank, seed, scale=0.3):
    rng = np.random.default_rng(seed)
    rows = scale * rng.standard_normal((n_ov, rank))
    pairs = tuple((0, k) for k in range(n_ov))  # placeholder labels
    return PairFactor(pairs=pairs, rows=rows)


def screened_parts(nb, no, seed, n_terms=None):
    inp = make_input(nb, no, seed, n_terms=n_terms)
    chol = cholesky_tei(inp, 1e-12)
    de = delta_eps(inp.energies, no)
    l_v = v_factor_ov(chol, inp.coeffs, no)
    core = build_core(l_v, de)
    return inp, chol, de, l_v, core


def test_delta_eps_examples():
    de = delta_eps([-1.0, -0.5, 0.3, 0.7], 2)
    assert_allclose(de.diag, [1.3, 1.7, 0.8, 1.2], atol=1e-14)
    assert de.gap == pytest.approx(0.8)
    assert de.n_ov == 4

    de = delta_eps([-2.0, 1.0, 3.0], 1)
    assert_allclose(de.diag, [3.0, 5.0], atol=1e-14)


def test_delta_eps_kronecker_structure():
    e = np.array([-1.2, -0.4, 0.1, 0.9, 1.5])
    no = 2
    de = delta_eps(e, no)
    expect = np.kron(np.ones(no), e[no:]) - np.kron(e[:no], np.ones(3))
    assert_allclose(de.diag, expect, atol=1e-14)


def test_delta_eps_requires_positive_gap():
    with pytest.raises(GapNotPositiveError):
        delta_eps([-1.0, 0.0, 0.0, 1.0], 2)
    with pytest.raises(GapNotPositiveError):
        delta_eps([0.5, 0.2, 1.0], 1)  # occupied above the first virtual
    with pytest.raises(DimensionMismatchError):
        delta_eps([-1.0, 1.0], 0)


def test_core_without_interaction_is_identity():
    de = delta_eps([-1.0, 0.5, 1.5], 1)
    l_v = fake_ov_factor(2, 3, seed=0, scale=0.0)
    core = build_core(l_v, de)
    assert_allclose(core.core_inv, np.eye(3), atol=1e-14)


def test_core_rank_one_scalar_formula():
    de = delta_eps([-1.0, 0.5, 1.5], 1)
    l = np.array([[0.7], [-0.2]])
    core = build_core(PairFactor(pairs=((0, 1), (0, 2)), rows=l), de)
    m = float(np.sum(l[:, 0] ** 2 / de.diag))
    assert_allclose(core.core_inv, [[1.0 / (1.0 + m)]], rtol=1e-13)


def test_core_matches_dense_solve_oracle():
    _, _, de, l_v, core = screened_parts(6, 3, seed=4, n_terms=12)
    r = l_v.rank
    m = l_v.rows.T @ (l_v.rows / de.diag[:, None])
    ref = np.linalg.solve(np.eye(r) + m, np.eye(r))
    assert_allclose(core.core_inv, ref, atol=1e-10 * np.linalg.norm(ref))


def test_core_psd_term():
    # M = L^T diag(1/d) L is positive semidefinite for a positive gap
    _, _, de, l_v, _ = screened_parts(5, 2, seed=7)
    m = l_v.rows.T @ (l_v.rows / de.diag[:, None])
    lam = np.linalg.eigvalsh((m + m.T) / 2.0)
    assert lam[0] >= -1e-12 * max(lam[-1], 1.0)


def test_dense_z_oracle_forms():
    de = delta_eps([-1.0, 0.5, 1.5], 1)
    zero = fake_ov_factor(2, 2, seed=0, scale=0.0)
    assert_allclose(dense_z(zero, de), np.eye(2), atol=1e-14)

    l_v = fake_ov_factor(2, 2, seed=1)
    v = l_v.rows @ l_v.rows.T
    z = dense_z(l_v, de)
    assert z[0, 1] == pytest.approx(v[0, 1] / de.diag[1])

    big = fake_ov_factor(600, 2, seed=2)
    de_big = delta_eps(np.concatenate([[-1.0], np.linspace(0.5, 2.0, 600)]), 1)
    with pytest.raises(SizeGuardError):
        dense_z(big, de_big, guard=512)


def test_screened_ov_block_matches_dense_solve():
    # Woodbury push-through: L (I+M)^{-1} L^T == (I + V D)^{-1} V
    inp, _, de, l_v, core = screened_parts(6, 2, seed=9, n_terms=12)
    w = w_block(l_v, core, l_v)
    v = l_v.rows @ l_v.rows.T
    ref = np.linalg.solve(dense_z(l_v, de), v)
    assert_allclose(w.dense(), ref, atol=1e-9 * max(np.linalg.norm(ref), 1.0))
    assert_allclose(w.dense(), w.dense().T, atol=1e-12)


def test_unscreened_limit_returns_bare_interaction():
    _, _, de, l_v, _ = screened_parts(5, 2, seed=3)
    core = ScreenCore(core_inv=np.eye(l_v.rank))
    w = w_block(l_v, core, l_v)
    assert_allclose(w.dense(), l_v.rows @ l_v.rows.T, atol=1e-14)


def test_screening_contracts_spectrum():
    for seed in range(4):
        _, _, de, l_v, core = screened_parts(6, 2, seed=seed, n_terms=14)
        w = w_block(l_v, core, l_v).dense()
        v = l_v.rows @ l_v.rows.T
        lam_w = np.linalg.eigvalsh((w + w.T) / 2.0)[-1]
        lam_v = np.linalg.eigvalsh(v)[-1]
        assert lam_w <= lam_v * (1 + 1e-9)


def test_extended_block_finite_and_consistent():
    inp, chol, de, l_v, core = screened_parts(6, 3, seed=11, n_terms=12)
    u_v, w_v = v_factor_ext(chol, inp.coeffs, 3)
    w = w_block(u_v, core, w_v)
    d = w.dense()
    assert d.shape == (9, 9)
    assert np.all(np.isfinite(d))
    # screening only reweights the shared core: unscreened limit recovers
    # the bare oo|vv interaction
    bare = w_block(u_v, ScreenCore(core_inv=np.eye(core.rank)), w_v)
    assert_allclose(bare.dense(), u_v.rows @ w_v.rows.T, atol=1e-14)


def test_w_block_rank_mismatch():
    _, _, de, l_v, core = screened_parts(5, 2, seed=1)
    bad = fake_ov_factor(l_v.n_pairs, l_v.rank + 1, seed=0)
    with pytest.raises(RankMismatchError):
        w_block(bad, core, l_v)
    with pytest.raises(RankMismatchError):
        w_block(l_v, core, bad)


def test_regroup_zero_block():
    core = ScreenCore(core_inv=np.eye(2))
    u = PairFactor(pairs=((0, 0),), rows=np.zeros((1, 2)))
    w = PairFactor(pairs=((1, 1), (1, 2), (2, 1), (2, 2)),
                   rows=np.zeros((4, 2)))
    out = regroup_w_bar_dense(w_block(u, core, w), 1, 2)
    assert out.shape == (2, 2)
    assert not out.any()


def test_regroup_entrywise_oracle():
    inp, chol, de, l_v, core = screened_parts(5, 2, seed=13, n_terms=10)
    no, nv = 2, 3
    u_v, w_v = v_factor_ext(chol, inp.coeffs, no)
    wb = w_block(u_v, core, w_v)
    dense = wb.dense()
    out = regroup_w_bar_dense(wb, no, nv)
    for i in range(no):
        for a in range(nv):
            for j in range(no):
                for b in range(nv):
                    assert out[i * nv + a, j * nv + b] == \
                        dense[i * no + j, a * nv + b]
    assert_allclose(out, out.T, atol=1e-12)

    l_vo = pair_factor(chol, inp.coeffs, vo_pairs(5, no))
    wt = w_block(l_v, core, l_vo)
    dt = wt.dense()
    out_t = regroup_w_tilde_dense(wt, no, nv)
    for i in range(no):
        for a in range(nv):
            for j in range(no):
                for b in range(nv):
                    assert out_t[i * nv + a, j * nv + b] == \
                        dt[i * nv + b, a * no + j]
    assert_allclose(out_t, out_t.T, atol=1e-12)


def test_regroup_preserves_frobenius_norm():
    inp, chol, de, l_v, core = screened_parts(6, 2, seed=15, n_terms=12)
    u_v, w_v = v_factor_ext(chol, inp.coeffs, 2)
    wb = w_block(u_v, core, w_v)
    assert np.linalg.norm(regroup_w_bar_dense(wb, 2, 4)) == \
        pytest.approx(np.linalg.norm(wb.dense()), rel=1e-13)
    l_vo = pair_factor(chol, inp.coeffs, vo_pairs(6, 2))
    wt = w_block(l_v, core, l_vo)
    assert np.linalg.norm(regroup_w_tilde_dense(wt, 2, 4)) == \
        pytest.approx(np.linalg.norm(wt.dense()), rel=1e-13)


def test_regroup_single_occupied_bar_is_identity_relabel():
    # no = 1: Wbar[(1a),(1b)] = w[11, ab], i.e. the vv block itself
    inp, chol, de, l_v, core = screened_parts(4, 1, seed=17, n_terms=6)
    u_v, w_v = v_factor_ext(chol, inp.coeffs, 1)
    wb = w_block(u_v, core, w_v)
    assert_allclose(regroup_w_bar_dense(wb, 1, 3),
                    wb.dense().reshape(3, 3), atol=1e-14)


def test_regroup_truncation_rank_monotone():
    inp, chol, de, l_v, core = screened_parts(6, 2, seed=19, n_terms=12)
    l_vo = pair_factor(chol, inp.coeffs, vo_pairs(6, 2))
    wt = w_block(l_v, core, l_vo)
    dense = regroup_w_tilde_dense(wt, 2, 4)
    ranks = []
    for eps in np.geomspace(1e-10, 1.0, 8):
        lr = regroup_w_tilde(wt, 2, 4, eps)
        ranks.append(lr.rank)
        assert np.linalg.norm(dense - lr.dense()) <= eps * (1 + 1e-9)
        d = lr.dense()
        assert_allclose(d, d.T, atol=1e-12)
    assert all(a >= b for a, b in zip(ranks, ranks[1:]))

    u_v, w_v = v_factor_ext(chol, inp.coeffs, 2)
    wb = w_block(u_v, core, w_v)
    lr = regroup_w_bar(wb, 2, 4, 0.0)
    assert_allclose(lr.dense(), regroup_w_bar_dense(wb, 2, 4), atol=1e-12)


def test_regroup_size_guard():
    core = ScreenCore(core_inv=np.eye(1))
    u = PairFactor(pairs=((0, 0),), rows=np.ones((1, 1)))
    w = PairFactor(pairs=tuple((1, k) for k in range(36)),
                   rows=np.ones((36, 1)))
    with pytest.raises(SizeGuardError):
        regroup_w_bar_dense(w_block(u, core, w), 1, 6, guard=5)


def test_regroup_shape_mismatch():
    core = ScreenCore(core_inv=np.eye(1))
    u = PairFactor(pairs=((0, 0),), rows=np.ones((1, 1)))
    with pytest.raises(DimensionMismatchError):
        regroup_w_bar_dense(w_block(u, core, u), 1, 2)
