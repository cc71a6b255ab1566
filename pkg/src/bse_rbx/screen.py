"""Statically screened interaction in diagonal-plus-low-rank form.

With the occupied-virtual interaction V = L_V @ L_V.T and the diagonal
of orbital-energy differences d, the screening system matrix is
Z = I + L_V @ Ltil_V.T where Ltil_V has the rows of L_V scaled by 1/d.
The Woodbury identity collapses Z^{-1} V to
L_V @ (I + M)^{-1} @ L_V.T with the R x R core M = Ltil_V.T @ L_V, so
every screened block is left-factor times core-inverse times
right-factor and the full pair space is never touched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    DimensionMismatchError,
    GapNotPositiveError,
    RankMismatchError,
    SingularCoreError,
    SizeGuardError,
)
from .linalg import LowRankFactor, truncate_symmetric
from .tei import PairFactor

__all__ = [
    "DeltaEps",
    "ScreenCore",
    "WBlock",
    "delta_eps",
    "build_core",
    "dense_z",
    "w_block",
    "regroup_w_bar_dense",
    "regroup_w_bar",
    "regroup_w_tilde_dense",
    "regroup_w_tilde",
]


@dataclass(frozen=True)
class DeltaEps:
    """Diagonal of orbital-energy differences over ov pairs."""

    n_occ: int
    n_virt: int
    diag: np.ndarray
    gap: float

    @property
    def n_ov(self) -> int:
        return self.n_occ * self.n_virt


@dataclass(frozen=True)
class ScreenCore:
    """Symmetric inverse core (I + M)^{-1} of the screening system."""

    core_inv: np.ndarray

    @property
    def rank(self) -> int:
        return self.core_inv.shape[0]


@dataclass(frozen=True)
class WBlock:
    """Screened block  left @ core_inv @ right.T  over two pair sets."""

    left: PairFactor
    core: ScreenCore
    right: PairFactor

    def dense(self) -> np.ndarray:
        return self.left.rows @ self.core.core_inv @ self.right.rows.T


def delta_eps(energies, n_occ) -> DeltaEps:
    """Energy differences eps_a - eps_i over ov pairs, row-major.

    Raises ``GapNotPositiveError`` when the smallest difference is not
    positive (degenerate or crossed frontier orbitals).
    """
    e = np.asarray(energies, dtype=float)
    nb = e.shape[0]
    no = int(n_occ)
    if not (1 <= no < nb):
        raise DimensionMismatchError(
            f"n_occ must satisfy 1 <= n_occ < n_basis, got {no} of {nb}"
        )
    diag = (e[None, no:] - e[:no, None]).ravel()
    gap = float(diag.min())
    if gap <= 0.0:
        raise GapNotPositiveError(gap)
    return DeltaEps(n_occ=no, n_virt=nb - no, diag=diag, gap=gap)


def build_core(l_v, de: DeltaEps) -> ScreenCore:
    """Woodbury core (I + M)^{-1} with M = L_V.T diag(1/d) L_V.

    M is positive semidefinite for a positive gap, so I + M is solved
    by Cholesky; the inverse is accepted only when the solve residual
    stays at the 1e-10 level.
    """
    rows = l_v.rows
    if rows.shape[0] != de.n_ov:
        raise DimensionMismatchError(
            f"factor has {rows.shape[0]} rows, expected n_ov={de.n_ov}"
        )
    d = 1.0 / de.diag
    m = rows.T @ (rows * d[:, None])
    m = (m + m.T) / 2.0
    r = m.shape[0]
    a = np.eye(r) + m
    try:
        cf = sla.cho_factor(a, lower=True)
        inv = sla.cho_solve(cf, np.eye(r))
    except sla.LinAlgError as exc:
        raise SingularCoreError(f"core solve failed: {exc}") from exc
    resid = float(np.linalg.norm(a @ inv - np.eye(r)))
    if resid > 1e-10 * max(1.0, float(np.linalg.norm(a))):
        raise SingularCoreError(f"core solve residual {resid:.3e} too large")
    inv = (inv + inv.T) / 2.0
    return ScreenCore(core_inv=inv)


def dense_z(l_v, de: DeltaEps, guard=512) -> np.ndarray:
    """Dense screening matrix Z = I + V diag(1/d); test oracle only."""
    n = de.n_ov
    if n > guard:
        raise SizeGuardError(f"dense Z limited to n_ov <= {guard}, got {n}")
    if l_v.rows.shape[0] != n:
        raise DimensionMismatchError(
            f"factor has {l_v.rows.shape[0]} rows, expected n_ov={n}"
        )
    v = l_v.rows @ l_v.rows.T
    return np.eye(n) + v * (1.0 / de.diag)[None, :]


def w_block(left, core: ScreenCore, right) -> WBlock:
    """Assemble a screened block; factor ranks must match the core."""
    if left.rank != core.rank or right.rank != core.rank:
        raise RankMismatchError(
            f"factor ranks ({left.rank}, {right.rank}) do not match "
            f"core rank {core.rank}"
        )
    return WBlock(left=left, core=core, right=right)


def _check_regroup(w: WBlock, n_occ, n_virt, n_ov, guard):
    if n_ov > guard:
        raise SizeGuardError(
            f"regrouping materializes n_ov^2; limited to n_ov <= {guard}"
        )


def regroup_w_bar_dense(w: WBlock, n_occ, n_virt, guard=512) -> np.ndarray:
    """Reindex the (oo, vv) block to ov x ov: Wbar[ia, jb] = w[ij, ab].

    Pure relabeling, so the Frobenius norm is preserved exactly.
    """
    no, nv = int(n_occ), int(n_virt)
    n_ov = no * nv
    _check_regroup(w, no, nv, n_ov, guard)
    if w.left.n_pairs != no * no or w.right.n_pairs != nv * nv:
        raise DimensionMismatchError(
            f"expected factors over oo ({no * no}) and vv ({nv * nv}) pairs, "
            f"got {w.left.n_pairs} and {w.right.n_pairs}"
        )
    d = w.dense().reshape(no, no, nv, nv)
    return np.einsum("ijab->iajb", d).reshape(n_ov, n_ov)


def regroup_w_bar(w: WBlock, n_occ, n_virt, eps, guard=512) -> LowRankFactor:
    """Regrouped block truncated at Frobenius tolerance ``eps``."""
    return truncate_symmetric(regroup_w_bar_dense(w, n_occ, n_virt, guard), eps)


def regroup_w_tilde_dense(w: WBlock, n_occ, n_virt, guard=512) -> np.ndarray:
    """Reindex the (ov, vo) block to ov x ov: Wtil[ia, jb] = w[ib, aj]."""
    no, nv = int(n_occ), int(n_virt)
    n_ov = no * nv
    _check_regroup(w, no, nv, n_ov, guard)
    if w.left.n_pairs != n_ov or w.right.n_pairs != n_ov:
        raise DimensionMismatchError(
            f"expected factors over ov and vo ({n_ov}) pairs, "
            f"got {w.left.n_pairs} and {w.right.n_pairs}"
        )
    d = w.dense().reshape(no, nv, nv, no)
    return np.einsum("ibaj->iajb", d).reshape(n_ov, n_ov)


def regroup_w_tilde(w: WBlock, n_occ, n_virt, eps, guard=512) -> LowRankFactor:
    """Regrouped exchange-screened block truncated at ``eps``."""
    return truncate_symmetric(regroup_w_tilde_dense(w, n_occ, n_virt, guard), eps)
