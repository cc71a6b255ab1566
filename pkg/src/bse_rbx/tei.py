"""Low-rank handling of the two-electron-integral (TEI) matrix.

The TEI tensor b(mu nu; lambda sigma) is stored as the symmetric
positive semidefinite matrix B of shape (nb^2, nb^2) with the row-major
composite index idx(mu, nu) = mu * nb + nu (0-based).  A truncated
pivoted Cholesky factorization B ~= L @ L.T yields columns whose
nb x nb unfoldings L_k are symmetric; every molecular-orbital pair
entry of the transformed interaction then reduces to lookups in the
half transforms T_k = C.T @ L_k @ C.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatchError, SizeGuardError, ValidationError
from .linalg import (
    LowRankFactor,
    frobenius_tail_rank,
    pivoted_cholesky,
    sym_eig,
)

__all__ = [
    "CholTei",
    "PairFactor",
    "cholesky_tei",
    "half_transforms",
    "pair_factor",
    "ov_pairs",
    "oo_pairs",
    "vv_pairs",
    "vo_pairs",
    "v_factor_ov",
    "v_factor_ext",
    "recompress",
    "singular_profile",
    "dense_tei_transform",
]


@dataclass(frozen=True)
class CholTei:
    """Cholesky columns of the TEI matrix, one Nb x Nb unfolding each.

    ``columns`` has shape (nb^2, rank).  ``tol`` and ``resid_trace``
    record the requested stopping tolerance and the achieved residual
    trace when the factor came out of :func:`cholesky_tei`.
    """

    n_basis: int
    columns: np.ndarray
    tol: float | None = None
    resid_trace: float | None = None

    def __post_init__(self):
        nb = self.n_basis
        if self.columns.ndim != 2 or self.columns.shape[0] != nb * nb:
            raise DimensionMismatchError(
                f"columns must have nb^2 = {nb * nb} rows, "
                f"got shape {self.columns.shape}"
            )

    @property
    def rank(self) -> int:
        return self.columns.shape[1]

    def unfoldings(self) -> np.ndarray:
        """All unfoldings as an array of shape (rank, nb, nb)."""
        nb = self.n_basis
        return np.ascontiguousarray(self.columns.T).reshape(self.rank, nb, nb)

    def unfolding(self, k: int) -> np.ndarray:
        return self.columns[:, k].reshape(self.n_basis, self.n_basis)

    def dense(self) -> np.ndarray:
        return self.columns @ self.columns.T

    @classmethod
    def from_columns(cls, columns, n_basis, tol=None, resid_trace=None,
                     max_asym=1e-8):
        """Build a factor, symmetrizing each unfolding.

        The pre-symmetrization asymmetry of every column must stay
        within ``max_asym`` relative to its Frobenius norm.  Tail
        columns of a deep factorization are tiny but inherit absolute
        rounding noise from the dominant scale, so asymmetry below
        ``max_asym`` relative to one thousandth of the largest column is
        never an error.
        """
        columns = np.asarray(columns, dtype=float)
        nb = int(n_basis)
        unf = np.ascontiguousarray(columns.T).reshape(-1, nb, nb)
        skew = unf - unf.transpose(0, 2, 1)
        norms = np.linalg.norm(unf.reshape(len(unf), nb * nb), axis=1)
        skew_norms = np.linalg.norm(skew.reshape(len(unf), nb * nb), axis=1)
        floor = 1e-3 * float(norms.max(initial=0.0))
        bad = skew_norms > max_asym * np.maximum(norms, max(floor, 1e-300))
        if np.any(bad):
            k = int(np.nonzero(bad)[0][0])
            raise ValidationError(
                f"cholesky column {k} unfolding asymmetry "
                f"{skew_norms[k]:.3e} exceeds {max_asym:.1e} relative"
            )
        sym = (unf + unf.transpose(0, 2, 1)) / 2.0
        cols = sym.reshape(len(unf), nb * nb).T.copy()
        return cls(n_basis=nb, columns=cols, tol=tol, resid_trace=resid_trace)


@dataclass(frozen=True)
class PairFactor:
    """Rows of transformed TEI columns for an ordered orbital pair set.

    ``rows[(p, q), k] = (C.T @ L_k @ C)[p, q]`` so that the represented
    interaction block is ``rows @ rows.T`` (or a product of two such
    factors for rectangular blocks).  Pairs are 0-based.
    """

    pairs: tuple
    rows: np.ndarray

    def __post_init__(self):
        if self.rows.ndim != 2 or self.rows.shape[0] != len(self.pairs):
            raise DimensionMismatchError(
                f"rows shape {self.rows.shape} does not match "
                f"{len(self.pairs)} pairs"
            )

    @property
    def n_pairs(self) -> int:
        return self.rows.shape[0]

    @property
    def rank(self) -> int:
        return self.rows.shape[1]

    def dense(self) -> np.ndarray:
        return self.rows @ self.rows.T


def cholesky_tei(inp, tol):
    """Truncated pivoted Cholesky factor of the TEI matrix of ``inp``.

    A pre-factored input (a :class:`CholTei` already on the model) is
    passed through unchanged.
    """
    if isinstance(inp.tei, CholTei):
        return inp.tei
    b = np.asarray(inp.tei, dtype=float)
    nb = inp.n_basis
    n2 = nb * nb
    if b.shape != (n2, n2):
        raise DimensionMismatchError(
            f"dense TEI must be {n2} x {n2}, got {b.shape}"
        )
    lr = pivoted_cholesky(
        elem=lambda i, j: b[i, j],
        diag=b.diagonal().copy(),
        n=n2,
        tol=tol,
    )
    resid = float(b.trace() - np.sum(lr.factor**2))
    return CholTei.from_columns(lr.factor, nb, tol=tol, resid_trace=resid)


def half_transforms(chol, coeffs):
    """Half transforms T_k = C.T @ L_k @ C, shape (rank, nb, nb).

    Each T_k is symmetrized exactly, which the symmetry of L_k
    guarantees up to rounding.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    nb = chol.n_basis
    if coeffs.shape != (nb, nb):
        raise DimensionMismatchError(
            f"coefficient matrix must be {nb} x {nb}, got {coeffs.shape}"
        )
    t = coeffs.T @ chol.unfoldings() @ coeffs
    return (t + t.transpose(0, 2, 1)) / 2.0


def pair_factor(chol, coeffs, pairs, transforms=None):
    """Pair factor rows for an arbitrary ordered list of orbital pairs.

    The half transforms are computed once (or reused when passed in via
    ``transforms``); each requested pair is then a plain lookup.
    """
    nb = chol.n_basis
    pairs = tuple((int(p), int(q)) for p, q in pairs)
    for p, q in pairs:
        if not (0 <= p < nb and 0 <= q < nb):
            raise IndexError(f"orbital pair ({p}, {q}) outside 0..{nb - 1}")
    if transforms is None:
        transforms = half_transforms(chol, coeffs)
    if pairs:
        p_idx = np.fromiter((p for p, _ in pairs), dtype=int, count=len(pairs))
        q_idx = np.fromiter((q for _, q in pairs), dtype=int, count=len(pairs))
        rows = transforms[:, p_idx, q_idx].T.copy()
    else:
        rows = np.empty((0, chol.rank))
    return PairFactor(pairs=pairs, rows=rows)


def ov_pairs(n_basis, n_occ):
    """Occupied-virtual pairs (i, a) in row-major order i * nv + (a - no)."""
    return [(i, a) for i in range(n_occ) for a in range(n_occ, n_basis)]


def oo_pairs(n_basis, n_occ):
    return [(i, j) for i in range(n_occ) for j in range(n_occ)]


def vv_pairs(n_basis, n_occ):
    return [(a, b) for a in range(n_occ, n_basis) for b in range(n_occ, n_basis)]


def vo_pairs(n_basis, n_occ):
    return [(a, i) for a in range(n_occ, n_basis) for i in range(n_occ)]


def v_factor_ov(chol, coeffs, n_occ, transforms=None):
    """Factor L_V of the occupied-virtual interaction V = L_V @ L_V.T."""
    return pair_factor(chol, coeffs, ov_pairs(chol.n_basis, n_occ),
                       transforms=transforms)


def v_factor_ext(chol, coeffs, n_occ, transforms=None):
    """Extended-set factors (U_V over oo pairs, W_V over vv pairs).

    The represented block is U_V @ W_V.T with entries v(ij, ab); the
    shapes are (no^2, rank) and (nv^2, rank).
    """
    if transforms is None:
        transforms = half_transforms(chol, coeffs)
    u_v = pair_factor(chol, coeffs, oo_pairs(chol.n_basis, n_occ),
                      transforms=transforms)
    w_v = pair_factor(chol, coeffs, vv_pairs(chol.n_basis, n_occ),
                      transforms=transforms)
    return u_v, w_v


def recompress(f, eps):
    """Recompress a symmetric factored matrix at a Frobenius tolerance.

    Accepts a :class:`PairFactor` (represented matrix G @ G.T) or a
    :class:`LowRankFactor`.  Works on the R x R Gram core via a thin QR,
    never forming the full matrix; the output rank never exceeds the
    input rank and the discarded Frobenius mass is at most ``eps``.
    """
    if isinstance(f, PairFactor):
        g, core = f.rows, None
    elif isinstance(f, LowRankFactor):
        g, core = f.factor, f.core
    else:
        raise TypeError(f"cannot recompress object of type {type(f).__name__}")
    n, r = g.shape
    if r == 0:
        return LowRankFactor(factor=np.empty((n, 0)), core=np.empty((0, 0)))
    q, rr = np.linalg.qr(g)
    k = rr @ rr.T if core is None else rr @ core @ rr.T
    k = (k + k.T) / 2.0
    ep = sym_eig(k)
    order = np.argsort(-np.abs(ep.values))
    lam = ep.values[order]
    vec = ep.vectors[:, order]
    keep = frobenius_tail_rank(np.abs(lam), eps)
    return LowRankFactor(factor=q @ vec[:, :keep], core=np.diag(lam[:keep]))


def singular_profile(obj):
    """Singular values (descending, zeros dropped) of a factored matrix.

    For :class:`CholTei` and :class:`PairFactor` the represented matrix
    is the Gram product G @ G.T, whose singular values are the
    eigenvalues of the R x R Gram core G.T @ G -- the full matrix is
    never formed.  A :class:`LowRankFactor` goes through a thin QR of
    its factor; a plain dense array falls back to LAPACK singular
    values.
    """
    if isinstance(obj, (CholTei, PairFactor)):
        g = obj.columns if isinstance(obj, CholTei) else obj.rows
        if g.shape[1] == 0:
            return np.empty(0)
        gram = g.T @ g
        lam = sla.eigvalsh((gram + gram.T) / 2.0)
        s = np.clip(lam[::-1], 0.0, None)
    elif isinstance(obj, LowRankFactor):
        if obj.rank == 0:
            return np.empty(0)
        q, rr = np.linalg.qr(obj.factor)
        k = rr @ rr.T if obj.core is None else rr @ obj.core @ rr.T
        lam = sla.eigvalsh((k + k.T) / 2.0)
        s = np.sort(np.abs(lam))[::-1]
    else:
        m = np.asarray(obj, dtype=float)
        if m.size == 0:
            return np.empty(0)
        s = sla.svdvals(m)
    return s[s > 0.0].copy()


def dense_tei_transform(b, coeffs, row_pairs, col_pairs, guard=8):
    """Direct four-index transform of a dense TEI matrix (test oracle).

    Contracts the quadruple sum
    ``v(pq, rs) = sum C[mu,p] C[nu,q] C[lam,r] C[sig,s] b(mu nu, lam sig)``
    for the requested pair lists without going through any Cholesky
    factor.  Guarded to tiny bases; this is an oracle for tests, not a
    production path.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    nb = coeffs.shape[0]
    if nb > guard:
        raise SizeGuardError(f"dense transform limited to nb <= {guard}")
    t = np.asarray(b, dtype=float).reshape(nb, nb, nb, nb)
    full = np.einsum("up,vq,lr,wt,uvlw->pqrt",
                     coeffs, coeffs, coeffs, coeffs, t)
    out = np.empty((len(row_pairs), len(col_pairs)))
    for ii, (p, q) in enumerate(row_pairs):
        for jj, (r, s) in enumerate(col_pairs):
            out[ii, jj] = full[p, q, r, s]
    return out
