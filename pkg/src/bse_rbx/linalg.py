"""Dense and low-rank linear-algebra kernels used throughout the package.

All routines act on plain numpy arrays.  Symmetric eigensolves, SVDs and
Cholesky solves are thin wrappers around LAPACK via scipy; the pivoted
partial Cholesky is written out because it works from an element oracle
and stops on a residual-trace tolerance, which the library routines do
not expose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    ConvergenceError,
    NotPdError,
    NotPsdError,
    RankExceededError,
)

__all__ = [
    "LowRankFactor",
    "EigPairs",
    "pivoted_cholesky",
    "frobenius_tail_rank",
    "truncated_svd",
    "truncate_symmetric",
    "sym_eig",
    "nonsym_eig",
    "sym_sqrt",
    "solve_spd",
    "spectral_norm_est",
]


@dataclass(frozen=True)
class LowRankFactor:
    """Low-rank representation ``G @ core @ G.T`` of a symmetric matrix.

    ``core`` is an R x R symmetric matrix; ``None`` means the identity,
    in which case the represented matrix is the Gram product ``G @ G.T``.
    """

    factor: np.ndarray
    core: np.ndarray | None = None

    def __post_init__(self):
        if self.factor.ndim != 2:
            raise ValueError("factor must be a 2-d array")
        if self.core is not None and self.core.shape != (self.rank, self.rank):
            raise ValueError("core must be R x R for a rank-R factor")

    @property
    def rows(self) -> int:
        return self.factor.shape[0]

    @property
    def rank(self) -> int:
        return self.factor.shape[1]

    def dense(self) -> np.ndarray:
        if self.core is None:
            return self.factor @ self.factor.T
        return self.factor @ self.core @ self.factor.T

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.factor.T @ x
        if self.core is not None:
            y = self.core @ y
        return self.factor @ y


@dataclass(frozen=True)
class EigPairs:
    """Eigenvalues (ascending) with eigenvectors stored as columns."""

    values: np.ndarray
    vectors: np.ndarray


def pivoted_cholesky(elem, diag, n, tol, max_rank=None):
    """Truncated Cholesky factorization with greedy diagonal pivoting.

    Builds ``L`` with ``B ~= L @ L.T`` for a symmetric positive
    semidefinite matrix ``B`` available only through an element oracle.
    Each step pivots on the largest residual diagonal entry; the
    iteration stops once the residual trace drops to ``tol``.

    Parameters
    ----------
    elem : callable
        ``elem(i, j) -> float`` returning ``B[i, j]``.
    diag : array_like
        The n diagonal entries of ``B``.
    n : int
        Dimension of ``B``.
    tol : float
        Stopping threshold on the residual trace
        ``sum_i (B[i, i] - sum_k L[i, k]**2)``.
    max_rank : int, optional
        Hard cap on the number of columns (default ``n``).

    Returns
    -------
    LowRankFactor
        Factor with ``rank <= max_rank`` columns and identity core.

    Raises
    ------
    NotPsdError
        If a residual diagonal falls below ``-10 * eps * max(diag)``,
        scaled up by the number of completed pivots (each pivot adds a
        rounding-level subtraction, so the legitimate drift of a PSD
        residual grows with depth).  Negative values above that floor
        are rounding noise and are clamped to zero.
    RankExceededError
        If the tolerance is still unmet after ``max_rank`` columns.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    d = np.array(diag, dtype=float, copy=True)
    if d.shape != (n,):
        raise ValueError("diag must have length n")
    scale = max(float(d.max(initial=0.0)), 0.0)
    base_floor = -10.0 * np.finfo(float).eps * scale
    if max_rank is None:
        max_rank = n
    cap = min(int(max_rank), n)

    L = np.empty((n, cap))
    rows = np.arange(n)
    k = 0
    while True:
        neg_floor = base_floor * max(1, k)
        dmin = float(d.min(initial=0.0))
        if dmin < neg_floor:
            raise NotPsdError(
                f"residual diagonal {dmin:.6e} below floor {neg_floor:.6e} "
                f"after {k} pivots"
            )
        if dmin < 0.0:
            np.clip(d, 0.0, None, out=d)
        resid = float(d.sum())
        if resid <= tol:
            break
        if k >= cap:
            raise RankExceededError(
                f"residual trace {resid:.6e} > tol {tol:.6e} at rank cap {cap}"
            )
        j = int(np.argmax(d))
        col = np.fromiter((elem(i, j) for i in rows), dtype=float, count=n)
        if k:
            col -= L[:, :k] @ L[j, :k]
        root = math.sqrt(d[j])
        col /= root
        col[j] = root
        L[:, k] = col
        d -= col * col
        d[j] = 0.0
        k += 1
    return LowRankFactor(factor=L[:, :k].copy())


def frobenius_tail_rank(sigmas, eps):
    """Smallest r with sqrt(sum of squared tail beyond r) <= eps."""
    tail = np.sqrt(np.cumsum(sigmas[::-1] ** 2))[::-1]
    keep = np.nonzero(tail <= eps)[0]
    return int(keep[0]) if keep.size else len(sigmas)


def truncated_svd(m, eps, max_rank=None):
    """SVD truncated by the Frobenius-norm tail criterion.

    The retained rank is the smallest r with
    ``sqrt(sum_{k>r} sigma_k**2) <= eps``, optionally capped at
    ``max_rank``.  ``eps = 0`` keeps everything except exact zero modes.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    m = np.asarray(m, dtype=float)
    try:
        u, s, vt = sla.svd(m, full_matrices=False)
    except sla.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ConvergenceError(f"svd failed: {exc}") from exc
    r = frobenius_tail_rank(s, eps)
    if max_rank is not None:
        r = min(r, int(max_rank))
    return u[:, :r].copy(), s[:r].copy(), vt[:r].copy()


def truncate_symmetric(m, eps):
    """Best low-rank approximation of a symmetric matrix at Frobenius eps.

    Truncates the eigendecomposition by the same tail criterion as
    :func:`truncated_svd` (singular values of a symmetric matrix are the
    absolute eigenvalues).  Returns a :class:`LowRankFactor` with an
    orthonormal factor and a diagonal core, so the result is symmetric
    by construction.
    """
    m = np.asarray(m, dtype=float)
    ep = sym_eig(m)
    order = np.argsort(-np.abs(ep.values))
    lam = ep.values[order]
    vec = ep.vectors[:, order]
    r = frobenius_tail_rank(np.abs(lam), eps)
    return LowRankFactor(factor=vec[:, :r].copy(), core=np.diag(lam[:r]))


def sym_eig(m):
    """Full symmetric eigendecomposition, eigenvalues ascending."""
    m = np.asarray(m, dtype=float)
    try:
        w, v = sla.eigh(m)
    except sla.LinAlgError as exc:
        raise ConvergenceError(f"symmetric eigensolve failed: {exc}") from exc
    return EigPairs(values=w, vectors=v)


def nonsym_eig(m):
    """General real eigendecomposition, sorted by (real, imag) part."""
    m = np.asarray(m, dtype=float)
    try:
        w, v = sla.eig(m)
    except sla.LinAlgError as exc:
        raise ConvergenceError(f"nonsymmetric eigensolve failed: {exc}") from exc
    order = np.lexsort((w.imag, w.real))
    return EigPairs(values=w[order], vectors=v[:, order])


def sym_sqrt(m):
    """Symmetric square root of a symmetric positive definite matrix.

    Raises ``NotPdError`` when the smallest eigenvalue is not safely
    positive (below ``1e-12`` times the spectral norm).
    """
    ep = sym_eig(m)
    norm = float(np.max(np.abs(ep.values), initial=0.0))
    lam_min = float(ep.values[0]) if ep.values.size else 0.0
    if lam_min <= 1e-12 * norm or norm == 0.0:
        raise NotPdError(
            f"smallest eigenvalue {lam_min:.6e} not positive definite "
            f"(norm {norm:.6e})"
        )
    root = (ep.vectors * np.sqrt(ep.values)) @ ep.vectors.T
    return (root + root.T) / 2.0


def solve_spd(m, rhs):
    """Solve ``M x = rhs`` for symmetric positive definite ``M``."""
    m = np.asarray(m, dtype=float)
    try:
        factor = sla.cho_factor(m, lower=True)
    except sla.LinAlgError as exc:
        raise NotPdError(f"Cholesky solve failed: {exc}") from exc
    return sla.cho_solve(factor, np.asarray(rhs, dtype=float))


def spectral_norm_est(m, max_iter=200, tol=1e-10):
    """Power-iteration estimate of the spectral norm of ``m``.

    Deterministic: the starting vector comes from a fixed-seed
    generator, so repeated calls on the same matrix agree bitwise.
    """
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return 0.0
    rng = np.random.default_rng(0)
    v = rng.standard_normal(m.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iter):
        w = m @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        u = m.T @ w
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return nw
        v = u / nu
        # for unit v, ||M.T M v|| tends to sigma_max^2
        new_sigma = math.sqrt(nu)
        if abs(new_sigma - sigma) <= tol * max(new_sigma, 1.0):
            return new_sigma
        sigma = new_sigma
    return sigma
