"""Assembly and eigensolvers for the two-block excitation problem.

The exact problem is the standard eigenproblem of
F1 = [[A, B], [-B, -A]] with symmetric A = de + V - Wbar and
B = V - Wtil; its spectrum is closed under negation and only the
positive half is kept.  When A - B and A + B are positive definite the
half-size symmetric form M = (A-B)^{1/2} (A+B) (A-B)^{1/2} with
M z = omega^2 z gives the same energies.  Truncated blocks define the
auxiliary problem F0; its lowest excitation-branch eigenvectors G1
carry a Galerkin projection of the exact F1 whose Ritz values gamma
improve quadratically on the auxiliary energies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (
    ComplexRitzError,
    ComplexSpectrumError,
    ConvergenceError,
    DimensionMismatchError,
    InvalidParamsError,
    LengthMismatchError,
    NotPdError,
    RankDeficientBasisError,
    SizeGuardError,
    ValidationError,
)
from .linalg import (
    LowRankFactor,
    nonsym_eig,
    spectral_norm_est,
    sym_eig,
    sym_sqrt,
    truncate_symmetric,
)
from .screen import DeltaEps
from .tei import PairFactor, recompress

__all__ = [
    "VARIANT_EXACT",
    "VARIANT_TRUNCATE_ALL",
    "VARIANT_KEEP_WBAR",
    "VARIANTS",
    "BseBlocks",
    "Spectrum",
    "SpectrumReport",
    "assemble_blocks",
    "solve_dense",
    "solve_sym_reduced",
    "solve_tda",
    "structured_matvec",
    "solve_aux",
    "reduced_galerkin",
    "error_report",
    "block_difference_norms",
]

VARIANT_EXACT = "exact"
VARIANT_TRUNCATE_ALL = "truncate_all"
VARIANT_KEEP_WBAR = "keep_wbar"
VARIANTS = (VARIANT_EXACT, VARIANT_TRUNCATE_ALL, VARIANT_KEEP_WBAR)

_IMAG_TOL = 1e-8


@dataclass
class BseBlocks:
    """Blocks of the two-block problem in diagonal-plus-low-rank form.

    ``v`` is always factored; ``w_bar`` and ``w_tilde`` are either
    dense arrays (exact regrouped blocks) or :class:`LowRankFactor`
    truncations.
    """

    de: DeltaEps
    v: LowRankFactor
    w_bar: np.ndarray | LowRankFactor
    w_tilde: np.ndarray | LowRankFactor
    variant: str

    @property
    def n_ov(self) -> int:
        return self.de.n_ov

    def block_a(self) -> np.ndarray:
        a = np.diag(self.de.diag) + self.v.dense() - _part_dense(self.w_bar)
        return a

    def block_b(self) -> np.ndarray:
        return self.v.dense() - _part_dense(self.w_tilde)

    def full_matrix(self) -> np.ndarray:
        a = self.block_a()
        b = self.block_b()
        return np.block([[a, b], [-b, -a]])

    def part_ranks(self) -> dict:
        return {
            "v": self.v.rank,
            "w_bar": _part_rank(self.w_bar),
            "w_tilde": _part_rank(self.w_tilde),
        }


@dataclass
class Spectrum:
    """Eigenvalues (ascending) with eigenvectors stored as columns.

    ``kind`` is one of ``omega_exact``, ``lambda_aux``,
    ``gamma_reduced`` or ``mu_tda``.
    """

    kind: str
    values: np.ndarray
    vectors: np.ndarray
    meta: dict = field(default_factory=dict)


@dataclass
class SpectrumReport:
    """Per-level energies and error columns, plus run metadata."""

    n: np.ndarray
    omega: np.ndarray
    lam: np.ndarray
    gamma: np.ndarray
    mu: np.ndarray
    err_gamma: np.ndarray
    err_lambda: np.ndarray
    err_mu: np.ndarray
    meta: dict = field(default_factory=dict)


def _part_dense(part) -> np.ndarray:
    if isinstance(part, LowRankFactor):
        return part.dense()
    return np.asarray(part, dtype=float)


def _part_rank(part) -> int:
    if isinstance(part, LowRankFactor):
        return part.rank
    return int(np.asarray(part).shape[0])


def _part_matvec(part, x):
    if isinstance(part, LowRankFactor):
        return part.matvec(x)
    return part @ x


def _as_low_rank(v) -> LowRankFactor:
    if isinstance(v, PairFactor):
        return LowRankFactor(factor=v.rows)
    if isinstance(v, LowRankFactor):
        return v
    raise TypeError(f"v must be a PairFactor or LowRankFactor, got {type(v).__name__}")


def _truncate_part(part, eps):
    """Truncate a dense or factored symmetric part; eps = 0 keeps it."""
    if eps == 0.0:
        return part
    if isinstance(part, LowRankFactor):
        return recompress(part, eps)
    return truncate_symmetric(np.asarray(part, dtype=float), eps)


def assemble_blocks(de, v_factor, w_bar, w_tilde, variant,
                    eps_v=0.0, eps_wbar=0.0, eps_wtilde=0.0,
                    check_limit=1024):
    """Build solver blocks for one truncation variant.

    ``exact`` keeps every part untouched; ``truncate_all`` truncates V,
    Wbar and Wtil at their tolerances; ``keep_wbar`` truncates V and
    Wtil but carries Wbar unmodified.  A tolerance of zero always means
    "no change", so eps = 0 reproduces the exact operator bit for bit.
    """
    if variant not in VARIANTS:
        raise InvalidParamsError(f"unknown variant {variant!r}")
    v = _as_low_rank(v_factor)
    n_ov = de.n_ov
    if v.rows != n_ov:
        raise DimensionMismatchError(
            f"v factor has {v.rows} rows, expected n_ov={n_ov}"
        )
    for name, part in (("w_bar", w_bar), ("w_tilde", w_tilde)):
        n = _part_dim(part)
        if n != n_ov:
            raise DimensionMismatchError(
                f"{name} has dimension {n}, expected n_ov={n_ov}"
            )
    if variant == VARIANT_TRUNCATE_ALL:
        v = _truncate_part(v, eps_v)
        w_bar = _truncate_part(w_bar, eps_wbar)
        w_tilde = _truncate_part(w_tilde, eps_wtilde)
    elif variant == VARIANT_KEEP_WBAR:
        v = _truncate_part(v, eps_v)
        w_tilde = _truncate_part(w_tilde, eps_wtilde)
    blocks = BseBlocks(de=de, v=v, w_bar=w_bar, w_tilde=w_tilde, variant=variant)
    if n_ov <= check_limit:
        _check_block_symmetry(blocks)
    return blocks


def _part_dim(part) -> int:
    if isinstance(part, LowRankFactor):
        return part.rows
    arr = np.asarray(part)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatchError(f"dense block must be square, got {arr.shape}")
    return arr.shape[0]


def _check_block_symmetry(blocks: BseBlocks):
    for name, mat in (("A", blocks.block_a()), ("B", blocks.block_b())):
        norm = np.linalg.norm(mat)
        skew = np.linalg.norm(mat - mat.T)
        if skew > 1e-8 * max(norm, 1e-300):
            raise ValidationError(
                f"block {name} asymmetric: {skew:.3e} vs norm {norm:.3e}"
            )


def _realify_columns(vecs, what):
    """Rotate complex eigenvector columns onto the real axis."""
    out = np.empty((vecs.shape[0], vecs.shape[1]))
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        k = int(np.argmax(np.abs(col)))
        phase = col[k] / abs(col[k])
        col = col / phase
        resid = float(np.max(np.abs(col.imag)))
        if resid > _IMAG_TOL * max(1.0, float(np.max(np.abs(col.real)))):
            raise ComplexSpectrumError(
                f"{what}: eigenvector imaginary part {resid:.3e} beyond tolerance"
            )
        real = col.real
        out[:, j] = real / np.linalg.norm(real)
    return out


def _positive_half(ep, what):
    """Split a paired spectrum, asserting realness and +/- pairing."""
    vals = ep.values
    im_max = float(np.max(np.abs(vals.imag), initial=0.0))
    if im_max > _IMAG_TOL:
        raise ComplexSpectrumError(
            f"{what}: imaginary eigenvalue part {im_max:.3e} beyond tolerance "
            f"(two-block structure with indefinite A +/- B)"
        )
    re = vals.real
    pos = re > 0.0
    neg = re < 0.0
    pos_sorted = np.sort(re[pos])
    neg_sorted = np.sort(-re[neg])
    if pos_sorted.shape != neg_sorted.shape or (
        pos_sorted.size
        and np.max(np.abs(pos_sorted - neg_sorted)) > _IMAG_TOL * max(1.0, pos_sorted[-1])
    ):
        raise ConvergenceError(f"{what}: spectrum not closed under negation")
    order = np.nonzero(pos)[0]
    vecs = _realify_columns(ep.vectors[:, order], what)
    return pos_sorted, vecs, re


def solve_dense(blocks: BseBlocks, guard=1024) -> Spectrum:
    """Positive-half spectrum of the dense two-block matrix.

    Guarded to 2 n_ov <= ``guard``.  Raises ``ComplexSpectrumError``
    when eigenvalues leave the real axis beyond 1e-8 and checks the
    eigenvector residual against 1e-8 ||F1||.
    """
    n2 = 2 * blocks.n_ov
    if n2 > guard:
        raise SizeGuardError(f"dense solve limited to 2 n_ov <= {guard}, got {n2}")
    f = blocks.full_matrix()
    ep = nonsym_eig(f)
    values, vectors, full_real = _positive_half(ep, "dense solve")
    fnorm = float(np.linalg.norm(f))
    resid = float(np.max(
        np.linalg.norm(f @ vectors - vectors * values[None, :], axis=0),
        initial=0.0,
    ))
    if resid > 1e-8 * max(fnorm, 1e-300):
        raise ConvergenceError(
            f"dense solve residual {resid:.3e} vs 1e-8 * ||F|| = {1e-8 * fnorm:.3e}"
        )
    return Spectrum(
        kind="omega_exact",
        values=values,
        vectors=vectors,
        meta={"n_ov": blocks.n_ov, "pathway": "dense", "variant": blocks.variant,
              "full_values": full_real},
    )


def solve_sym_reduced(blocks: BseBlocks) -> Spectrum:
    """Energies via the half-size symmetric form; needs A +/- B definite.

    Solves M z = omega^2 z with M = (A-B)^{1/2} (A+B) (A-B)^{1/2} and
    maps each z back to a two-block eigenvector through
    x + y = (A-B)^{1/2} z / sqrt(omega) and (A+B)(x+y) = omega (x-y).
    """
    a = blocks.block_a()
    b = blocks.block_b()
    try:
        s = sym_sqrt(a - b)
    except NotPdError as exc:
        raise NotPdError(f"A - B not positive definite: {exc}") from exc
    apb = a + b
    m = s @ apb @ s
    ep = sym_eig((m + m.T) / 2.0)
    if ep.values[0] <= 0.0:
        raise NotPdError(
            f"A + B not positive definite (reduced eigenvalue {ep.values[0]:.6e})"
        )
    omega = np.sqrt(ep.values)
    u = (s @ ep.vectors) / np.sqrt(omega)[None, :]
    vv = (apb @ u) / omega[None, :]
    x = (u + vv) / 2.0
    y = (u - vv) / 2.0
    psi = np.vstack([x, y])
    psi /= np.linalg.norm(psi, axis=0)[None, :]
    return Spectrum(
        kind="omega_exact",
        values=omega,
        vectors=psi,
        meta={"n_ov": blocks.n_ov, "pathway": "sym", "variant": blocks.variant},
    )


def solve_tda(blocks: BseBlocks) -> Spectrum:
    """Tamm-Dancoff energies: eigenvalues of the A block alone."""
    ep = sym_eig(blocks.block_a())
    return Spectrum(
        kind="mu_tda",
        values=ep.values,
        vectors=ep.vectors,
        meta={"n_ov": blocks.n_ov, "variant": blocks.variant},
    )


def structured_matvec(blocks: BseBlocks, x) -> np.ndarray:
    """Apply the two-block operator as diagonal plus low-rank passes.

    Cost O(n_ov * (R_V + R_Wbar + R_Wtil)) when all parts are factored;
    dense parts fall back to a dense product.
    """
    x = np.asarray(x, dtype=float)
    n = blocks.n_ov
    if x.shape != (2 * n,):
        raise DimensionMismatchError(
            f"vector has shape {x.shape}, expected ({2 * n},)"
        )
    x1, x2 = x[:n], x[n:]

    def a_mv(u):
        return blocks.de.diag * u + blocks.v.matvec(u) - _part_matvec(blocks.w_bar, u)

    def b_mv(u):
        return blocks.v.matvec(u) - _part_matvec(blocks.w_tilde, u)

    top = a_mv(x1) + b_mv(x2)
    bottom = -(b_mv(x1) + a_mv(x2))
    return np.concatenate([top, bottom])


def solve_aux(blocks: BseBlocks, m0, method="dense", guard=1024,
              tol=1e-9, max_sweeps=2000, seed=0) -> Spectrum:
    """Lowest ``m0`` positive eigenpairs of the truncated problem F0.

    The dense path is the contract-bearing implementation at desk
    scale.  ``method="iterative"`` runs a shift-free subspace iteration
    driven by :func:`structured_matvec` on the product form
    (A0-B0)(A0+B0); it falls back to the dense path when positive
    definiteness fails.
    """
    n = blocks.n_ov
    if not (1 <= int(m0) <= n):
        raise InvalidParamsError(f"m0 must be in 1..n_ov={n}, got {m0}")
    m0 = int(m0)
    if method == "iterative":
        try:
            values, g1 = _aux_subspace(blocks, m0, tol=tol,
                                       max_sweeps=max_sweeps, seed=seed)
            return Spectrum(
                kind="lambda_aux", values=values, vectors=g1,
                meta={"n_ov": n, "m0": m0, "method": "iterative",
                      "variant": blocks.variant},
            )
        except NotPdError:
            pass  # indefinite truncated blocks: use the dense path
    elif method != "dense":
        raise InvalidParamsError(f"unknown solve_aux method {method!r}")

    n2 = 2 * n
    if n2 > guard:
        raise SizeGuardError(f"dense solve limited to 2 n_ov <= {guard}, got {n2}")
    f = blocks.full_matrix()
    ep = nonsym_eig(f)
    values, vectors, _ = _positive_half(ep, "auxiliary solve")
    if values.size < m0:
        raise ConvergenceError(
            f"only {values.size} positive eigenvalues, need m0={m0}"
        )
    return Spectrum(
        kind="lambda_aux",
        values=values[:m0],
        vectors=vectors[:, :m0],
        meta={"n_ov": n, "m0": m0, "method": "dense", "variant": blocks.variant},
    )


def _aux_subspace(blocks: BseBlocks, m0, tol=1e-9, max_sweeps=2000, seed=0):
    """Subspace iteration on c I - (A0-B0)(A0+B0) for the lowest modes.

    Shift-free in the sense that no linear solves are used; the scalar
    c is a power-iteration upper bound that turns the smallest
    eigenvalues into the dominant ones.  Raises ``NotPdError`` when the
    Ritz values indicate indefinite A0 +/- B0 (callers fall back to the
    dense path) and ``ConvergenceError`` when the sweep budget runs out.
    """
    n = blocks.n_ov
    de = blocks.de.diag

    def amb_mv(u):
        return de * u - _part_matvec(blocks.w_bar, u) + _part_matvec(blocks.w_tilde, u)

    def apb_mv(u):
        return (de * u + 2.0 * blocks.v.matvec(u)
                - _part_matvec(blocks.w_bar, u) - _part_matvec(blocks.w_tilde, u))

    def k_mv(u):
        return amb_mv(apb_mv(u))

    def k_cols(x):
        out = np.empty_like(x)
        for j in range(x.shape[1]):
            out[:, j] = k_mv(x[:, j])
        return out

    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    v0 /= np.linalg.norm(v0)
    c_est = 0.0
    for _ in range(40):
        w = k_mv(v0)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            break
        v0 = w / nw
        c_est = nw
    c = 1.25 * c_est + 1.0

    dim = min(n, m0 + 4)
    x = rng.standard_normal((n, dim))
    x, _ = np.linalg.qr(x)
    theta = None
    for _ in range(max_sweeps):
        x, _ = np.linalg.qr(c * x - k_cols(x))
        kx = k_cols(x)
        h = x.T @ kx
        wh, vh = sla.eig(h)
        if float(np.max(np.abs(wh.imag), initial=0.0)) > 1e-6 * max(c_est, 1.0):
            continue  # projection not settled yet
        order = np.argsort(wh.real)
        theta = wh.real[order][:m0]
        yh = vh[:, order][:, :m0].real
        ritz = x @ yh
        resid = kx @ yh - ritz * theta[None, :]
        worst = float(np.max(np.linalg.norm(resid, axis=0), initial=0.0))
        if worst <= tol * max(c_est, 1.0):
            break
    else:
        raise ConvergenceError(
            f"subspace iteration did not converge in {max_sweeps} sweeps"
        )
    if theta is None or theta[0] <= 0.0:
        raise NotPdError("nonpositive Ritz value in product problem")
    omega = np.sqrt(theta)
    u = x @ yh
    vv = np.empty_like(u)
    for j in range(m0):
        vv[:, j] = apb_mv(u[:, j]) / omega[j]
    psi = np.vstack([(u + vv) / 2.0, (u - vv) / 2.0])
    psi /= np.linalg.norm(psi, axis=0)[None, :]
    return omega, psi


def reduced_galerkin(blocks_exact: BseBlocks, g1) -> Spectrum:
    """Galerkin projection of the exact problem onto the basis G1.

    Solves M1 Y = gamma S1 Y with M1 = G1.T F1 G1 and S1 = G1.T G1 via
    a QR factorization of G1 and a standard eigensolve of the
    transformed matrix; keeps the positive band of real Ritz values.
    """
    g1 = np.asarray(g1, dtype=float)
    n = blocks_exact.n_ov
    if g1.ndim != 2 or g1.shape[0] != 2 * n:
        raise DimensionMismatchError(
            f"basis must have 2 n_ov = {2 * n} rows, got {g1.shape}"
        )
    sv = sla.svdvals(g1)
    if sv.size == 0 or sv[-1] <= 1e-10:
        smin = float(sv[-1]) if sv.size else 0.0
        raise RankDeficientBasisError(
            f"basis smallest singular value {smin:.3e} <= 1e-10"
        )
    a = blocks_exact.block_a()
    b = blocks_exact.block_b()
    top = a @ g1[:n] + b @ g1[n:]
    bottom = -(b @ g1[:n] + a @ g1[n:])
    fg = np.vstack([top, bottom])
    m1 = g1.T @ fg
    q, r = np.linalg.qr(g1)
    left = sla.solve_triangular(r.T, m1, lower=True)
    t = sla.solve_triangular(r.T, left.T, lower=True).T
    ep = nonsym_eig(t)
    im_max = float(np.max(np.abs(ep.values.imag), initial=0.0))
    if im_max > _IMAG_TOL:
        raise ComplexRitzError(
            f"Ritz imaginary part {im_max:.3e} beyond tolerance"
        )
    gamma = ep.values.real
    pos = gamma > 0.0
    y = sla.solve_triangular(r, ep.vectors[:, pos].real)
    ritz = g1 @ y
    norms = np.linalg.norm(ritz, axis=0)
    ritz /= np.where(norms > 0, norms, 1.0)[None, :]
    return Spectrum(
        kind="gamma_reduced",
        values=gamma[pos],
        vectors=ritz,
        meta={"n_ov": n, "m0": g1.shape[1], "variant": blocks_exact.variant},
    )


def error_report(omega: Spectrum, lam: Spectrum, gamma: Spectrum,
                 mu: Spectrum, norm_f1_f0=None, extra_meta=None) -> SpectrumReport:
    """Tabulate per-level errors of the approximate spectra.

    Rows cover the first min(len) levels of the four spectra; an empty
    overlap is a ``LengthMismatchError``, as are spectra from systems
    of different pair dimension.
    """
    spectra = {"omega": omega, "lambda": lam, "gamma": gamma, "mu": mu}
    n_ovs = {s.meta.get("n_ov") for s in spectra.values() if s.meta.get("n_ov")}
    if len(n_ovs) > 1:
        raise LengthMismatchError(f"spectra from different systems: n_ov in {n_ovs}")
    rows = min(s.values.size for s in spectra.values())
    if rows == 0:
        empty = [k for k, s in spectra.items() if s.values.size == 0]
        raise LengthMismatchError(f"empty spectra: {', '.join(empty)}")
    n = np.arange(1, rows + 1)
    om = omega.values[:rows]
    la = lam.values[:rows]
    ga = gamma.values[:rows]
    tda = mu.values[:rows]
    meta = {
        "m0": lam.meta.get("m0"),
        "variant": lam.meta.get("variant"),
        "n_ov": omega.meta.get("n_ov"),
    }
    if norm_f1_f0:
        meta["norm_f1_f0"] = dict(norm_f1_f0)
    if extra_meta:
        meta.update(extra_meta)
    return SpectrumReport(
        n=n, omega=om, lam=la, gamma=ga, mu=tda,
        err_gamma=np.abs(ga - om),
        err_lambda=np.abs(la - om),
        err_mu=np.abs(tda - om),
        meta=meta,
    )


def block_difference_norms(exact: BseBlocks, truncated: BseBlocks) -> dict:
    """Frobenius and spectral-estimate norms of F1 - F0 (and of F1)."""
    f1 = exact.full_matrix()
    f0 = truncated.full_matrix()
    diff = f1 - f0
    return {
        "fro": float(np.linalg.norm(diff)),
        "spectral": float(spectral_norm_est(diff)),
        "f1_fro": float(np.linalg.norm(f1)),
        "f1_spectral": float(spectral_norm_est(f1)),
    }
