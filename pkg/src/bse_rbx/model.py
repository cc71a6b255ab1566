"""Model container, synthetic generator and the bundle file format.

A bundle is a UTF-8, line-oriented text file::

    BSEBUNDLE 1
    nb <n_basis> nocc <n_occ> tei <dense|cholesky>
    ENERGIES
    <n_basis whitespace-separated decimals>
    END
    COEFFS
    <n_basis rows of n_basis decimals>
    END
    TEI DENSE            (or: TEI CHOLESKY <rank>)
    <nb^2 rows of nb^2 decimals>   (or: nb^2 rows of <rank> decimals)
    END

Numbers are written with 17 significant digits so doubles round-trip
exactly; writing a parsed bundle reproduces the canonical file byte for
byte.  Dense TEI rows may carry only the upper triangle (row i starting
at column i); the lower part is mirrored on load.  Slice symmetry of
the TEI under mu <-> nu is enforced by symmetrization on load and the
largest correction is logged.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParamsError, ParseError, ValidationError
from .tei import CholTei

__all__ = [
    "SynthParams",
    "BseInput",
    "synth_generate",
    "parse_bundle",
    "write_bundle",
    "validate",
]

log = logging.getLogger(__name__)

_MAGIC = "BSEBUNDLE"
_VERSION = 1


@dataclass(frozen=True)
class SynthParams:
    """Parameters of the synthetic model generator."""

    n_basis: int
    n_occ: int
    gap: float
    decay_z: float
    n_terms: int
    seed: int


@dataclass
class BseInput:
    """Orbital energies, coefficients and the TEI in one container.

    ``tei`` is either a dense (nb^2, nb^2) array or a :class:`CholTei`.
    """

    n_basis: int
    n_occ: int
    energies: np.ndarray
    coeffs: np.ndarray
    tei: np.ndarray | CholTei

    @property
    def n_virt(self) -> int:
        return self.n_basis - self.n_occ

    @property
    def n_ov(self) -> int:
        return self.n_occ * self.n_virt

    @property
    def has_dense_tei(self) -> bool:
        return not isinstance(self.tei, CholTei)


def _check_params(p: SynthParams):
    if p.n_basis < 2:
        raise InvalidParamsError(f"n_basis must be >= 2, got {p.n_basis}")
    if not (1 <= p.n_occ < p.n_basis):
        raise InvalidParamsError(
            f"n_occ must satisfy 1 <= n_occ < n_basis, got {p.n_occ}"
        )
    if not (p.gap > 0):
        raise InvalidParamsError(f"gap must be positive, got {p.gap}")
    if not (p.decay_z > 0):
        raise InvalidParamsError(f"decay_z must be positive, got {p.decay_z}")
    if not (1 <= p.n_terms <= p.n_basis**2):
        raise InvalidParamsError(
            f"n_terms must be in 1..n_basis^2, got {p.n_terms}"
        )


def synth_generate(p: SynthParams) -> BseInput:
    """Deterministic synthetic model with a prescribed singular decay.

    The TEI matrix is the positive semidefinite sum
    ``B = sum_k sigma_k vec(G_k) vec(G_k).T`` with
    ``sigma_k = exp(-decay_z * k / n_basis)`` and random symmetric
    unit-Frobenius ``G_k``, so every unfolding slice is symmetric by
    construction.  Coefficients are a Haar-random orthogonal matrix.
    Occupied energies are drawn in [-2, -0.5]; the lowest virtual sits
    exactly ``gap`` above the highest occupied.  The same seed always
    reproduces the same model bit for bit.
    """
    _check_params(p)
    rng = np.random.default_rng(p.seed)
    nb, no = p.n_basis, p.n_occ
    n2 = nb * nb

    w = np.empty((n2, p.n_terms))
    for k in range(p.n_terms):
        g = rng.standard_normal((nb, nb))
        g = (g + g.T) / 2.0
        g /= np.linalg.norm(g)
        sigma = math.exp(-p.decay_z * (k + 1) / nb)
        w[:, k] = math.sqrt(sigma) * g.ravel()
    b = w @ w.T
    # gemm may yield last-ulp differences at index-symmetric positions,
    # so project onto the canonical symmetrized form up front; rewrites
    # of the emitted bundle are then byte-identical.
    b, _ = _symmetrize_dense_tei(b, nb)

    a = rng.standard_normal((nb, nb))
    q, r = np.linalg.qr(a)
    coeffs = q * np.sign(np.diag(r))

    occ = np.sort(rng.uniform(-2.0, -0.5, no))
    homo = occ[-1]
    nv = nb - no
    if nv > 1:
        extra = np.sort(rng.uniform(0.0, 1.5, nv - 1))
        virt = np.concatenate(([homo + p.gap], homo + p.gap + extra))
    else:
        virt = np.array([homo + p.gap])
    energies = np.concatenate((occ, virt))

    return BseInput(n_basis=nb, n_occ=no, energies=energies,
                    coeffs=coeffs, tei=b)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_bundle(inp: BseInput, path) -> None:
    """Write ``inp`` to ``path`` in canonical bundle form."""
    nb = inp.n_basis
    n2 = nb * nb
    kind = "dense" if inp.has_dense_tei else "cholesky"
    lines = [
        f"{_MAGIC} {_VERSION}",
        f"nb {nb} nocc {inp.n_occ} tei {kind}",
        "ENERGIES",
        " ".join(_fmt(e) for e in inp.energies),
        "END",
        "COEFFS",
    ]
    for row in np.asarray(inp.coeffs, dtype=float):
        lines.append(" ".join(_fmt(x) for x in row))
    lines.append("END")
    if inp.has_dense_tei:
        lines.append("TEI DENSE")
        body = np.asarray(inp.tei, dtype=float)
    else:
        lines.append(f"TEI CHOLESKY {inp.tei.rank}")
        body = inp.tei.columns
    if body.shape[0] != n2:
        raise ValidationError(f"tei rows must be nb^2 = {n2}, got {body.shape[0]}")
    for row in body:
        lines.append(" ".join(_fmt(x) for x in row))
    lines.append("END")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


class _Reader:
    def __init__(self, path):
        with open(path, "r", encoding="utf-8") as fh:
            self.lines = fh.read().splitlines()
        self.pos = 0

    def next_line(self, what):
        while self.pos < len(self.lines) and not self.lines[self.pos].strip():
            self.pos += 1
        if self.pos >= len(self.lines):
            raise ParseError(f"unexpected end of file, expected {what}",
                             line=len(self.lines))
        self.pos += 1
        return self.lines[self.pos - 1].strip(), self.pos

    def expect_eof(self):
        while self.pos < len(self.lines):
            if self.lines[self.pos].strip():
                raise ParseError("trailing content after final END",
                                 line=self.pos + 1)
            self.pos += 1


def _parse_floats(text, lineno, what):
    out = []
    for tok in text.split():
        try:
            out.append(float(tok))
        except ValueError:
            raise ParseError(f"bad decimal {tok!r} in {what}", line=lineno) from None
    return out


def _parse_int(tok, lineno, what):
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"bad integer {tok!r} for {what}", line=lineno) from None


def _read_matrix_section(rd, n_rows, n_cols, what, upper_ok=False):
    """Read rows until END; each row full or (optionally) upper-triangle."""
    mat = np.zeros((n_rows, n_cols))
    for i in range(n_rows):
        text, lineno = rd.next_line(f"{what} row {i + 1}")
        if text == "END":
            raise ParseError(f"{what} ended after {i} of {n_rows} rows",
                             line=lineno)
        vals = _parse_floats(text, lineno, f"{what} row {i + 1}")
        if len(vals) == n_cols:
            mat[i, :] = vals
        elif upper_ok and len(vals) == n_cols - i:
            mat[i, i:] = vals
            mat[i, :i] = mat[:i, i]
        else:
            raise ParseError(
                f"{what} row {i + 1}: expected {n_cols} values"
                + (f" (or {n_cols - i} for the upper triangle)" if upper_ok else "")
                + f", got {len(vals)}",
                line=lineno,
            )
    text, lineno = rd.next_line(f"END of {what}")
    if text != "END":
        raise ParseError(f"expected END of {what}, got {text!r}", line=lineno)
    return mat


def _symmetrize_dense_tei(b, nb):
    """Project onto the full index symmetry group of a real TEI.

    Three sequential pairwise averages (mu<->nu, lam<->sig, pair swap).
    Each average of two bitwise-equal values is exact, so the projection
    is idempotent at the bit level and canonical rewrites stay stable.
    """
    t = b.reshape(nb, nb, nb, nb)
    sym = (t + t.transpose(1, 0, 2, 3)) / 2.0
    sym = (sym + sym.transpose(0, 1, 3, 2)) / 2.0
    sym = (sym + sym.transpose(2, 3, 0, 1)) / 2.0
    correction = float(np.max(np.abs(sym - t)))
    return sym.reshape(nb * nb, nb * nb), correction


def parse_bundle(path) -> BseInput:
    """Parse and validate a bundle file.

    Raises :class:`ParseError` with a line diagnostic on malformed
    input and :class:`ValidationError` naming the violated invariant
    when the parsed model is inconsistent.
    """
    rd = _Reader(path)

    text, lineno = rd.next_line("header")
    toks = text.split()
    if len(toks) != 2 or toks[0] != _MAGIC:
        raise ParseError(f"expected {_MAGIC!r} header, got {text!r}", line=lineno)
    version = _parse_int(toks[1], lineno, "version")
    if version != _VERSION:
        raise ParseError(f"unsupported bundle version {version}", line=lineno)

    text, lineno = rd.next_line("size line")
    toks = text.split()
    if len(toks) != 6 or toks[0] != "nb" or toks[2] != "nocc" or toks[4] != "tei":
        raise ParseError(
            f"expected 'nb <int> nocc <int> tei <dense|cholesky>', got {text!r}",
            line=lineno,
        )
    nb = _parse_int(toks[1], lineno, "nb")
    no = _parse_int(toks[3], lineno, "nocc")
    kind = toks[5]
    if kind not in ("dense", "cholesky"):
        raise ParseError(f"tei kind must be 'dense' or 'cholesky', got {kind!r}",
                         line=lineno)
    if nb < 1:
        raise ParseError(f"nb must be positive, got {nb}", line=lineno)
    n2 = nb * nb

    text, lineno = rd.next_line("ENERGIES")
    if text != "ENERGIES":
        raise ParseError(f"expected ENERGIES, got {text!r}", line=lineno)
    vals = []
    while True:
        text, lineno = rd.next_line("energies or END")
        if text == "END":
            break
        vals.extend(_parse_floats(text, lineno, "energies"))
    if len(vals) != nb:
        raise ParseError(f"ENERGIES holds {len(vals)} values, expected {nb}",
                         line=lineno)
    energies = np.array(vals)

    text, lineno = rd.next_line("COEFFS")
    if text != "COEFFS":
        raise ParseError(f"expected COEFFS, got {text!r}", line=lineno)
    coeffs = _read_matrix_section(rd, nb, nb, "COEFFS")

    text, lineno = rd.next_line("TEI section")
    toks = text.split()
    if kind == "dense":
        if toks != ["TEI", "DENSE"]:
            raise ParseError(f"expected 'TEI DENSE', got {text!r}", line=lineno)
        raw = _read_matrix_section(rd, n2, n2, "TEI DENSE", upper_ok=True)
        tei, correction = _symmetrize_dense_tei(raw, nb)
        if correction > 0.0:
            level = logging.WARNING if correction > 1e-8 else logging.INFO
            log.log(level, "tei symmetrization correction %.3e", correction)
    else:
        if len(toks) != 3 or toks[:2] != ["TEI", "CHOLESKY"]:
            raise ParseError(f"expected 'TEI CHOLESKY <rank>', got {text!r}",
                             line=lineno)
        rank = _parse_int(toks[2], lineno, "cholesky rank")
        if rank < 0:
            raise ParseError(f"cholesky rank must be nonnegative, got {rank}",
                             line=lineno)
        cols = _read_matrix_section(rd, n2, rank, "TEI CHOLESKY")
        tei = CholTei.from_columns(cols, nb)
    rd.expect_eof()

    inp = BseInput(n_basis=nb, n_occ=no, energies=energies,
                   coeffs=coeffs, tei=tei)
    violations = validate(inp)
    if violations:
        raise ValidationError(violations)
    return inp


def validate(inp: BseInput) -> list[str]:
    """Check model invariants; returns a list of violations (empty = ok).

    Coefficient orthonormality is advisory only: a deviation
    ``||C.T C - I||_F > 1e-6`` is logged as a warning, never listed.
    """
    violations = []
    nb, no = inp.n_basis, inp.n_occ
    n2 = nb * nb

    if not (1 <= no < nb):
        violations.append(
            f"n_occ must satisfy 1 <= n_occ < n_basis, got n_occ={no} nb={nb}"
        )

    e = np.asarray(inp.energies, dtype=float)
    if e.shape != (nb,):
        violations.append(f"energies must have length {nb}, got shape {e.shape}")
    elif not np.all(np.isfinite(e)):
        violations.append("energies contain non-finite values")
    elif np.any(np.diff(e) < 0):
        violations.append("energies not ascending")
    elif 1 <= no < nb:
        delta = float(e[no] - e[no - 1])
        if delta <= 0:
            violations.append(f"homo-lumo gap not positive (delta={delta:.6e})")

    c = np.asarray(inp.coeffs, dtype=float)
    if c.shape != (nb, nb):
        violations.append(f"coeffs must be {nb} x {nb}, got shape {c.shape}")
    elif not np.all(np.isfinite(c)):
        violations.append("coeffs contain non-finite values")
    else:
        dev = float(np.linalg.norm(c.T @ c - np.eye(nb)))
        if dev > 1e-6:
            log.warning("coefficients deviate from orthonormality: "
                        "||C.T C - I||_F = %.3e", dev)

    if inp.has_dense_tei:
        b = np.asarray(inp.tei, dtype=float)
        if b.shape != (n2, n2):
            violations.append(f"tei must be {n2} x {n2}, got shape {b.shape}")
        elif not np.all(np.isfinite(b)):
            violations.append("tei contains non-finite values")
        else:
            scale = max(float(np.max(np.abs(b))), 1.0)
            sym, correction = _symmetrize_dense_tei(b, nb)
            if correction > 1e-8 * scale:
                violations.append(f"tei asymmetry (max correction {correction:.6e})")
            else:
                lam = np.linalg.eigvalsh((b + b.T) / 2.0)
                lam_max = max(float(lam[-1]), 1.0)
                if lam[0] < -1e-10 * lam_max:
                    violations.append(
                        f"tei not positive semidefinite (min eigenvalue {lam[0]:.6e})"
                    )
    else:
        ct = inp.tei
        if ct.n_basis != nb:
            violations.append(
                f"cholesky tei basis size {ct.n_basis} does not match nb={nb}"
            )
        elif not np.all(np.isfinite(ct.columns)):
            violations.append("tei cholesky columns contain non-finite values")
        else:
            unf = ct.unfoldings()
            skew = np.abs(unf - unf.transpose(0, 2, 1)).max(initial=0.0)
            scale = max(float(np.abs(ct.columns).max(initial=0.0)), 1.0)
            if skew > 1e-8 * scale:
                violations.append(f"tei asymmetry (max correction {skew:.6e})")
    return violations
