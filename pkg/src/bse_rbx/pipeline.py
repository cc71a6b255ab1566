"""End-to-end runs shared by the command line interface and tests.

A run builds the factored interaction once, assembles an exact and a
truncated operator, solves both, projects the exact operator onto the
truncated eigenbasis and tabulates the errors.  File emission is
deterministic; wall-clock timings go to the log only, never into
output files.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InvalidParamsError
from .model import BseInput, SynthParams, parse_bundle, synth_generate, write_bundle
from .report import (
    SPECTRUM_HEADER,
    spectrum_rows,
    write_csv,
    write_json,
    write_profile_csv,
    write_spectrum_csv,
)
from .screen import (
    build_core,
    delta_eps,
    regroup_w_bar_dense,
    regroup_w_tilde_dense,
    w_block,
)
from .solve import (
    VARIANT_KEEP_WBAR,
    VARIANT_TRUNCATE_ALL,
    VARIANTS,
    assemble_blocks,
    block_difference_norms,
    error_report,
    reduced_galerkin,
    solve_aux,
    solve_dense,
    solve_sym_reduced,
    solve_tda,
)
from .tei import (
    cholesky_tei,
    half_transforms,
    pair_factor,
    singular_profile,
    v_factor_ext,
    v_factor_ov,
    vo_pairs,
)

log = logging.getLogger(__name__)

__all__ = [
    "RunConfig",
    "SystemParts",
    "SolveResult",
    "build_system",
    "assemble_variant",
    "run_gen",
    "run_factor",
    "run_solve",
    "run_sweep",
]


@dataclass
class RunConfig:
    """Configuration of a solve or sweep run."""

    input: str | None = None
    synth: SynthParams | None = None
    out_dir: str = "."
    chol_tol: float = 1e-8
    eps_v: float = 0.0
    eps_wbar: float = 0.0
    eps_wtilde: float = 0.0
    variant: str | None = None
    m0: int = 10
    fmt: str = "csv"
    dense_guard: int | None = None
    plots: bool = True
    aux_method: str = "dense"


@dataclass
class SystemParts:
    """Factored interaction and exact blocks of one model."""

    inp: BseInput
    chol: object
    l_v: object
    u_v: object
    w_v: object
    l_vo: object
    de: object
    core: object
    w_oo_vv: object
    w_ov_vo: object
    wbar_dense: np.ndarray
    wtilde_dense: np.ndarray
    blocks_exact: object


@dataclass
class SolveResult:
    parts: SystemParts
    blocks_trunc: object
    omega: object
    omega_sym: object
    lam: object
    gamma: object
    mu: object
    norms: dict
    report: object
    profiles: dict = field(default_factory=dict)
    files: list = field(default_factory=list)


def _guards(cfg: RunConfig) -> dict:
    if cfg.dense_guard is None:
        return {"regroup": 512, "solve": 1024}
    g = int(cfg.dense_guard)
    return {"regroup": g, "solve": 2 * g}


def load_input(cfg: RunConfig) -> BseInput:
    if (cfg.input is None) == (cfg.synth is None):
        raise InvalidParamsError(
            "exactly one of an input bundle or generator parameters is required"
        )
    if cfg.input is not None:
        return parse_bundle(cfg.input)
    return synth_generate(cfg.synth)


def build_system(inp: BseInput, chol_tol: float, regroup_guard=512) -> SystemParts:
    """Factor the interaction and assemble the exact blocks."""
    t0 = time.perf_counter()
    chol = cholesky_tei(inp, chol_tol)
    transforms = half_transforms(chol, inp.coeffs)
    no = inp.n_occ
    l_v = v_factor_ov(chol, inp.coeffs, no, transforms=transforms)
    u_v, w_v = v_factor_ext(chol, inp.coeffs, no, transforms=transforms)
    l_vo = pair_factor(chol, inp.coeffs, vo_pairs(inp.n_basis, no),
                       transforms=transforms)
    de = delta_eps(inp.energies, no)
    core = build_core(l_v, de)
    w_oo_vv = w_block(u_v, core, w_v)
    w_ov_vo = w_block(l_v, core, l_vo)
    wbar = regroup_w_bar_dense(w_oo_vv, no, inp.n_virt, guard=regroup_guard)
    wtilde = regroup_w_tilde_dense(w_ov_vo, no, inp.n_virt, guard=regroup_guard)
    blocks_exact = assemble_blocks(de, l_v, wbar, wtilde, "exact")
    log.info("system build: nb=%d n_ov=%d rank=%d (%.3f s)",
             inp.n_basis, inp.n_ov, chol.rank, time.perf_counter() - t0)
    return SystemParts(
        inp=inp, chol=chol, l_v=l_v, u_v=u_v, w_v=w_v, l_vo=l_vo, de=de,
        core=core, w_oo_vv=w_oo_vv, w_ov_vo=w_ov_vo,
        wbar_dense=wbar, wtilde_dense=wtilde, blocks_exact=blocks_exact,
    )


def assemble_variant(parts: SystemParts, variant, eps_v, eps_wbar, eps_wtilde):
    """Truncated blocks for one variant from prebuilt exact parts."""
    return assemble_blocks(
        parts.de, parts.l_v, parts.wbar_dense, parts.wtilde_dense, variant,
        eps_v=eps_v, eps_wbar=eps_wbar, eps_wtilde=eps_wtilde,
    )


def run_gen(params: SynthParams, out_path) -> BseInput:
    inp = synth_generate(params)
    write_bundle(inp, out_path)
    log.info("wrote bundle %s (nb=%d nocc=%d)", out_path,
             params.n_basis, params.n_occ)
    return inp


def run_factor(cfg: RunConfig) -> dict:
    """Factor the TEI of a model and emit singular-value profiles."""
    inp = load_input(cfg)
    t0 = time.perf_counter()
    chol = cholesky_tei(inp, cfg.chol_tol)
    transforms = half_transforms(chol, inp.coeffs)
    l_v = v_factor_ov(chol, inp.coeffs, inp.n_occ, transforms=transforms)
    elapsed = time.perf_counter() - t0
    profiles = {"B": singular_profile(chol), "V": singular_profile(l_v)}
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for name, key in (("sv_B.csv", "B"), ("sv_V.csv", "V")):
        write_profile_csv(out / name, profiles[key])
        files.append(out / name)
    if cfg.plots:
        from .plots import save_singular_profiles

        save_singular_profiles(profiles, out / "sv_decay.png")
        files.append(out / "sv_decay.png")
    log.info("factorization took %.3f s", elapsed)
    return {
        "chol": chol, "l_v": l_v, "profiles": profiles, "files": files,
        "stats": {
            "rank_tei": chol.rank,
            "resid_trace": chol.resid_trace,
            "rank_v": l_v.rank,
            "n_ov": inp.n_ov,
        },
    }


def _effective_m0(cfg_m0, n_ov) -> int:
    m0 = min(int(cfg_m0), n_ov)
    if m0 != cfg_m0:
        log.warning("m0 clamped to n_ov=%d", n_ov)
    return m0


def _solve_on_parts(parts: SystemParts, cfg: RunConfig, variant,
                    eps_v, eps_wbar, eps_wtilde, omega=None):
    """One truncation point: auxiliary solve, projection, errors."""
    guards = _guards(cfg)
    blocks_trunc = assemble_variant(parts, variant, eps_v, eps_wbar, eps_wtilde)
    if omega is None:
        omega = solve_dense(parts.blocks_exact, guard=guards["solve"])
    m0 = _effective_m0(cfg.m0, parts.inp.n_ov)
    lam = solve_aux(blocks_trunc, m0, method=cfg.aux_method,
                    guard=guards["solve"])
    gamma = reduced_galerkin(parts.blocks_exact, lam.vectors)
    mu = solve_tda(parts.blocks_exact)
    norms = block_difference_norms(parts.blocks_exact, blocks_trunc)
    rep = error_report(
        omega, lam, gamma, mu,
        norm_f1_f0={"fro": norms["fro"], "spectral": norms["spectral"]},
        extra_meta={"ranks": blocks_trunc.part_ranks()},
    )
    return blocks_trunc, omega, lam, gamma, mu, norms, rep


def run_solve(cfg: RunConfig) -> SolveResult:
    """Full pipeline for one configuration, writing report files."""
    inp = load_input(cfg)
    guards = _guards(cfg)
    parts = build_system(inp, cfg.chol_tol, regroup_guard=guards["regroup"])
    variant = cfg.variant or VARIANT_KEEP_WBAR
    if variant not in VARIANTS:
        raise InvalidParamsError(f"unknown variant {variant!r}")
    t0 = time.perf_counter()
    blocks_trunc, omega, lam, gamma, mu, norms, rep = _solve_on_parts(
        parts, cfg, variant, cfg.eps_v, cfg.eps_wbar, cfg.eps_wtilde
    )
    try:
        omega_sym = solve_sym_reduced(parts.blocks_exact)
        sym_note = "ok"
    except Exception as exc:  # indefinite A +/- B on this model
        omega_sym = None
        sym_note = f"unavailable: {exc}"
        log.info("half-size symmetric pathway unavailable: %s", exc)
    solve_time = time.perf_counter() - t0

    profiles = {
        "B": singular_profile(parts.chol),
        "V": singular_profile(parts.l_v),
        "Wbar": singular_profile(parts.wbar_dense),
        "Wtilde": singular_profile(parts.wtilde_dense),
    }

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []

    if cfg.fmt == "json":
        obj = {
            "columns": SPECTRUM_HEADER,
            "rows": [[float(x) for x in row] for row in spectrum_rows(rep)],
        }
        write_json(out / "spectrum.json", obj, schema_name="spectrum.schema.json")
        files.append(out / "spectrum.json")
    else:
        write_spectrum_csv(out / "spectrum.csv", rep)
        files.append(out / "spectrum.csv")

    meta = {
        "n_basis": inp.n_basis,
        "n_occ": inp.n_occ,
        "n_ov": inp.n_ov,
        "gap": float(parts.de.gap),
        "chol_tol": float(cfg.chol_tol),
        "variant": variant,
        "m0": int(lam.meta["m0"]),
        "seed": cfg.synth.seed if cfg.synth is not None else None,
        "input": str(cfg.input) if cfg.input is not None else None,
        "eps": {
            "v": float(cfg.eps_v),
            "w_bar": float(cfg.eps_wbar),
            "w_tilde": float(cfg.eps_wtilde),
        },
        "ranks": {
            "tei": int(parts.chol.rank),
            **{k: int(v) for k, v in blocks_trunc.part_ranks().items()},
        },
        "norms": {
            "f1_f0_fro": norms["fro"],
            "f1_f0_spectral": norms["spectral"],
            "f1_fro": norms["f1_fro"],
            "f1_spectral": norms["f1_spectral"],
        },
        "sym_pathway": sym_note,
    }
    write_json(out / "meta.json", meta, schema_name="meta.schema.json")
    files.append(out / "meta.json")

    for name, key in (("sv_B.csv", "B"), ("sv_V.csv", "V"),
                      ("sv_Wbar.csv", "Wbar"), ("sv_Wtilde.csv", "Wtilde")):
        write_profile_csv(out / name, profiles[key])
        files.append(out / name)

    if cfg.plots:
        from .plots import save_singular_profiles, save_spectrum_comparison

        save_singular_profiles(profiles, out / "sv_decay.png")
        save_spectrum_comparison(rep, out / "spectrum.png")
        files.extend([out / "sv_decay.png", out / "spectrum.png"])

    log.info("solve took %.3f s (omega1=%.8f)", solve_time, omega.values[0])
    return SolveResult(
        parts=parts, blocks_trunc=blocks_trunc, omega=omega,
        omega_sym=omega_sym, lam=lam, gamma=gamma, mu=mu, norms=norms,
        report=rep, profiles=profiles, files=files,
    )


EPS_SWEEP_HEADER = [
    "variant", "eps", "m0", "r_v", "r_wbar", "r_wtilde",
    "norm_f1_f0_fro", "norm_f1_f0_spectral",
    "omega1", "err_lambda1", "err_gamma1", "err_mu1",
]

M0_SWEEP_HEADER = [
    "variant", "m0", "eps_v", "eps_wbar", "eps_wtilde",
    "r_v", "r_wbar", "r_wtilde",
    "norm_f1_f0_fro", "norm_f1_f0_spectral",
    "omega1", "err_lambda1", "err_gamma1", "err_mu1",
]


def run_sweep(cfg: RunConfig, eps_list=None, m0_list=None) -> dict:
    """Truncation (eps) or basis-size (m0) sweep over one model.

    With no explicit variant the eps sweep reports both ``truncate_all``
    and ``keep_wbar`` rows.
    """
    if (eps_list is None) == (m0_list is None):
        raise InvalidParamsError("exactly one of eps_list or m0_list is required")
    inp = load_input(cfg)
    guards = _guards(cfg)
    parts = build_system(inp, cfg.chol_tol, regroup_guard=guards["regroup"])
    omega = solve_dense(parts.blocks_exact, guard=guards["solve"])
    if cfg.variant is None:
        variants = [VARIANT_TRUNCATE_ALL, VARIANT_KEEP_WBAR]
    else:
        if cfg.variant not in VARIANTS:
            raise InvalidParamsError(f"unknown variant {cfg.variant!r}")
        variants = [cfg.variant]

    rows = []
    if eps_list is not None:
        kind = "eps"
        for variant in variants:
            for eps in eps_list:
                eps = float(eps)
                _, _, lam, gamma, mu, norms, rep = _solve_on_parts(
                    parts, cfg, variant, eps, eps, eps, omega=omega
                )
                rows.append({
                    "variant": variant,
                    "eps": eps,
                    "m0": int(lam.meta["m0"]),
                    "r_v": rep.meta["ranks"]["v"],
                    "r_wbar": rep.meta["ranks"]["w_bar"],
                    "r_wtilde": rep.meta["ranks"]["w_tilde"],
                    "norm_f1_f0_fro": norms["fro"],
                    "norm_f1_f0_spectral": norms["spectral"],
                    "omega1": float(omega.values[0]),
                    "err_lambda1": float(rep.err_lambda[0]),
                    "err_gamma1": float(rep.err_gamma[0]),
                    "err_mu1": float(rep.err_mu[0]),
                })
        header = EPS_SWEEP_HEADER
    else:
        kind = "m0"
        for variant in variants:
            for m0 in m0_list:
                point_cfg = replace(cfg, m0=int(m0))
                _, _, lam, gamma, mu, norms, rep = _solve_on_parts(
                    parts, point_cfg, variant,
                    cfg.eps_v, cfg.eps_wbar, cfg.eps_wtilde, omega=omega
                )
                rows.append({
                    "variant": variant,
                    "m0": int(lam.meta["m0"]),
                    "eps_v": float(cfg.eps_v),
                    "eps_wbar": float(cfg.eps_wbar),
                    "eps_wtilde": float(cfg.eps_wtilde),
                    "r_v": rep.meta["ranks"]["v"],
                    "r_wbar": rep.meta["ranks"]["w_bar"],
                    "r_wtilde": rep.meta["ranks"]["w_tilde"],
                    "norm_f1_f0_fro": norms["fro"],
                    "norm_f1_f0_spectral": norms["spectral"],
                    "omega1": float(omega.values[0]),
                    "err_lambda1": float(rep.err_lambda[0]),
                    "err_gamma1": float(rep.err_gamma[0]),
                    "err_mu1": float(rep.err_mu[0]),
                })
        header = M0_SWEEP_HEADER

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    write_csv(out / "sweep.csv", header,
              [tuple(r[h] for h in header) for r in rows])
    files.append(out / "sweep.csv")
    if cfg.fmt == "json":
        obj = {
            "kind": kind,
            "columns": header,
            "rows": [[r[h] for h in header] for r in rows],
        }
        write_json(out / "sweep.json", obj, schema_name="sweep.schema.json")
        files.append(out / "sweep.json")
    if cfg.plots:
        from .plots import save_m0_sweep, save_sweep_errors

        if kind == "eps":
            save_sweep_errors(rows, out / "sweep_error.png")
        else:
            save_m0_sweep(rows, out / "sweep_error.png")
        files.append(out / "sweep_error.png")
    return {"kind": kind, "rows": rows, "files": files, "omega": omega,
            "parts": parts}
