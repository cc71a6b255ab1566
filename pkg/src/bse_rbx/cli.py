"""Command line interface: gen, factor, solve and sweep subcommands.

Failures surface as a single machine-parseable line
``ERROR <code>: <message>`` on stderr with a nonzero exit code.  The
environment variable ``BSE_RBX_THREADS`` caps the number of threads
used by the underlying linear-algebra libraries.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .errors import BseError
from .model import SynthParams
from .pipeline import RunConfig, run_factor, run_gen, run_solve, run_sweep

log = logging.getLogger(__name__)


def _add_model_args(p, need_seed_default=False):
    p.add_argument("--input", help="bundle file to read")
    p.add_argument("--nb", type=int, help="basis size for a generated model")
    p.add_argument("--nocc", type=int, help="occupied count for a generated model")
    p.add_argument("--gap", type=float, default=1.0,
                   help="frontier gap of a generated model (hartree)")
    p.add_argument("--decay-z", type=float, default=3.0,
                   help="singular decay rate of the generated interaction")
    p.add_argument("--n-terms", type=int, default=None,
                   help="number of interaction terms (default nb^2 / 2)")
    p.add_argument("--seed", type=int, default=0, help="generator seed")


def _add_solver_args(p):
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--chol-tol", type=float, default=1e-8,
                   help="residual-trace tolerance of the TEI factorization")
    p.add_argument("--eps", type=float, default=None,
                   help="shared truncation tolerance for V, Wbar and Wtil")
    p.add_argument("--eps-v", type=float, default=None)
    p.add_argument("--eps-wbar", type=float, default=None)
    p.add_argument("--eps-wtilde", type=float, default=None)
    p.add_argument("--variant",
                   choices=["exact", "truncate-all", "keep-wbar"],
                   default=None, help="truncation variant")
    p.add_argument("--m0", type=int, default=10,
                   help="number of auxiliary eigenpairs in the reduced basis")
    p.add_argument("--format", choices=["csv", "json"], default="csv",
                   dest="fmt", help="report format")
    p.add_argument("--dense-guard", type=int, default=None,
                   help="override the n_ov size guard of dense code paths")
    p.add_argument("--aux-method", choices=["dense", "iterative"],
                   default="dense", help="auxiliary eigensolver")
    p.add_argument("--no-plots", action="store_true",
                   help="skip figure rendering")


def _synth_from_args(args) -> SynthParams | None:
    if args.input is not None:
        return None
    if args.nb is None or args.nocc is None:
        raise BseError("either --input or both --nb and --nocc are required")
    n_terms = args.n_terms
    if n_terms is None:
        n_terms = max(1, args.nb * args.nb // 2)
    return SynthParams(n_basis=args.nb, n_occ=args.nocc, gap=args.gap,
                       decay_z=args.decay_z, n_terms=n_terms, seed=args.seed)


def _eps_triple(args):
    base = args.eps if args.eps is not None else 0.0
    ev = args.eps_v if args.eps_v is not None else base
    ewb = args.eps_wbar if args.eps_wbar is not None else base
    ewt = args.eps_wtilde if args.eps_wtilde is not None else base
    return ev, ewb, ewt


def _variant(args):
    if args.variant is None:
        return None
    return args.variant.replace("-", "_")


def _config(args) -> RunConfig:
    ev, ewb, ewt = _eps_triple(args)
    return RunConfig(
        input=args.input,
        synth=_synth_from_args(args),
        out_dir=args.out,
        chol_tol=args.chol_tol,
        eps_v=ev, eps_wbar=ewb, eps_wtilde=ewt,
        variant=_variant(args),
        m0=args.m0,
        fmt=args.fmt,
        dense_guard=args.dense_guard,
        plots=not args.no_plots,
        aux_method=args.aux_method,
    )


def _cmd_gen(args) -> int:
    params = SynthParams(n_basis=args.nb, n_occ=args.nocc, gap=args.gap,
                         decay_z=args.decay_z,
                         n_terms=args.n_terms or max(1, args.nb * args.nb // 2),
                         seed=args.seed)
    run_gen(params, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_factor(args) -> int:
    cfg = _config(args)
    res = run_factor(cfg)
    stats = res["stats"]
    print(f"rank_tei {stats['rank_tei']}")
    print(f"resid_trace {stats['resid_trace']:.6e}")
    print(f"rank_v {stats['rank_v']}")
    for f in res["files"]:
        print(f"wrote {f}")
    return 0


def _cmd_solve(args) -> int:
    cfg = _config(args)
    res = run_solve(cfg)
    print(f"omega1 {res.omega.values[0]:.12f}")
    print(f"gamma1 {res.gamma.values[0]:.12f}")
    for f in res.files:
        print(f"wrote {f}")
    return 0


def _parse_list(text, cast, what):
    try:
        return [cast(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise BseError(f"bad {what} list: {text!r}") from None


def _cmd_sweep(args) -> int:
    cfg = _config(args)
    eps_list = m0_list = None
    if args.eps_list is not None:
        eps_list = _parse_list(args.eps_list, float, "eps")
    if args.m0_list is not None:
        m0_list = _parse_list(args.m0_list, int, "m0")
    res = run_sweep(cfg, eps_list=eps_list, m0_list=m0_list)
    for f in res["files"]:
        print(f"wrote {f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="bse-rbx",
        description="Reduced-basis solver for two-block excitation problems",
    )
    ap.add_argument("--verbose", action="store_true", help="log to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic model bundle")
    p.add_argument("--out", required=True, help="bundle file to write")
    p.add_argument("--nb", type=int, required=True)
    p.add_argument("--nocc", type=int, required=True)
    p.add_argument("--gap", type=float, default=1.0)
    p.add_argument("--decay-z", type=float, default=3.0)
    p.add_argument("--n-terms", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("factor", help="factor the TEI and profile its decay")
    _add_model_args(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--chol-tol", type=float, default=1e-8)
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=_cmd_factor, fmt="csv", dense_guard=None,
                   aux_method="dense", m0=10, variant=None,
                   eps=None, eps_v=None, eps_wbar=None, eps_wtilde=None)

    p = sub.add_parser("solve", help="solve exact and truncated problems")
    _add_model_args(p)
    _add_solver_args(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("sweep", help="sweep truncation tolerance or basis size")
    _add_model_args(p)
    _add_solver_args(p)
    p.add_argument("--eps-list", help="comma-separated truncation tolerances")
    p.add_argument("--m0-list", help="comma-separated basis sizes")
    p.set_defaults(func=_cmd_sweep)

    return ap


def _thread_limit():
    raw = os.environ.get("BSE_RBX_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise BseError(f"BSE_RBX_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise BseError(f"BSE_RBX_THREADS must be >= 1, got {n}")
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        limit = _thread_limit()
        if limit is not None:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=limit):
                return args.func(args)
        return args.func(args)
    except BseError as exc:
        print(f"ERROR {exc.code}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"ERROR IoError: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
