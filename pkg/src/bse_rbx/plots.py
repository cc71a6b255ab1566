"""Figure rendering for the report path.

Figures are saved next to the delimited output of each command.  The
Agg backend is forced and PNG metadata is pinned so repeated runs of
the same configuration produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_singular_profiles",
    "save_spectrum_comparison",
    "save_sweep_errors",
    "save_m0_sweep",
]

_SAVE_KW = {"dpi": 150, "metadata": {"Software": "bse-rbx"}}


def save_singular_profiles(profiles: dict, path) -> None:
    """Semilog decay plot of one or more singular-value profiles."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, sigmas in profiles.items():
        sigmas = np.asarray(sigmas, dtype=float)
        if sigmas.size == 0:
            continue
        ax.semilogy(np.arange(1, sigmas.size + 1), sigmas,
                    marker=".", linewidth=1.0, label=label)
    ax.set_xlabel("index k")
    ax.set_ylabel("singular value")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_spectrum_comparison(report, path) -> None:
    """Exact versus approximate energies and their absolute errors."""
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    n = report.n
    ax0.plot(n, report.omega, "k-", marker="o", label="omega (exact)")
    ax0.plot(n, report.lam, linestyle="none", marker="x", label="lambda (aux)")
    ax0.plot(n, report.gamma, linestyle="none", marker="+", label="gamma (reduced)")
    ax0.plot(n, report.mu, linestyle="none", marker="1", label="mu (TDA)")
    ax0.set_xlabel("level n")
    ax0.set_ylabel("energy [hartree]")
    ax0.legend()
    floor = 1e-17
    ax1.semilogy(n, np.maximum(report.err_lambda, floor), marker="x",
                 label="|lambda - omega|")
    ax1.semilogy(n, np.maximum(report.err_gamma, floor), marker="+",
                 label="|gamma - omega|")
    ax1.semilogy(n, np.maximum(report.err_mu, floor), marker="1",
                 label="|mu - omega|")
    ax1.set_xlabel("level n")
    ax1.set_ylabel("absolute error [hartree]")
    ax1.grid(True, which="both", alpha=0.3)
    ax1.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_sweep_errors(rows, path) -> None:
    """Error of the lowest level against the operator perturbation.

    ``rows`` are dicts with at least ``norm_f1_f0_fro``, ``err_gamma1``
    and ``err_lambda1``; one curve pair per variant.
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    floor = 1e-17
    variants = sorted({r["variant"] for r in rows})
    for variant in variants:
        sel = [r for r in rows if r["variant"] == variant]
        sel.sort(key=lambda r: r["norm_f1_f0_fro"])
        x = np.array([r["norm_f1_f0_fro"] for r in sel])
        mask = x > 0
        if not mask.any():
            continue
        g = np.maximum(np.array([r["err_gamma1"] for r in sel]), floor)
        l = np.maximum(np.array([r["err_lambda1"] for r in sel]), floor)
        ax.loglog(x[mask], g[mask], marker="o",
                  label=f"|gamma1 - omega1| ({variant})")
        ax.loglog(x[mask], l[mask], marker="x", linestyle="--",
                  label=f"|lambda1 - omega1| ({variant})")
    ax.set_xlabel("||F1 - F0||_F")
    ax.set_ylabel("absolute error [hartree]")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_m0_sweep(rows, path) -> None:
    """Error of the lowest level against the basis size m0."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    floor = 1e-17
    variants = sorted({r["variant"] for r in rows})
    for variant in variants:
        sel = sorted((r for r in rows if r["variant"] == variant),
                     key=lambda r: r["m0"])
        m0 = np.array([r["m0"] for r in sel])
        g = np.maximum(np.array([r["err_gamma1"] for r in sel]), floor)
        l = np.maximum(np.array([r["err_lambda1"] for r in sel]), floor)
        ax.semilogy(m0, g, marker="o", label=f"|gamma1 - omega1| ({variant})")
        ax.semilogy(m0, l, marker="x", linestyle="--",
                    label=f"|lambda1 - omega1| ({variant})")
    ax.set_xlabel("basis size m0")
    ax.set_ylabel("absolute error [hartree]")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
