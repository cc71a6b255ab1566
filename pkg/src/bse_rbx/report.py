"""Deterministic CSV and JSON emission for solver results.

All numbers are written with 17 significant digits and JSON objects
with sorted keys, so identical runs produce byte-identical files.
JSON reports are validated against the schemas shipped under
``bse_rbx/schemas`` before they are written.
"""

from __future__ import annotations

import json
from importlib import resources

import jsonschema
import numpy as np

HARTREE_TO_EV = 27.2114

__all__ = [
    "HARTREE_TO_EV",
    "fmt",
    "write_csv",
    "write_profile_csv",
    "write_spectrum_csv",
    "spectrum_rows",
    "load_schema",
    "validate_json",
    "write_json",
]


def fmt(x) -> str:
    """Format a float with 17 significant digits (round-trip exact)."""
    return format(float(x), ".17g")


def write_csv(path, header, rows) -> None:
    """Write rows of mixed ints/floats/strings with a header line."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for x in row:
            if isinstance(x, (int, np.integer)):
                cells.append(str(int(x)))
            elif isinstance(x, str):
                cells.append(x)
            else:
                cells.append(fmt(x))
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_profile_csv(path, sigmas) -> None:
    """Singular-value profile as (k, sigma) rows, k starting at 1."""
    write_csv(path, ["k", "sigma"],
              [(k + 1, s) for k, s in enumerate(np.asarray(sigmas, dtype=float))])


def spectrum_rows(report):
    """Rows of the spectrum table from a :class:`SpectrumReport`."""
    rows = []
    for i in range(report.n.size):
        rows.append((
            int(report.n[i]),
            report.omega[i],
            report.omega[i] * HARTREE_TO_EV,
            report.lam[i],
            report.gamma[i],
            report.mu[i],
            report.err_gamma[i],
            report.err_lambda[i],
            report.err_mu[i],
        ))
    return rows


SPECTRUM_HEADER = [
    "n", "omega", "omega_ev", "lambda", "gamma", "mu",
    "err_gamma", "err_lambda", "err_mu",
]


def write_spectrum_csv(path, report) -> None:
    write_csv(path, SPECTRUM_HEADER, spectrum_rows(report))


def load_schema(name: str) -> dict:
    text = resources.files("bse_rbx.schemas").joinpath(name).read_text("utf-8")
    return json.loads(text)


def validate_json(obj, schema_name: str) -> None:
    jsonschema.validate(obj, load_schema(schema_name))


def write_json(path, obj, schema_name=None) -> None:
    """Validate (when a schema is named) and write deterministic JSON."""
    if schema_name is not None:
        validate_json(obj, schema_name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
