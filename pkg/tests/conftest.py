"""Shared builders for the test suite.

Everything is seeded; no fixture carries hidden state between tests.
"""

import numpy as np
import pytest

from bse_rbx import SynthParams, synth_generate
from bse_rbx.pipeline import build_system


def make_input(nb, no, seed, gap=1.0, decay_z=2.0, n_terms=None):
    if n_terms is None:
        n_terms = max(1, nb * nb // 2)
    params = SynthParams(n_basis=nb, n_occ=no, gap=gap, decay_z=decay_z,
                         n_terms=n_terms, seed=seed)
    return synth_generate(params)


def make_system(nb, no, seed, gap=1.0, decay_z=2.0, n_terms=None,
                chol_tol=1e-10):
    inp = make_input(nb, no, seed, gap=gap, decay_z=decay_z, n_terms=n_terms)
    return build_system(inp, chol_tol)


def random_spd(n, seed, cond=None):
    """Random SPD matrix; ``cond`` pins the extreme eigenvalues."""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    if cond is None:
        vals = rng.uniform(0.5, 2.0, size=n)
    else:
        vals = np.geomspace(1.0, 1.0 / cond, n)
    return (q * vals) @ q.T


def random_psd_lowrank(n, rank, seed, decay=1.0):
    rng = np.random.default_rng(seed)
    b = np.zeros((n, n))
    for k in range(rank):
        w = rng.standard_normal(n)
        b += np.exp(-decay * k) * np.outer(w, w)
    return (b + b.T) / 2.0


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
