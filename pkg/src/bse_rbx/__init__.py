"""Reduced-basis solver for two-block excitation eigenproblems.

Workflow: factor the two-electron-integral matrix by truncated pivoted
Cholesky, assemble the excitation operator as diagonal-plus-low-rank
blocks, solve a rank-truncated auxiliary problem, then recover refined
excitation energies by projecting the exact operator onto the auxiliary
eigenbasis.  Dense reference solvers for every step live alongside the
factored ones so results can be cross-checked at small sizes.
"""

from .errors import (
    BseError,
    ComplexRitzError,
    ComplexSpectrumError,
    ConvergenceError,
    DimensionMismatchError,
    GapNotPositiveError,
    InvalidParamsError,
    LengthMismatchError,
    NotPdError,
    NotPsdError,
    ParseError,
    RankDeficientBasisError,
    RankExceededError,
    RankMismatchError,
    SingularCoreError,
    SizeGuardError,
    ValidationError,
)
from .linalg import (
    EigPairs,
    LowRankFactor,
    frobenius_tail_rank,
    nonsym_eig,
    pivoted_cholesky,
    solve_spd,
    spectral_norm_est,
    sym_eig,
    sym_sqrt,
    truncate_symmetric,
    truncated_svd,
)
from .model import (
    BseInput,
    SynthParams,
    parse_bundle,
    synth_generate,
    validate,
    write_bundle,
)
from .pipeline import (
    RunConfig,
    SolveResult,
    SystemParts,
    assemble_variant,
    build_system,
    run_factor,
    run_gen,
    run_solve,
    run_sweep,
)
from .report import HARTREE_TO_EV
from .screen import (
    DeltaEps,
    ScreenCore,
    WBlock,
    build_core,
    delta_eps,
    dense_z,
    regroup_w_bar,
    regroup_w_bar_dense,
    regroup_w_tilde,
    regroup_w_tilde_dense,
    w_block,
)
from .solve import (
    VARIANT_EXACT,
    VARIANT_KEEP_WBAR,
    VARIANT_TRUNCATE_ALL,
    VARIANTS,
    BseBlocks,
    Spectrum,
    SpectrumReport,
    assemble_blocks,
    block_difference_norms,
    error_report,
    reduced_galerkin,
    solve_aux,
    solve_dense,
    solve_sym_reduced,
    solve_tda,
    structured_matvec,
)
from .tei import (
    CholTei,
    PairFactor,
    cholesky_tei,
    dense_tei_transform,
    half_transforms,
    oo_pairs,
    ov_pairs,
    pair_factor,
    recompress,
    singular_profile,
    v_factor_ext,
    v_factor_ov,
    vo_pairs,
    vv_pairs,
)

__version__ = "0.1.0"
