"""Diagnostics and stress tests for convex penalized least squares.

The package computes two complementary error diagnostics for penalized
regression, the noise barrier (how well the penalty represses pure noise)
and the large-signal bias (the unavoidable error on strong signals), along
with the design constants that calibrate them: compatibility constants,
cone-restricted and sparse eigenvalues, critical penalty levels and their
phase-transition brackets, signed packing constructions, and a Monte-Carlo
experiment harness with a command-line front end.
"""

from .model import (
    DesignMatrix, RegressionInstance, CorrelationScores, SignVector, DesignError,
    gen_design, sample_instance, correlation_scores, sign_vector,
    save_design_csv, load_design_csv, save_design_binary, load_design_binary,
    load_design,
)
from .solvers import (
    PenaltySpec, SolveResult, SolverNonConvergence,
    lasso_solve, kkt_certificate, prediction_error,
)
from .tuning import (
    TuningLevel, RemainderTerm, SparsityBracket, BelowCriticalRange,
    tuning_level, remainder, sparsity_bracket, f_zero, f_sqrt_loglog, eta,
)
from .diagnostics import (
    NoiseBarrierValue, LsbBracket, CompatibilityResult, ThetaBracket,
    SparseEigReport, DesignConstants, NotMinimalH,
    noise_barrier, nb_restricted_supremum, lsb_bracket, compatibility_constant,
    cone_eigenvalue_theta, sparse_eigenvalues, rip_delta, certify_design,
)
from .lower_bounds import (
    SoftThresholdStats, SignedPacking, SudakovBounds, BetaMinReport,
    PackingBudgetError,
    soft_threshold, soft_threshold_stats, st_moment_exact, q_series_bounds,
    omega1_bound, omega1_mc_estimate, vg_signed_packing, sudakov_lower,
    betamin_experiment, gaussian_upper_tail,
)
from .trace_regression import (
    TraceInstance, TraceSolveResult, RankRipReport, TraceSolverNonConvergence,
    sample_trace_instance, svd_soft_threshold, nuclear_norm, trace_lasso_solve,
    rank_rip_probe, nuclear_lower_experiment,
)
from .experiments import (
    SweepConfig, ExperimentRecord,
    run_sweep, records_to_csv, compatibility_necessity_experiment,
    data_driven_check, cv_lambda, build_design, draw_replicate,
)
from .rng import keyed_rng, subseed

__version__ = "0.1.0"
