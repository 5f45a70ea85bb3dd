"""Realized Laplace transforms for pure-jump semimartingales.

Nonparametric estimation of the Laplace transform of the stochastic scale
(time-change) from high-frequency increments, activity-index estimation,
long-span HAC inference, minimum-distance fitting of a tempered stable
time-change law, and a Monte Carlo harness for the CIR time-changed model.
"""

from .activity import ActivityEstimate, estimate_activity, power_variation
from .errors import EstimationError, InputError, ParameterError
from .ingest import IngestSpec, ingest, write_path_csv
from .levy_sim import (
    CIRSpec,
    PathGrid,
    RngStream,
    StableSpec,
    TemperedStableSpec,
    gamma_laplace,
    sample_stable_increments,
    sample_tempered_stable_increments,
    simulate_cir,
    simulate_model,
    stable_level,
)
from .mc import MCConfig, MCSummary, run_mc, run_table, table_configs
from .md_fit import (
    FitResult,
    KernelSpec,
    QuadratureSpec,
    TemperedStableParams,
    fit_path,
    fit_standard_errors,
    fit_theta,
    pilot_u_max,
    solve_u_max,
    ts_laplace,
)
from .rlt_core import (
    BlockStats,
    HACResult,
    RLTCurve,
    activity_correction_se,
    block_stats,
    empirical_laplace,
    f_beta,
    f_beta_tilde,
    fixed_span_variance,
    g_beta,
    g_hat,
    hac_covariance,
    rlt,
    rlt_differenced,
)

__version__ = "0.1.0"
