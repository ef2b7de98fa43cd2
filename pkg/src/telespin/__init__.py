"""telespin: dissipative two-state dynamics driven by random telegraph noise.

Library layout:

* bath       - structured spectral density, correlation integrals Q1/Q2,
               kernel-envelope decay fits
* noise      - telegraph trajectories, Kubo phases, closed-form propagators
* dynamics   - per-realization and noise-averaged memory-kernel / time-local
               solvers, Monte-Carlo ensemble averaging
* nonmarkov  - trace distance, BLP measure, analytic limits
* cli        - config parsing, run/sweep orchestration, CSV/PGM/PNG output
"""

from .bath import (
    BathParams,
    CorrelationTable,
    DecayFit,
    bath_operator_average,
    compute_correlations,
    decay_time,
    fit_decay_time,
    spectral_density,
)
from .dynamics import (
    AveragedState,
    BlochState,
    Evolution,
    SolverConfig,
    SystemParams,
    bloch_to_density,
    coefficients_Gamma,
    default_step,
    ensemble_average,
    kernels_K,
    solve_averaged,
    solve_nz_averaged,
    solve_per_realization,
    solve_tcl_averaged,
)
from .errors import (
    ConfigError,
    InsufficientDataError,
    NumericalError,
    QuadratureError,
    RegimeError,
    StabilityError,
)
from .noise import (
    NoiseParams,
    TelegraphTrajectory,
    kubo_phase,
    propagators,
    sample_trajectory,
    value_at,
)
from .nonmarkov import (
    BlpResult,
    DistinguishabilityTrace,
    analytic_blp,
    analytic_blp_published,
    analytic_distinguishability,
    blp_measure,
    numeric_blp_of_s0,
    optimal_initial_pair,
    reduced_limit_solution,
    trace_distance,
)

__version__ = "0.1.0"
