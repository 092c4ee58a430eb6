"""Mirror-descent inverse reinforcement learning on tabular and Gaussian policies."""

from .bregman import (
    EPS_MIN,
    Regularizer,
    bregman_div,
    bregman_project,
    clamp_to_simplex,
    grad_omega,
    grad_omega_star,
    omega,
    reward_operator_psi,
)
from .config import ExperimentConfig, default_config, load_config, parse_config
from .diagnostics import DiagnosticReport, convergence_diagnostics
from .engine import (
    RegretTracker,
    RunRecord,
    exact_regularized_rl,
    mdairl_loss,
    md_step_tabular,
    psi_lambda_reward,
    regret,
    visitation_density,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    InadmissibleStepError,
    InsufficientDataError,
    MdirlError,
)
from .experiments import ResultSummary, run_experiment, schedule_sweep
from .gaussian import (
    GaussianPolicyParams,
    LdlCovariance,
    bregman_div_gaussian,
    md_update_gaussian,
    psi_gaussian,
    tsallis_entropy_gaussian,
)
from .schedules import StepSchedule, schedule_eta
from .verify import verify_suite

__version__ = "0.1.0"
