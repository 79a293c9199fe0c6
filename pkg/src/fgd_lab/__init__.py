"""Forward gradient descent for Gaussian random-design linear regression.

Library + CLI: keyed-stream simulation of SGD, weight-perturbed forward
gradient descent, and the zeroth-order method; exact evaluators of the
mean recursion, covariance recursion, and closed-form risk bound; and a
Monte Carlo harness that checks simulation against theory and reproduces
the d^2 log(d)/k rate study.
"""

from .errors import (
    ConfigError,
    DimensionMismatch,
    InvalidA,
    InvalidDimension,
    NonFiniteIterate,
    NotPositiveDefinite,
    SymmetryLossWarning,
)
from .experiment import (
    ExperimentConfig,
    ReferenceCurves,
    RunSummary,
    VerifyReport,
    figure2_config,
    load_config,
    read_trajectories_csv,
    reference_curves,
    run_experiment,
    run_single,
    save_config,
    summarize,
    verify_bound,
    verify_lemma1,
    verify_theorem1,
    verify_theorem2,
    write_trajectories_csv,
)
from .linalg import SpectralSummary, cholesky, quad_form, spectral_summary, trace_product
from .model import DataPoint, ModelSpec, RngStream, gradient, loss, sample_datapoint
from .optimizers import (
    Method,
    OptimizerState,
    Trajectory,
    default_checkpoints,
    dual_pass_eval,
    forward_gradient_step,
    run_trajectory,
    sgd_step,
    zeroth_order_step,
)
from .theory import (
    CovRecursionState,
    MeanState,
    Schedule,
    cov_recursion_step,
    exact_risk_curve,
    fourth_moment_lhs_mc,
    fourth_moment_rhs,
    k_star,
    mean_recursion_step,
    risk_bound,
    risk_bound_alt,
)

__version__ = "0.1.0"
