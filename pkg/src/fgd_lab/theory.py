"""Exact, deterministic evaluators for the forward-gradient dynamics.

Covers the inverse-time learning-rate schedule, the mean recursion of the
iterate error, the closed second-moment (covariance) recursion whose trace
is the risk, the two-term closed-form risk bound with its burn-in constant,
and the Gaussian fourth-moment identity used as a Monte Carlo test oracle.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    ConfigError,
    DimensionMismatch,
    InvalidA,
    InvalidDimension,
    SymmetryLossWarning,
)
from .linalg import check_symmetric, check_vector, cholesky, spectral_summary
from .model import RngStream

# Dense covariance recursions cost O(d^3) per step; million-step runs above
# this size are a configuration mistake, not a computation.
DENSE_RECURSION_MAX_D = 64


@dataclass(frozen=True)
class Schedule:
    """Inverse-time learning rate for the forward-gradient iteration.

    alpha_k = a * lambda_min / (k * lambda_min^2 + a * spectral_norm^2 * (d+2)^2)

    Any a > 0 gives a valid, strictly decreasing schedule bounded by
    lambda_min / (spectral_norm^2 (d+2)^2); the closed-form risk bound
    additionally requires a > 2 (enforced by `risk_bound`, not here).
    """

    a: float
    lambda_min: float
    spectral_norm: float
    d: int

    def __post_init__(self):
        if not self.a > 0:
            raise InvalidA(f"decay constant a must be positive, got {self.a}")
        if not (0 < self.lambda_min <= self.spectral_norm):
            raise ConfigError(
                f"need 0 < lambda_min <= spectral_norm, got "
                f"({self.lambda_min}, {self.spectral_norm})"
            )
        if self.d < 1:
            raise InvalidDimension(f"dimension must be at least 1, got {self.d}")

    @classmethod
    def from_sigma(cls, sigma, a: float) -> "Schedule":
        sigma = check_symmetric(sigma)
        summary = spectral_summary(sigma)
        return cls(
            a=a,
            lambda_min=summary.lambda_min,
            spectral_norm=summary.lambda_max,
            d=sigma.shape[0],
        )

    @property
    def condition_number(self) -> float:
        return self.spectral_norm / self.lambda_min

    @property
    def burn_in_constant(self) -> float:
        """c_d = a * kappa^2 * (d+2)^2; alpha_k = a / (lambda_min (k + c_d))."""
        return self.a * self.condition_number**2 * (self.d + 2) ** 2

    @property
    def alpha_cap(self) -> float:
        """Upper bound lambda_min / (spectral_norm^2 (d+2)^2) on every alpha_k."""
        return self.lambda_min / (self.spectral_norm**2 * (self.d + 2) ** 2)

    def alpha(self, k):
        """Learning rate at step k >= 1; accepts scalars or integer arrays."""
        k_arr = np.asarray(k, dtype=np.float64)
        if np.any(k_arr < 1):
            raise ValueError("the schedule is defined for steps k >= 1")
        denom = k_arr * self.lambda_min**2 + self.a * self.spectral_norm**2 * (self.d + 2) ** 2
        out = self.a * self.lambda_min / denom
        return float(out) if np.isscalar(k) else out


@dataclass(frozen=True)
class MeanState:
    """E[theta_k] - theta_star along the mean recursion."""

    mean_error: np.ndarray
    k: int


def mean_recursion_step(state: MeanState, sigma, alpha: float) -> MeanState:
    """One step of the mean dynamic: error' = (I - alpha * sigma) error."""
    sigma = check_symmetric(sigma)
    error = check_vector(state.mean_error, sigma.shape[0])
    return MeanState(mean_error=error - alpha * (sigma @ error), k=state.k + 1)


@dataclass(frozen=True)
class CovRecursionState:
    """Second-moment matrix A_k = E[(theta_k - theta*)(theta_k - theta*)^T]."""

    a_matrix: np.ndarray
    k: int

    @property
    def risk(self) -> float:
        """E||theta_k - theta*||^2 = tr(A_k)."""
        return float(np.trace(self.a_matrix))


def cov_recursion_step(state: CovRecursionState, sigma, alpha: float) -> CovRecursionState:
    """One exact step of the second-moment recursion.

    A' = (I - a S) A (I - a S) + 3 a^2 S A S + 2 a^2 tr(S A) S + 2 a^2 S
         + 2 a^2 tr(S A S) I + a^2 tr(S A) tr(S) I + a^2 tr(S) I

    writing a for alpha and S for sigma. The scalar expected quadratic form
    of the error under sigma equals tr(sigma A), which closes the recursion
    in A. The output is symmetrized each step to stop floating-point drift;
    drift beyond 1e-9 relative raises a SymmetryLossWarning first.
    """
    sigma = check_symmetric(sigma)
    d = sigma.shape[0]
    a_mat = np.asarray(state.a_matrix, dtype=np.float64)
    if a_mat.shape != (d, d):
        raise DimensionMismatch(
            f"state matrix shape {a_mat.shape} does not match sigma shape {sigma.shape}"
        )
    a2 = alpha * alpha
    sa = sigma @ a_mat
    sas = sa @ sigma
    tr_sa = float(np.trace(sa))
    tr_sas = float(np.trace(sas))
    tr_s = float(np.trace(sigma))

    contraction = np.eye(d) - alpha * sigma
    out = contraction @ a_mat @ contraction
    out += 3.0 * a2 * sas
    out += (2.0 * a2 * tr_sa + 2.0 * a2) * sigma
    out += (2.0 * a2 * tr_sas + a2 * tr_sa * tr_s + a2 * tr_s) * np.eye(d)

    asymmetry = float(np.max(np.abs(out - out.T)))
    scale = float(np.max(np.abs(out)))
    if scale > 0 and asymmetry > 1e-9 * scale:
        warnings.warn(
            f"covariance recursion output asymmetry {asymmetry:.3e} "
            f"exceeds 1e-9 relative at step {state.k + 1}; symmetrizing",
            SymmetryLossWarning,
        )
    out = 0.5 * (out + out.T)
    return CovRecursionState(a_matrix=out, k=state.k + 1)


def _is_diagonal(m: np.ndarray) -> bool:
    return np.count_nonzero(m - np.diag(np.diag(m))) == 0


def exact_risk_curve(sigma, schedule: Schedule, a0, n_steps: int, checkpoints) -> list:
    """Risk tr(A_k) at each checkpoint along the exact recursion.

    Uses an O(d)-per-step fast path when sigma and A_0 are both diagonal
    (the recursion keeps A diagonal in that case). Dense inputs are capped
    at d = 64.
    """
    sigma = check_symmetric(sigma)
    a0 = check_symmetric(a0)
    d = sigma.shape[0]
    if a0.shape != sigma.shape:
        raise DimensionMismatch("A_0 and sigma must have equal shapes")
    checkpoints = [int(k) for k in checkpoints]
    if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ValueError("checkpoints must be strictly ascending")
    if checkpoints and (checkpoints[0] < 0 or checkpoints[-1] > n_steps):
        raise ValueError("checkpoints must lie in [0, n_steps]")

    if _is_diagonal(sigma) and _is_diagonal(a0):
        alphas = np.asarray(schedule.alpha(np.arange(1, n_steps + 1)), dtype=np.float64)
        traces = _kernels.diag_cov_traces(
            np.ascontiguousarray(np.diag(sigma)),
            np.ascontiguousarray(np.diag(a0)),
            alphas,
        )
        return [(k, float(traces[k])) for k in checkpoints]

    if d > DENSE_RECURSION_MAX_D:
        raise ConfigError(
            f"dense covariance recursion capped at d={DENSE_RECURSION_MAX_D}, got d={d}; "
            "use a diagonal covariance for larger dimensions"
        )
    state = CovRecursionState(a_matrix=a0, k=0)
    out = []
    cp_i = 0
    if checkpoints and checkpoints[0] == 0:
        out.append((0, state.risk))
        cp_i = 1
    for k in range(1, n_steps + 1):
        state = cov_recursion_step(state, sigma, schedule.alpha(k))
        if cp_i < len(checkpoints) and checkpoints[cp_i] == k:
            out.append((k, state.risk))
            cp_i += 1
    return out


def risk_bound(schedule: Schedule, k, initial_risk: float):
    """Two-term closed-form bound on the risk at step k.

    first term:  ((1 + c_d) / (k + c_d))^a * initial_risk
    second term: 2 e a kappa (d+2)^2 / (lambda_min (k + c_d))

    Requires a > 2. Accepts scalar or array k >= 0.
    """
    if not schedule.a > 2:
        raise InvalidA(f"the risk bound requires a > 2, got a={schedule.a}")
    c_d = schedule.burn_in_constant
    k_arr = np.asarray(k, dtype=np.float64)
    if np.any(k_arr < 0):
        raise ValueError("k must be nonnegative")
    first = ((1.0 + c_d) / (k_arr + c_d)) ** schedule.a * initial_risk
    second = (
        2.0
        * math.e
        * schedule.a
        * schedule.condition_number
        * (schedule.d + 2) ** 2
        / (schedule.lambda_min * (k_arr + c_d))
    )
    out = first + second
    return float(out) if np.isscalar(k) else out


def risk_bound_alt(schedule: Schedule, k, initial_risk: float):
    """Equivalent form of the risk bound written through alpha_k itself.

    (1 - a^-1 lambda_min (k-1) alpha_k)^a * initial_risk
        + 2 e kappa (d+2)^2 alpha_k

    Defined for k >= 1; exposed for cross-checking against `risk_bound`.
    """
    if not schedule.a > 2:
        raise InvalidA(f"the risk bound requires a > 2, got a={schedule.a}")
    k_arr = np.asarray(k, dtype=np.float64)
    if np.any(k_arr < 1):
        raise ValueError("the alternative form is defined for k >= 1")
    alpha_k = schedule.a * schedule.lambda_min / (
        k_arr * schedule.lambda_min**2
        + schedule.a * schedule.spectral_norm**2 * (schedule.d + 2) ** 2
    )
    first = (
        1.0 - schedule.lambda_min * (k_arr - 1.0) * alpha_k / schedule.a
    ) ** schedule.a * initial_risk
    second = 2.0 * math.e * schedule.condition_number * (schedule.d + 2) ** 2 * alpha_k
    out = first + second
    return float(out) if np.isscalar(k) else out


def k_star(d: int) -> float:
    """Burn-in threshold e^2 d^2 log(d) past which the d^2 log(d)/k rate holds.

    Requires d >= 8 so that the matching decay constant a = log(d) exceeds 2.
    """
    if d < 8:
        raise InvalidDimension(f"k_star requires d >= 8, got d={d}")
    return math.e**2 * d * d * math.log(d)


def fourth_moment_rhs(gamma, u_outer, u_quad: float) -> np.ndarray:
    """Analytic value of E[(u.z)^2 z z^T] for z ~ N(0, gamma), deterministic u.

    Equals 2 gamma (u u^T) gamma + (u^T gamma u) gamma; callers pass
    u_outer = u u^T and u_quad = u^T gamma u.
    """
    gamma = check_symmetric(gamma)
    u_outer = check_symmetric(u_outer)
    if gamma.shape != u_outer.shape:
        raise DimensionMismatch("gamma and u_outer must have equal shapes")
    return 2.0 * gamma @ u_outer @ gamma + u_quad * gamma


def fourth_moment_lhs_mc(gamma, u, n: int, rng: RngStream, with_stderr: bool = False):
    """Monte Carlo average of (u.z)^2 z z^T over n draws z ~ N(0, gamma).

    With with_stderr=True also returns the entrywise standard error of the
    Monte Carlo mean.
    """
    gamma = check_symmetric(gamma)
    d = gamma.shape[0]
    u = check_vector(u, d)
    chol = cholesky(gamma)
    z = rng.normal_block(n, d) @ chol.T
    weight = (z @ u) ** 2
    mean = (z * weight[:, None]).T @ z / n
    mean = 0.5 * (mean + mean.T)
    if not with_stderr:
        return mean
    second = (z**2 * weight[:, None] ** 2).T @ (z**2) / n
    second = 0.5 * (second + second.T)
    stderr = np.sqrt(np.maximum(second - mean**2, 0.0) / n)
    return mean, stderr
