"""Monte Carlo harness: replicated runs, verification suites, persistence.

Reproduces the rate study (ten forward-gradient runs against one SGD run
from a shared initialization) and checks simulation against the exact
mean recursion, covariance recursion, and closed-form risk bound using
z-score or deterministic domination reports.
"""

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError, NonFiniteIterate
from .linalg import cholesky, check_vector
from .model import ModelSpec, RngStream
from .optimizers import Method, Trajectory, default_checkpoints, run_trajectory
from .theory import (
    MeanState,
    CovRecursionState,
    Schedule,
    cov_recursion_step,
    fourth_moment_lhs_mc,
    fourth_moment_rhs,
    k_star,
    mean_recursion_step,
    risk_bound,
)

# Stream-id layout under one base seed: the shared initializer uses stream 0,
# run j of method m uses stream index(m) * 10^6 + j + 1, and the replayable
# shared data sequence lives far away at 10^9.
METHOD_STREAM_BLOCK = 10**6
SHARED_INIT_STREAM_ID = 0
SHARED_DATA_STREAM_ID = 10**9

_METHOD_INDEX = {Method.SGD: 0, Method.FORWARD_GRADIENT: 1, Method.ZEROTH_ORDER: 2}

PASS_THRESHOLD_Z = 5.0


@dataclass
class ExperimentConfig:
    """Everything needed to replay a replicated simulation exactly."""

    model: ModelSpec
    methods: list  # of (Method, run_count)
    n_steps: int
    a_param: object = "log_d"  # float, or "log_d" for a = log(d) (needs d >= 8)
    base_seed: int = 0
    checkpoint_count: int = 200
    shared_init: bool = True
    init: object = "standard_normal"  # or an explicit length-d vector
    shared_data: bool = False
    alpha_scale: float = 1.0

    def validate(self):
        if not self.methods:
            raise ConfigError("at least one (method, run_count) entry is required")
        for entry in self.methods:
            method, count = entry
            if not isinstance(method, Method):
                raise ConfigError(f"unknown method {method!r}")
            if count < 1:
                raise ConfigError(f"run_count must be at least 1, got {count}")
        if self.n_steps < 1:
            raise ConfigError("n_steps must be at least 1")
        if self.checkpoint_count < 1:
            raise ConfigError("checkpoint_count must be at least 1")
        if self.a_param == "log_d":
            if self.model.d < 8:
                raise ConfigError(
                    f"a_param='log_d' requires d >= 8 so that a > 2, got d={self.model.d}"
                )
        elif not (isinstance(self.a_param, (int, float)) and self.a_param > 0):
            raise ConfigError(f"a_param must be 'log_d' or a positive number, got {self.a_param!r}")
        if not (isinstance(self.init, str) and self.init == "standard_normal"):
            check_vector(self.init, self.model.d)
        if not self.alpha_scale > 0:
            raise ConfigError("alpha_scale must be positive")

    def resolved_a(self) -> float:
        return math.log(self.model.d) if self.a_param == "log_d" else float(self.a_param)

    def schedule(self) -> Schedule:
        return Schedule.from_sigma(self.model.sigma, self.resolved_a())


def figure2_config(d: int, seed: int) -> ExperimentConfig:
    """The rate-study preset: identity covariance, ten forward-gradient runs
    against one SGD run over a million steps, a = log(d), one shared
    N(0, I_d) initialization, and a shared replayable data stream."""
    return ExperimentConfig(
        model=ModelSpec.identity(d),
        methods=[(Method.FORWARD_GRADIENT, 10), (Method.SGD, 1)],
        n_steps=10**6,
        a_param="log_d",
        base_seed=seed,
        checkpoint_count=200,
        shared_init=True,
        init="standard_normal",
        shared_data=True,
    )


def _initial_theta(cfg: ExperimentConfig, rng: RngStream) -> np.ndarray:
    if isinstance(cfg.init, str):
        return rng.normals(cfg.model.d)
    return check_vector(cfg.init, cfg.model.d).copy()


def _run_one(cfg, schedule, checkpoints, shared_theta0, method, run_id) -> Trajectory:
    rng = RngStream(cfg.base_seed, _METHOD_INDEX[method] * METHOD_STREAM_BLOCK + run_id + 1)
    if cfg.shared_init:
        theta0 = shared_theta0
    else:
        theta0 = _initial_theta(cfg, rng)
    data_rng = RngStream(cfg.base_seed, SHARED_DATA_STREAM_ID) if cfg.shared_data else None
    try:
        return run_trajectory(
            cfg.model,
            method,
            schedule,
            theta0,
            cfg.n_steps,
            checkpoints,
            rng,
            data_rng=data_rng,
            alpha_scale=cfg.alpha_scale,
            run_id=run_id,
        )
    except NonFiniteIterate as exc:
        raise NonFiniteIterate(
            exc.step, f"{method.value} run {run_id} diverged at step {exc.step}"
        ) from None


def run_experiment(cfg: ExperimentConfig, max_workers: int | None = None) -> list:
    """Run every configured trajectory; returns them sorted by (method, run_id).

    Each run owns its perturbation stream, so results are independent of
    worker scheduling and any single run can be reproduced in isolation.
    """
    cfg.validate()
    schedule = cfg.schedule()
    checkpoints = default_checkpoints(cfg.n_steps, cfg.checkpoint_count)
    shared_theta0 = (
        _initial_theta(cfg, RngStream(cfg.base_seed, SHARED_INIT_STREAM_ID))
        if cfg.shared_init
        else None
    )
    jobs = [(method, j) for method, count in cfg.methods for j in range(count)]
    if max_workers is None:
        max_workers = max(1, min(8, os.cpu_count() or 1, len(jobs)))
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [
            pool.submit(_run_one, cfg, schedule, checkpoints, shared_theta0, method, j)
            for method, j in jobs
        ]
        trajectories = [f.result() for f in futures]
    return sorted(trajectories, key=lambda t: (t.method, t.run_id))


def run_single(cfg: ExperimentConfig, method: Method, run_id: int) -> Trajectory:
    """Reproduce one run of an experiment without running the others."""
    cfg.validate()
    schedule = cfg.schedule()
    checkpoints = default_checkpoints(cfg.n_steps, cfg.checkpoint_count)
    shared_theta0 = (
        _initial_theta(cfg, RngStream(cfg.base_seed, SHARED_INIT_STREAM_ID))
        if cfg.shared_init
        else None
    )
    return _run_one(cfg, schedule, checkpoints, shared_theta0, method, run_id)


@dataclass(frozen=True)
class ReferenceCurves:
    """The three rate lines d^2 log(d)/k, d^2/k, d/k on a step grid."""

    ks: np.ndarray
    upper: np.ndarray
    middle: np.ndarray
    lower: np.ndarray


def reference_curves(d: int, ks) -> ReferenceCurves:
    ks = np.asarray(ks, dtype=np.float64)
    if np.any(ks <= 0):
        raise ValueError("reference curves are defined for k > 0")
    return ReferenceCurves(
        ks=ks,
        upper=d * d * math.log(d) / ks,
        middle=d * d / ks,
        lower=d / ks,
    )


@dataclass
class RunSummary:
    """Final-window statistics for one method of an experiment."""

    method: str
    run_count: int
    final_decade_geomean_mse: float
    final_decade_loglog_slope: float
    k_star_marker: float | None
    ratio_vs_reference: dict = field(default_factory=dict)


def final_decade_window(records, n_steps: int):
    """(k, mse) pairs with n_steps/10 < k <= n_steps and mse > 0."""
    return [(k, m) for k, m in records if n_steps / 10 < k <= n_steps and m > 0]


def summarize_method(trajectories, method: str, n_steps: int, d: int) -> RunSummary:
    """Pooled final-decade statistics for one method across its runs."""
    runs = [t for t in trajectories if t.method == method]
    pooled = []
    for t in runs:
        pooled.extend(final_decade_window(t.records, n_steps))
    if not pooled:
        raise ValueError(f"no usable final-decade records for method {method!r}")
    ks = np.array([k for k, _ in pooled], dtype=np.float64)
    mses = np.array([m for _, m in pooled], dtype=np.float64)
    log_k = np.log10(ks)
    log_m = np.log10(mses)
    slope = float(np.polyfit(log_k, log_m, 1)[0]) if np.unique(ks).size > 1 else float("nan")
    refs = reference_curves(d, ks)
    ratios = {
        "d2_log_d_over_k": float(np.exp(np.mean(np.log(mses / refs.upper)))),
        "d2_over_k": float(np.exp(np.mean(np.log(mses / refs.middle)))),
        "d_over_k": float(np.exp(np.mean(np.log(mses / refs.lower)))),
    }
    return RunSummary(
        method=method,
        run_count=len(runs),
        final_decade_geomean_mse=float(np.exp(np.mean(np.log(mses)))),
        final_decade_loglog_slope=slope,
        k_star_marker=k_star(d) if d >= 8 else None,
        ratio_vs_reference=ratios,
    )


def summarize(trajectories, cfg: ExperimentConfig) -> list:
    methods = []
    for t in trajectories:
        if t.method not in methods:
            methods.append(t.method)
    return [summarize_method(trajectories, m, cfg.n_steps, cfg.model.d) for m in methods]


# ---------------------------------------------------------------------------
# Verification suites
# ---------------------------------------------------------------------------


@dataclass
class VerifyReport:
    """Outcome of one verification suite, with per-case rows for the table."""

    name: str
    passed: bool
    metric: str
    worst: float
    threshold: float
    rows: list


def _row_dots(x_rows, thetas):
    return np.einsum("ij,ij->i", x_rows, thetas)


def verify_theorem1(
    d: int = 3,
    sigma=None,
    n_reps: int = 10_000,
    k: int = 50,
    seed: int = 0,
    alpha: float = 0.01,
    threshold: float = PASS_THRESHOLD_Z,
    tamper: bool = False,
) -> VerifyReport:
    """Empirical mean of the forward-gradient iterate against the exact mean
    recursion, as per-coordinate z-scores over n_reps replications.

    With tamper=True the closed form is evaluated at a doubled learning
    rate; the suite must then fail (negative control).
    """
    sigma = np.eye(d) if sigma is None else np.asarray(sigma, dtype=np.float64)
    setup = RngStream(seed, 0)
    theta_star = setup.normals(d)
    theta0 = setup.normals(d)
    chol = cholesky(sigma)
    mc = RngStream(seed, 1)

    thetas = np.tile(theta0, (n_reps, 1))
    for _ in range(k):
        z = mc.normal_block(n_reps, d)
        eps = mc.normals(n_reps)
        xis = mc.normal_block(n_reps, d)
        x_rows = z @ chol.T
        y = x_rows @ theta_star + eps
        residuals = y - _row_dots(x_rows, thetas)
        x_dot_xi = _row_dots(x_rows, xis)
        thetas += alpha * (residuals * x_dot_xi)[:, None] * xis

    emp_mean = thetas.mean(axis=0)
    stderr = thetas.std(axis=0, ddof=1) / math.sqrt(n_reps)

    alpha_theory = 2.0 * alpha if tamper else alpha
    state = MeanState(mean_error=theta0 - theta_star, k=0)
    for _ in range(k):
        state = mean_recursion_step(state, sigma, alpha_theory)
    closed_mean = theta_star + state.mean_error

    z_scores = (emp_mean - closed_mean) / stderr
    rows = [
        {"coordinate": i, "empirical": float(emp_mean[i]), "exact": float(closed_mean[i]),
         "z": float(z_scores[i])}
        for i in range(d)
    ]
    worst = float(np.max(np.abs(z_scores)))
    return VerifyReport(
        name="thm1",
        passed=worst <= threshold,
        metric="max |z|",
        worst=worst,
        threshold=threshold,
        rows=rows,
    )


def verify_theorem2(
    d: int = 2,
    sigma=None,
    n_reps: int = 2000,
    k_max: int = 200,
    seed: int = 0,
    a: float = 3.0,
    checkpoints=(1, 2, 5, 10, 20, 50, 100, 150, 200),
    theta0=None,
    threshold: float = PASS_THRESHOLD_Z,
    tamper: bool = False,
) -> VerifyReport:
    """Empirical second-moment matrices of the forward-gradient error against
    the exact covariance recursion, as entrywise z-scores at checkpoints.

    theta0 may be an explicit vector, the string "truth" (start at
    theta_star, so A_0 = 0), or None for the default deterministic start
    at distance 3 from theta_star. With tamper=True the exact recursion
    drops its 3 alpha^2 S A S term; the suite must then fail from
    mid-size k onward (negative control).
    """
    sigma = np.eye(d) if sigma is None else np.asarray(sigma, dtype=np.float64)
    schedule = Schedule.from_sigma(sigma, a)
    checkpoints = sorted(int(c) for c in checkpoints if c <= k_max)
    setup = RngStream(seed, 0)
    theta_star = setup.normals(d)
    if theta0 is None:
        theta0 = theta_star + 3.0 * np.ones(d) / math.sqrt(d)
    elif isinstance(theta0, str) and theta0 == "truth":
        theta0 = theta_star.copy()
    else:
        theta0 = check_vector(theta0, d).copy()
    chol = cholesky(sigma)
    mc = RngStream(seed, 1)

    thetas = np.tile(theta0, (n_reps, 1))
    e0 = theta0 - theta_star
    state = CovRecursionState(a_matrix=np.outer(e0, e0), k=0)

    rows = []
    worst = 0.0
    for step in range(1, k_max + 1):
        alpha_k = schedule.alpha(step)
        z = mc.normal_block(n_reps, d)
        eps = mc.normals(n_reps)
        xis = mc.normal_block(n_reps, d)
        x_rows = z @ chol.T
        y = x_rows @ theta_star + eps
        residuals = y - _row_dots(x_rows, thetas)
        x_dot_xi = _row_dots(x_rows, xis)
        thetas += alpha_k * (residuals * x_dot_xi)[:, None] * xis

        previous = state.a_matrix
        state = cov_recursion_step(state, sigma, alpha_k)
        if tamper:
            dropped = 3.0 * alpha_k**2 * (sigma @ previous @ sigma)
            state = CovRecursionState(state.a_matrix - dropped, state.k)

        if step in checkpoints:
            errors = thetas - theta_star
            products = errors[:, :, None] * errors[:, None, :]
            emp = products.mean(axis=0)
            stderr = products.std(axis=0, ddof=1) / math.sqrt(n_reps)
            z_scores = (emp - state.a_matrix) / stderr
            step_worst = float(np.max(np.abs(z_scores)))
            worst = max(worst, step_worst)
            rows.append({"k": step, "max_abs_z": step_worst})

    return VerifyReport(
        name="thm2",
        passed=worst <= threshold,
        metric="max |z|",
        worst=worst,
        threshold=threshold,
        rows=rows,
    )


def verify_bound(
    d_list=(8, 10, 16),
    sigma_kind: str = "identity",
    n_steps: int = 10**5,
    init_scales=(0.0, 1.0, 10.0),
    tamper: bool = False,
) -> VerifyReport:
    """Deterministic domination check: the exact risk never exceeds the
    closed-form bound, for a = log(d) and scaled-identity starts.

    With tamper=True the initial-risk coefficient of the bound is halved;
    the bound is tight against the transient early on, so the suite must
    then fail at small k (negative control).
    """
    if sigma_kind != "identity":
        raise ConfigError(f"verify_bound supports sigma_kind='identity', got {sigma_kind!r}")
    rows = []
    worst = 0.0
    passed = True
    steps = np.arange(0, n_steps + 1, dtype=np.float64)
    for d in d_list:
        a = math.log(d)
        schedule = Schedule(a=a, lambda_min=1.0, spectral_norm=1.0, d=d)
        alphas = schedule.alpha(np.arange(1, n_steps + 1))
        for scale in init_scales:
            traces = _kernels.diag_cov_traces(
                np.ones(d), float(scale) * np.ones(d), np.ascontiguousarray(alphas)
            )
            initial_risk = (0.5 if tamper else 1.0) * float(scale) * d
            bounds = risk_bound(schedule, steps, initial_risk=initial_risk)
            ratios = traces / bounds
            max_ratio = float(np.max(ratios))
            violations = np.nonzero(traces > bounds)[0]
            first_violation = int(violations[0]) if violations.size else None
            worst = max(worst, max_ratio)
            if first_violation is not None:
                passed = False
            rows.append(
                {
                    "d": d,
                    "init_scale": float(scale),
                    "max_trace_over_bound": max_ratio,
                    "first_violation_k": first_violation,
                }
            )
    return VerifyReport(
        name="thm3",
        passed=passed,
        metric="max trace/bound",
        worst=worst,
        threshold=1.0,
        rows=rows,
    )


def verify_lemma1(
    seed: int = 0,
    n: int = 10**6,
    n_random: int = 5,
    d_random: int = 3,
    threshold: float = PASS_THRESHOLD_Z,
    tamper: bool = False,
) -> VerifyReport:
    """Monte Carlo check of the Gaussian fourth-moment identity.

    Fixed case: gamma = I_2, u = e_1, analytic value diag(3, 1), absolute
    tolerance 0.05. Random cases: n_random draws of (gamma, u) at
    d = d_random, entrywise within 5 empirical standard errors. With
    tamper=True the analytic side uses coefficient 1 instead of 2 on the
    sandwich term; the suite must then fail (negative control).
    """
    rows = []

    def analytic(gamma, u):
        value = fourth_moment_rhs(gamma, np.outer(u, u), float(u @ gamma @ u))
        if tamper:
            value = value - gamma @ np.outer(u, u) @ gamma
        return value

    gamma = np.eye(2)
    u = np.array([1.0, 0.0])
    lhs = fourth_moment_lhs_mc(gamma, u, n, RngStream(seed, 1))
    fixed_diff = float(np.max(np.abs(lhs - analytic(gamma, u))))
    fixed_ok = fixed_diff <= 0.05
    rows.append({"case": "identity-2d", "max_abs_diff": fixed_diff, "tolerance": 0.05})

    stream = RngStream(seed, 2)
    worst_z = 0.0
    for i in range(n_random):
        g = stream.normal_block(d_random, d_random)
        gamma_i = g @ g.T / d_random + 0.5 * np.eye(d_random)
        u_i = stream.normals(d_random)
        lhs_i, stderr_i = fourth_moment_lhs_mc(
            gamma_i, u_i, n, RngStream(seed, 3 + i), with_stderr=True
        )
        z = float(np.max(np.abs(lhs_i - analytic(gamma_i, u_i)) / stderr_i))
        worst_z = max(worst_z, z)
        rows.append({"case": f"random-{d_random}d-{i}", "max_abs_z": z})

    return VerifyReport(
        name="lemma1",
        passed=fixed_ok and worst_z <= threshold,
        metric="max |z|",
        worst=worst_z,
        threshold=threshold,
        rows=rows,
    )


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def write_trajectories_csv(path, trajectories):
    """CSV with header k,method,run_id,mse; LF endings; round-trip floats."""
    with open(path, "w", newline="", encoding="ascii") as f:
        f.write("k,method,run_id,mse\n")
        for t in sorted(trajectories, key=lambda t: (t.method, t.run_id)):
            for k, mse in t.records:
                f.write(f"{k},{t.method},{t.run_id},{mse!r}\n")


def read_trajectories_csv(path) -> list:
    grouped = {}
    order = []
    with open(path, "r", newline="", encoding="ascii") as f:
        header = f.readline().strip()
        if header != "k,method,run_id,mse":
            raise ConfigError(f"unexpected CSV header {header!r}")
        for line in f:
            line = line.strip()
            if not line:
                continue
            k, method, run_id, mse = line.split(",")
            key = (method, int(run_id))
            if key not in grouped:
                grouped[key] = []
                order.append(key)
            grouped[key].append((int(k), float(mse)))
    return [Trajectory(method=m, run_id=r, records=grouped[(m, r)]) for m, r in order]


def config_to_json_dict(cfg: ExperimentConfig) -> dict:
    return {
        "model": cfg.model.to_json_dict(),
        "methods": [[m.value, count] for m, count in cfg.methods],
        "n_steps": cfg.n_steps,
        "a_param": cfg.a_param,
        "base_seed": cfg.base_seed,
        "checkpoint_count": cfg.checkpoint_count,
        "shared_init": cfg.shared_init,
        "init": cfg.init if isinstance(cfg.init, str) else np.asarray(cfg.init).tolist(),
        "shared_data": cfg.shared_data,
        "alpha_scale": cfg.alpha_scale,
    }


def config_from_json_dict(obj: dict) -> ExperimentConfig:
    try:
        methods = [(Method(name), int(count)) for name, count in obj["methods"]]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    init = obj.get("init", "standard_normal")
    if not isinstance(init, str):
        init = np.asarray(init, dtype=np.float64)
    cfg = ExperimentConfig(
        model=ModelSpec.from_json_dict(obj["model"]),
        methods=methods,
        n_steps=int(obj["n_steps"]),
        a_param=obj.get("a_param", "log_d"),
        base_seed=int(obj.get("base_seed", 0)),
        checkpoint_count=int(obj.get("checkpoint_count", 200)),
        shared_init=bool(obj.get("shared_init", True)),
        init=init,
        shared_data=bool(obj.get("shared_data", False)),
        alpha_scale=float(obj.get("alpha_scale", 1.0)),
    )
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            obj = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load config {path}: {exc}") from None
    try:
        return config_from_json_dict(obj)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid config {path}: {exc}") from None


def save_config(path, cfg: ExperimentConfig):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config_to_json_dict(cfg), f, indent=2)
        f.write("\n")
