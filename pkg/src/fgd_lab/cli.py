"""Command-line interface: simulate, theory, verify, reproduce-fig2, plot.

Exit codes are part of the contract for CI use:
  0  success (all verifications passed)
  1  a verification suite failed
  2  configuration error
  3  runtime divergence (non-finite iterate; the step index is reported)
"""

import argparse
import json
import os
import sys

import numpy as np

from .errors import ConfigError, NonFiniteIterate
from .experiment import (
    ExperimentConfig,
    VerifyReport,
    config_to_json_dict,
    figure2_config,
    load_config,
    read_trajectories_csv,
    reference_curves,
    run_experiment,
    summarize,
    verify_bound,
    verify_lemma1,
    verify_theorem1,
    verify_theorem2,
    write_trajectories_csv,
)
from .model import ModelSpec
from .optimizers import Trajectory, default_checkpoints
from .svg import render_loglog_svg, write_svg
from .theory import exact_risk_curve, k_star, risk_bound

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_DIVERGED = 3

DEFAULT_SEED = 12345


def _log(message: str):
    print(f"[fgd-lab] {message}", file=sys.stderr)


def _derived_constants(cfg: ExperimentConfig) -> dict:
    schedule = cfg.schedule()
    d = cfg.model.d
    return {
        "a": schedule.a,
        "c_d": schedule.burn_in_constant,
        "k_star": k_star(d) if d >= 8 else None,
        "lambda_min": schedule.lambda_min,
        "spectral_norm": schedule.spectral_norm,
        "condition_number": schedule.condition_number,
        "alpha_1": schedule.alpha(1),
    }


def _write_summary(out_dir, command: str, cfg: ExperimentConfig, extra: dict):
    payload = {
        "command": command,
        "config": config_to_json_dict(cfg),
        "derived": _derived_constants(cfg),
    }
    payload.update(extra)
    path = os.path.join(out_dir, "summary.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
    return path


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if args.seed is not None:
        cfg.base_seed = args.seed
    if args.steps is not None:
        cfg.n_steps = args.steps
    if args.checkpoints is not None:
        cfg.checkpoint_count = args.checkpoints
    if args.a is not None:
        cfg.a_param = "log_d" if args.a == "log_d" else float(args.a)
    if args.shared_data is not None:
        cfg.shared_data = args.shared_data
    if args.runs is not None:
        cfg.methods = [(m, args.runs) for m, _ in cfg.methods]
    if args.d is not None:
        if cfg.model.sigma_kind != "identity" or np.any(cfg.model.theta_star != 0.0):
            raise ConfigError(
                "--d can only override identity-covariance configs with a zero true parameter"
            )
        cfg.model = ModelSpec.identity(args.d)
        if not isinstance(cfg.init, str):
            raise ConfigError("--d cannot be combined with an explicit init vector")
    return cfg


def cmd_simulate(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    cfg.validate()
    os.makedirs(args.out, exist_ok=True)
    methods = ", ".join(f"{m.value}x{n}" for m, n in cfg.methods)
    _log(
        f"simulate: d={cfg.model.d} steps={cfg.n_steps} methods=[{methods}] "
        f"seed={cfg.base_seed} a={cfg.resolved_a():.6g}"
    )
    trajectories = run_experiment(cfg)
    csv_path = os.path.join(args.out, "trajectories.csv")
    write_trajectories_csv(csv_path, trajectories)
    summaries = [s.__dict__ for s in summarize(trajectories, cfg)]
    summary_path = _write_summary(args.out, "simulate", cfg, {"methods_summary": summaries})
    _log(f"wrote {csv_path} and {summary_path}")
    return EXIT_OK


def _initial_second_moment(cfg: ExperimentConfig) -> np.ndarray:
    """E[(theta_0 - theta*)(theta_0 - theta*)^T] under the configured init."""
    theta_star = cfg.model.theta_star
    if isinstance(cfg.init, str):
        return np.eye(cfg.model.d) + np.outer(theta_star, theta_star)
    error = np.asarray(cfg.init, dtype=np.float64) - theta_star
    return np.outer(error, error)


def cmd_theory(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    cfg.validate()
    if cfg.alpha_scale != 1.0:
        raise ConfigError(
            "theory curves assume the unscaled schedule; remove alpha_scale from the config"
        )
    os.makedirs(args.out, exist_ok=True)
    schedule = cfg.schedule()
    checkpoints = default_checkpoints(cfg.n_steps, cfg.checkpoint_count)
    a0 = _initial_second_moment(cfg)
    _log(
        f"theory: d={cfg.model.d} steps={cfg.n_steps} a={schedule.a:.6g} "
        f"c_d={schedule.burn_in_constant:.6g}"
    )
    exact = exact_risk_curve(cfg.model.sigma, schedule, a0, cfg.n_steps, checkpoints)
    curves = [Trajectory(method="theory-exact", run_id=0, records=exact)]
    if schedule.a > 2:
        initial_risk = float(np.trace(a0))
        bound = [(k, float(risk_bound(schedule, k, initial_risk))) for k in checkpoints]
        curves.append(Trajectory(method="theory-bound", run_id=0, records=bound))
    else:
        _log("a <= 2: the closed-form bound does not apply; writing the exact curve only")
    csv_path = os.path.join(args.out, "theory.csv")
    write_trajectories_csv(csv_path, curves)
    summary_path = _write_summary(
        args.out,
        "theory",
        cfg,
        {"curves": [t.method for t in curves], "initial_risk": float(np.trace(a0))},
    )
    _log(f"wrote {csv_path} and {summary_path}")
    return EXIT_OK


def cmd_reproduce_fig2(args) -> int:
    cfg = figure2_config(args.d, args.seed if args.seed is not None else DEFAULT_SEED)
    cfg.validate()
    os.makedirs(args.out, exist_ok=True)
    _log(f"reproduce-fig2: d={args.d} seed={cfg.base_seed} (10 forward-gradient runs + 1 SGD run)")
    trajectories = run_experiment(cfg)
    csv_path = os.path.join(args.out, "trajectories.csv")
    write_trajectories_csv(csv_path, trajectories)
    positive_ks = np.array([k for k in default_checkpoints(cfg.n_steps, cfg.checkpoint_count) if k > 0])
    refs = reference_curves(cfg.model.d, positive_ks)
    document = render_loglog_svg(
        trajectories,
        references=refs,
        k_star_mark=k_star(cfg.model.d),
        title=f"forward gradient vs SGD, d={cfg.model.d}",
    )
    svg_path = os.path.join(args.out, "figure.svg")
    write_svg(svg_path, document)
    summaries = [s.__dict__ for s in summarize(trajectories, cfg)]
    summary_path = _write_summary(args.out, "reproduce-fig2", cfg, {"methods_summary": summaries})
    _log(f"wrote {csv_path}, {svg_path}, and {summary_path}")
    return EXIT_OK


_SUITES = ("thm1", "thm2", "thm3", "lemma1")


def _run_suite(name: str, seed: int, threshold: float, tamper: bool):
    if name == "thm1":
        return verify_theorem1(seed=seed, threshold=threshold, tamper=tamper)
    if name == "thm2":
        parts = [
            verify_theorem2(d=d, seed=seed, threshold=threshold, tamper=tamper)
            for d in (1, 2)
        ]
        rows = []
        for d, part in zip((1, 2), parts):
            rows.extend({"d": d, **row} for row in part.rows)
        return VerifyReport(
            name="thm2",
            passed=all(p.passed for p in parts),
            metric=parts[0].metric,
            worst=max(p.worst for p in parts),
            threshold=parts[0].threshold,
            rows=rows,
        )
    if name == "thm3":
        return verify_bound(tamper=tamper)
    if name == "lemma1":
        return verify_lemma1(seed=seed, threshold=threshold, tamper=tamper)
    raise ConfigError(f"unknown suite {name!r}")


def cmd_verify(args) -> int:
    suites = list(_SUITES) if args.suite == "all" else [args.suite]
    if args.tamper:
        _log("tamper flag set: constants are deliberately perturbed; suites should FAIL")
    reports = []
    for name in suites:
        _log(f"verify: running suite {name} (seed={args.seed})")
        reports.append(_run_suite(name, args.seed, args.threshold, args.tamper))
    print(f"{'suite':<8} {'metric':<18} {'worst':>12} {'threshold':>10} {'result':>8}")
    for report in reports:
        verdict = "PASS" if report.passed else "FAIL"
        print(
            f"{report.name:<8} {report.metric:<18} {report.worst:>12.4f} "
            f"{report.threshold:>10.2f} {verdict:>8}"
        )
        for row in report.rows:
            detail = " ".join(f"{key}={value}" for key, value in row.items())
            print(f"    {detail}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "verify_report.json")
        payload = {
            "command": "verify",
            "config": {
                "suite": args.suite,
                "seed": args.seed,
                "threshold": args.threshold,
                "tamper": args.tamper,
            },
            "reports": [r.__dict__ for r in reports],
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, default=str)
            f.write("\n")
        _log(f"wrote {path}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VERIFY_FAILED


def cmd_plot(args) -> int:
    trajectories = read_trajectories_csv(args.csv)
    refs = None
    marker = None
    if args.d is not None:
        ks = sorted({k for t in trajectories for k, _ in t.records if k > 0})
        if not ks:
            raise ConfigError("no positive steps in the CSV; nothing to plot")
        refs = reference_curves(args.d, np.array(ks, dtype=np.float64))
        marker = k_star(args.d) if args.d >= 8 else None
    try:
        document = render_loglog_svg(trajectories, references=refs, k_star_mark=marker,
                                     title=args.title)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    write_svg(args.out, document)
    _log(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fgd-lab",
        description="Forward gradient descent for Gaussian linear regression: "
        "simulation, exact theory curves, verification, and rate-study plots.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run a configured experiment")
    simulate.add_argument("--config", required=True, help="experiment config JSON")
    simulate.add_argument("--out", default="out", help="output directory")
    simulate.add_argument("--seed", type=int, default=None, help="override base seed")
    simulate.add_argument("--d", type=int, default=None, help="override dimension (identity covariance only)")
    simulate.add_argument("--steps", type=int, default=None, help="override step count")
    simulate.add_argument("--runs", type=int, default=None, help="override run count for every method")
    simulate.add_argument("--a", default=None, help="override decay constant ('log_d' or a number)")
    simulate.add_argument(
        "--shared-data", action=argparse.BooleanOptionalAction, default=None,
        help="replay one data sequence across runs",
    )
    simulate.add_argument("--checkpoints", type=int, default=None, help="override checkpoint count")
    simulate.set_defaults(handler=cmd_simulate)

    theory = sub.add_parser("theory", help="write exact risk and bound curves")
    theory.add_argument("--config", required=True, help="experiment config JSON")
    theory.add_argument("--out", default="out", help="output directory")
    for flag, kwargs in (
        ("--seed", dict(type=int, default=None)),
        ("--d", dict(type=int, default=None)),
        ("--steps", dict(type=int, default=None)),
        ("--runs", dict(type=int, default=None)),
        ("--a", dict(default=None)),
        ("--shared-data", dict(action=argparse.BooleanOptionalAction, default=None)),
        ("--checkpoints", dict(type=int, default=None)),
    ):
        theory.add_argument(flag, **kwargs)
    theory.set_defaults(handler=cmd_theory)

    fig2 = sub.add_parser("reproduce-fig2", help="run the rate-study preset and plot it")
    fig2.add_argument("--d", type=int, choices=(10, 100), default=10)
    fig2.add_argument("--seed", type=int, default=None)
    fig2.add_argument("--out", default="out")
    fig2.set_defaults(handler=cmd_reproduce_fig2)

    verify = sub.add_parser("verify", help="run verification suites against theory")
    verify.add_argument("--suite", choices=("all",) + _SUITES, default="all")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument(
        "--threshold", type=float, default=5.0,
        help="z-score pass threshold for the Monte Carlo suites",
    )
    verify.add_argument("--out", default=None, help="optional directory for verify_report.json")
    verify.add_argument(
        "--tamper", action="store_true",
        help="negative control: perturb a constant in each suite; suites must FAIL",
    )
    verify.set_defaults(handler=cmd_verify)

    plot = sub.add_parser("plot", help="render a trajectories CSV as a log-log SVG")
    plot.add_argument("--csv", required=True)
    plot.add_argument("--out", required=True)
    plot.add_argument("--d", type=int, default=None, help="draw reference lines for this dimension")
    plot.add_argument("--title", default="")
    plot.set_defaults(handler=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        _log(f"config error: {exc}")
        return EXIT_CONFIG_ERROR
    except NonFiniteIterate as exc:
        _log(f"divergence: {exc}")
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
