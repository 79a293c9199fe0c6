"""Acceptance checks, one test per criterion.

Each test prints a `[acceptance] criterion N (...): PASS/FAIL (t s)` line
(visible with `pytest -s`) and enforces the criterion's tolerance and
runtime budget. The heavy rate-study runs use the same presets as the
`reproduce-fig2` command.
"""

import math
import time

import numpy as np
import pytest

from fgd_lab.cli import main
from fgd_lab.experiment import (
    figure2_config,
    run_experiment,
    summarize_method,
    verify_bound,
    verify_lemma1,
    verify_theorem1,
    verify_theorem2,
)
from fgd_lab.model import DataPoint, RngStream, gradient, loss
from fgd_lab.optimizers import dual_pass_eval
from fgd_lab.theory import (
    CovRecursionState,
    cov_recursion_step,
    fourth_moment_lhs_mc,
    fourth_moment_rhs,
    k_star,
)

SEED = 12345


def report(number, label, ok, elapsed, budget):
    verdict = "PASS" if ok else "FAIL"
    print(f"[acceptance] criterion {number} ({label}): {verdict} ({elapsed:.1f}s, budget {budget:.0f}s)")


def pooled_geomean_at(trajectories, method, target_k):
    values = []
    for t in trajectories:
        if t.method != method:
            continue
        ks = np.array([k for k, _ in t.records if k > 0], dtype=np.float64)
        nearest = int(ks[np.argmin(np.abs(np.log10(ks) - math.log10(target_k)))])
        values.append(dict(t.records)[nearest])
    return float(np.exp(np.mean(np.log(values))))


def test_criterion_1_fourth_moment_identity():
    t0 = time.perf_counter()
    rhs = fourth_moment_rhs(np.eye(2), np.outer([1.0, 0.0], [1.0, 0.0]), 1.0)
    analytic_ok = np.array_equal(rhs, np.diag([3.0, 1.0]))
    lhs = fourth_moment_lhs_mc(np.eye(2), np.array([1.0, 0.0]), 10**6, RngStream(SEED, 1))
    fixed_ok = np.max(np.abs(lhs - np.diag([3.0, 1.0]))) <= 0.05
    rep = verify_lemma1(seed=SEED, n=10**6, n_random=5, d_random=3)
    elapsed = time.perf_counter() - t0
    ok = analytic_ok and fixed_ok and rep.passed and elapsed < 10.0
    report(1, "fourth-moment identity", ok, elapsed, 10.0)
    assert analytic_ok and fixed_ok
    assert rep.passed, f"max |z| = {rep.worst}"
    assert elapsed < 10.0


def test_criterion_2_mean_recursion():
    t0 = time.perf_counter()
    rep = verify_theorem1(d=3, n_reps=10**4, k=50, seed=SEED, alpha=0.01)
    # cross-check the closed form the report used: theta* + (1-alpha)^50 (theta0 - theta*)
    setup = RngStream(SEED, 0)
    theta_star = setup.normals(3)
    theta0 = setup.normals(3)
    expected = theta_star + (1 - 0.01) ** 50 * (theta0 - theta_star)
    closed = np.array([row["exact"] for row in rep.rows])
    closed_ok = np.allclose(closed, expected, rtol=1e-12)
    elapsed = time.perf_counter() - t0
    ok = rep.passed and closed_ok and elapsed < 30.0
    report(2, "expectation dynamic", ok, elapsed, 30.0)
    assert closed_ok
    assert rep.passed, f"max |z| = {rep.worst}"
    assert elapsed < 30.0


def test_criterion_3_covariance_recursion():
    t0 = time.perf_counter()
    reports = [
        verify_theorem2(d=d, n_reps=2000, k_max=200, seed=SEED % 7)
        for d in (1, 2)
    ]
    # single-step symbolic value at d=1 with A0 = s
    symbolic_ok = True
    for s, alpha in [(0.0, 0.05), (1.7, 0.02), (10.0, 0.005)]:
        out = cov_recursion_step(CovRecursionState(np.array([[s]]), 0), np.array([[1.0]]), alpha)
        expected = (1 - alpha) ** 2 * s + 8 * alpha**2 * s + 3 * alpha**2
        if abs(out.a_matrix[0, 0] - expected) > 1e-12:
            symbolic_ok = False
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in reports) and symbolic_ok and elapsed < 60.0
    report(3, "covariance recursion", ok, elapsed, 60.0)
    assert symbolic_ok
    for d, rep in zip((1, 2), reports):
        assert rep.passed, f"d={d}: max |z| = {rep.worst}"
    assert elapsed < 60.0


def test_criterion_4_risk_bound_domination():
    t0 = time.perf_counter()
    rep = verify_bound(d_list=(8, 10, 16), n_steps=10**5, init_scales=(0.0, 1.0, 10.0))
    elapsed = time.perf_counter() - t0
    ok = rep.passed and elapsed < 20.0
    report(4, "risk-bound domination", ok, elapsed, 20.0)
    assert rep.passed, f"max trace/bound = {rep.worst}"
    assert elapsed < 20.0


def test_criterion_5a_rate_study_d10():
    t0 = time.perf_counter()
    cfg = figure2_config(10, SEED)
    trajectories = run_experiment(cfg)
    fgd = summarize_method(trajectories, "forward_gradient", cfg.n_steps, 10)
    sgd = summarize_method(trajectories, "sgd", cfg.n_steps, 10)
    fgd_ratio = fgd.ratio_vs_reference["d2_over_k"]
    sgd_ratio = sgd.ratio_vs_reference["d_over_k"]
    finals = [
        dict(t.records)[cfg.n_steps] / (100.0 / cfg.n_steps)
        for t in trajectories
        if t.method == "forward_gradient"
    ]
    in_band = sum(1 for r in finals if 0.2 <= r <= 5.0)
    sgd_final = [
        dict(t.records)[cfg.n_steps] / (10.0 / cfg.n_steps)
        for t in trajectories
        if t.method == "sgd"
    ][0]
    elapsed = time.perf_counter() - t0
    ok = (
        0.2 <= fgd_ratio <= 5.0
        and 0.2 <= sgd_ratio <= 5.0
        and in_band >= 8
        and 0.2 <= sgd_final <= 5.0
        and elapsed < 60.0
    )
    report(5, f"rate study d=10 (fgd {fgd_ratio:.2f}x d^2/k, sgd {sgd_ratio:.2f}x d/k)", ok, elapsed, 60.0)
    assert 0.2 <= fgd_ratio <= 5.0
    assert 0.2 <= sgd_ratio <= 5.0
    assert in_band >= 8, f"only {in_band}/10 runs ended inside [0.2, 5] x d^2/k"
    assert 0.2 <= sgd_final <= 5.0
    assert elapsed < 60.0


def test_criterion_5b_rate_study_d100_three_regimes():
    t0 = time.perf_counter()
    cfg = figure2_config(100, SEED)
    trajectories = run_experiment(cfg)
    elapsed_run = time.perf_counter() - t0
    fgd = summarize_method(trajectories, "forward_gradient", cfg.n_steps, 100)
    plateau_ratio = pooled_geomean_at(trajectories, "forward_gradient", 10**3) / pooled_geomean_at(
        trajectories, "forward_gradient", 10
    )
    slope = fgd.final_decade_loglog_slope
    ok = (
        elapsed_run < 900.0
        and 1.0 / 3.0 <= plateau_ratio <= 3.0
        and -1.2 <= slope <= -0.8
        and 0.2 <= fgd.ratio_vs_reference["d2_over_k"] <= 5.0
    )
    report(
        5,
        f"rate study d=100 (plateau {plateau_ratio:.2f}, slope {slope:.2f})",
        ok,
        elapsed_run,
        900.0,
    )
    assert elapsed_run < 900.0
    assert 1.0 / 3.0 <= plateau_ratio <= 3.0, "risk is not near-constant over the burn-in"
    assert -1.2 <= slope <= -0.8
    assert 0.2 <= fgd.ratio_vs_reference["d2_over_k"] <= 5.0


def test_criterion_6_burn_in_thresholds():
    t0 = time.perf_counter()
    ok = 1.65e3 <= k_star(10) <= 1.75e3 and 3.35e5 <= k_star(100) <= 3.45e5
    elapsed = time.perf_counter() - t0
    report(6, "burn-in thresholds", ok, elapsed, 1.0)
    assert 1.65e3 <= k_star(10) <= 1.75e3
    assert 3.35e5 <= k_star(100) <= 3.45e5


def test_criterion_7_forward_pass_is_exact():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for d in (2, 10):
        for _ in range(500):
            p = DataPoint(x=rng.standard_normal(d), y=float(rng.standard_normal()))
            theta = rng.standard_normal(d)
            v = rng.standard_normal(d)
            value, deriv = dual_pass_eval(theta, v, p)
            worst = max(
                worst,
                abs(value - loss(theta, p)),
                abs(deriv - float(gradient(theta, p) @ v)),
            )
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12
    report(7, f"single forward pass (worst |diff| {worst:.1e})", ok, elapsed, 10.0)
    assert worst <= 1e-12


def test_criterion_8_reproduce_fig2_byte_identical(tmp_path):
    t0 = time.perf_counter()
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["reproduce-fig2", "--d", "10", "--seed", str(SEED), "--out", str(out_a)]) == 0
    assert main(["reproduce-fig2", "--d", "10", "--seed", str(SEED), "--out", str(out_b)]) == 0
    csv_a = (out_a / "trajectories.csv").read_bytes()
    csv_b = (out_b / "trajectories.csv").read_bytes()
    identical = csv_a == csv_b
    svg = (out_a / "figure.svg").read_text()
    structure_ok = svg.count('class="trajectory"') == 11 and svg.count('class="reference"') == 3
    kstar_ok = 'class="kstar"' in svg
    elapsed = time.perf_counter() - t0
    ok = identical and structure_ok and kstar_ok
    report(8, "byte-identical reproduction", ok, elapsed, 120.0)
    assert identical
    assert structure_ok, "expected 11 trajectory paths and 3 reference lines"
    assert kstar_ok
