import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fgd_lab.errors import DimensionMismatch, NotPositiveDefinite
from fgd_lab.model import DataPoint, ModelSpec, RngStream, gradient, loss, sample_datapoint


class TestRngStream:
    def test_replay_is_bit_identical(self):
        a = RngStream(123, 5).normals(64)
        b = RngStream(123, 5).normals(64)
        np.testing.assert_array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RngStream(123, 5).normals(64)
        b = RngStream(123, 6).normals(64)
        assert not np.array_equal(a, b)

    def test_block_matches_sequential_draws(self):
        block = RngStream(9, 1).normal_block(4, 3)
        seq = RngStream(9, 1)
        for row in block:
            np.testing.assert_array_equal(row, seq.normals(3))


class TestModelSpec:
    def test_rejects_non_pd_sigma(self):
        with pytest.raises(NotPositiveDefinite):
            ModelSpec(d=2, sigma=np.array([[1.0, 2.0], [2.0, 1.0]]), theta_star=np.zeros(2))

    def test_rejects_wrong_theta_star_length(self):
        with pytest.raises(DimensionMismatch):
            ModelSpec(d=2, sigma=np.eye(2), theta_star=np.zeros(3))

    def test_sigma_kind(self):
        assert ModelSpec.identity(3).sigma_kind == "identity"
        assert ModelSpec(2, np.diag([1.0, 2.0]), np.zeros(2)).sigma_kind == "diagonal"
        assert ModelSpec(2, np.array([[2.0, 0.5], [0.5, 2.0]]), np.zeros(2)).sigma_kind == "dense"

    @pytest.mark.parametrize(
        "spec",
        [
            ModelSpec.identity(3),
            ModelSpec(2, np.diag([1.0, 2.0]), np.array([0.5, -1.0])),
            ModelSpec(2, np.array([[2.0, 0.5], [0.5, 2.0]]), np.ones(2)),
        ],
    )
    def test_json_round_trip(self, spec):
        again = ModelSpec.from_json_dict(spec.to_json_dict())
        assert again.d == spec.d
        np.testing.assert_array_equal(again.sigma, spec.sigma)
        np.testing.assert_array_equal(again.theta_star, spec.theta_star)

    def test_identity_json_is_compact(self):
        obj = ModelSpec.identity(100).to_json_dict()
        assert obj["sigma_kind"] == "identity"
        assert obj["sigma"] is None


class TestSampleDatapoint:
    def test_reproducible_sequence(self):
        spec = ModelSpec.identity(4, theta_star=np.array([1.0, 0.0, -1.0, 2.0]))
        chol = spec.cholesky_factor()
        rng_a, rng_b = RngStream(5, 2), RngStream(5, 2)
        for _ in range(10):
            pa = sample_datapoint(spec, chol, rng_a)
            pb = sample_datapoint(spec, chol, rng_b)
            np.testing.assert_array_equal(pa.x, pb.x)
            assert pa.y == pb.y

    def test_draw_order_design_then_noise(self):
        sigma = np.array([[2.0, 0.5], [0.5, 1.0]])
        spec = ModelSpec(2, sigma, np.array([1.0, -1.0]))
        chol = spec.cholesky_factor()
        p = sample_datapoint(spec, chol, RngStream(17, 3))
        raw = RngStream(17, 3).normals(3)
        x_expected = chol @ raw[:2]
        np.testing.assert_array_equal(p.x, x_expected)
        assert p.y == float(x_expected @ spec.theta_star + raw[2])

    def test_zero_regression_vector_gives_pure_noise(self):
        spec = ModelSpec.identity(3)
        chol = spec.cholesky_factor()
        rng = RngStream(1, 0)
        ys = [sample_datapoint(spec, chol, rng).y for _ in range(10)]
        # y = eps when theta_star = 0
        assert all(abs(y) < 10 for y in ys)

    def test_mean_of_y_is_zero(self):
        # theta_star = 0 makes y pure standard normal noise
        spec = ModelSpec.identity(2)
        chol = spec.cholesky_factor()
        rng = RngStream(100, 0)
        n = 10**5
        block = rng.normal_block(n, 3)
        ys = block[:, :2] @ chol.T @ spec.theta_star + block[:, 2]
        assert abs(ys.mean()) <= 0.02

    def test_empirical_covariance_identity(self):
        spec = ModelSpec.identity(2)
        rng = RngStream(101, 0)
        n = 10**5
        xs = rng.normal_block(n, 2)  # chol = I
        cov = xs.T @ xs / n
        np.testing.assert_allclose(cov, np.eye(2), atol=0.05)

    def test_empirical_variance_d1(self):
        spec = ModelSpec(1, np.array([[4.0]]), np.zeros(1))
        chol = spec.cholesky_factor()
        rng = RngStream(102, 0)
        n = 10**5
        xs = (rng.normal_block(n, 1) @ chol.T).ravel()
        assert xs.var() == pytest.approx(4.0, abs=0.2)

    def test_design_second_moment_matches_sigma(self):
        sigma = np.array([[2.0, 1.0], [1.0, 2.0]])  # spectral norm 3
        spec = ModelSpec(2, sigma, np.zeros(2))
        chol = spec.cholesky_factor()
        n = 10**5
        xs = RngStream(103, 0).normal_block(n, 2) @ chol.T
        second = xs.T @ xs / n
        assert np.max(np.abs(second - sigma)) <= 5.0 / np.sqrt(n)

    def test_dimension_mismatch(self):
        spec = ModelSpec.identity(2)
        with pytest.raises(DimensionMismatch):
            sample_datapoint(spec, np.eye(3), RngStream(0, 0))


class TestLossAndGradient:
    def test_zero_residual_gradient(self):
        p = DataPoint(x=np.array([1.0, 2.0]), y=5.0)
        theta = np.array([1.0, 2.0])  # x . theta = 5 = y
        np.testing.assert_array_equal(gradient(theta, p), np.zeros(2))
        assert loss(theta, p) == 0.0

    def test_gradient_hand_value(self):
        p = DataPoint(x=np.array([1.0, 0.0]), y=2.0)
        np.testing.assert_array_equal(gradient(np.zeros(2), p), np.array([-2.0, 0.0]))

    def test_loss_hand_value(self):
        # y = 3, x.theta = 1: loss = 0.5 * 2^2 = 2
        p = DataPoint(x=np.array([1.0]), y=3.0)
        assert loss(np.array([1.0]), p) == 2.0

    def test_loss_nonnegative_and_consistent_with_gradient(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            d = rng.integers(1, 6)
            p = DataPoint(x=rng.standard_normal(d), y=float(rng.standard_normal()))
            theta = rng.standard_normal(d)
            residual = p.y - p.x @ theta
            assert loss(theta, p) >= 0.0
            assert loss(theta, p) == pytest.approx(0.5 * residual**2, rel=1e-14)
            np.testing.assert_allclose(gradient(theta, p), -residual * p.x, rtol=1e-14)

    def test_gradient_matches_finite_differences_hand_case(self):
        p = DataPoint(x=np.array([0.7, -1.2]), y=0.9)
        theta = np.array([0.3, 0.4])
        g = gradient(theta, p)
        h = 1e-6
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            approx = (loss(theta + e, p) - loss(theta - e, p)) / (2 * h)
            assert g[j] == pytest.approx(approx, abs=1e-6)

    @settings(max_examples=50, deadline=None)
    @given(
        seed=st.integers(0, 2**32 - 1),
        d=st.integers(1, 8),
    )
    def test_gradient_matches_finite_differences(self, seed, d):
        rng = np.random.default_rng(seed)
        p = DataPoint(x=rng.standard_normal(d), y=float(rng.standard_normal()))
        theta = rng.standard_normal(d)
        g = gradient(theta, p)
        h = 1e-6
        for j in range(d):
            e = np.zeros(d)
            e[j] = h
            approx = (loss(theta + e, p) - loss(theta - e, p)) / (2 * h)
            assert g[j] == pytest.approx(approx, rel=1e-5, abs=1e-7)

    def test_dimension_mismatch(self):
        p = DataPoint(x=np.array([1.0, 2.0]), y=0.0)
        with pytest.raises(DimensionMismatch):
            gradient(np.zeros(3), p)
        with pytest.raises(DimensionMismatch):
            loss(np.zeros(3), p)
