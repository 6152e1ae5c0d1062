import numpy as np
import pytest

from rmhmc.errors import MetricNotPositiveDefinite
from rmhmc.models import (
    BananaModel,
    CallCountingModel,
    FunnelModel,
    GaussianModel,
    LogisticModel,
    generate_banana_data,
    generate_logistic_data,
    harmonic_oscillator,
    load_logistic_csv,
    make_model,
    softabs_metric,
    softabs_metric_grad,
)

LOG_2PI = np.log(2 * np.pi)


def fd_gradient(f, q, h=1e-6):
    grad = np.empty(q.size)
    for i in range(q.size):
        shift = np.zeros(q.size)
        shift[i] = 0.5 * h
        grad[i] = (f(q + shift) - f(q - shift)) / h
    return grad


def fd_metric_grad(metric_fn, q, h=1e-6):
    out = np.empty((q.size,) + metric_fn(q).shape)
    for i in range(q.size):
        shift = np.zeros(q.size)
        shift[i] = 0.5 * h
        out[i] = (metric_fn(q + shift) - metric_fn(q - shift)) / h
    return out


MODEL_FIXTURES = ["gaussian_model", "banana_model", "funnel_model", "logistic_model"]


class TestDerivativeAudit:
    @pytest.mark.parametrize("fixture", MODEL_FIXTURES)
    def test_gradient_matches_finite_differences(self, fixture, request):
        model = request.getfixturevalue(fixture)
        rng = np.random.default_rng(31)
        for _ in range(20):
            q = 0.5 * rng.standard_normal(model.dim)
            np.testing.assert_allclose(
                model.grad_log_posterior(q),
                fd_gradient(model.log_posterior, q),
                rtol=1e-5,
                atol=1e-7,
            )

    @pytest.mark.parametrize("fixture", MODEL_FIXTURES)
    def test_metric_grad_matches_finite_differences(self, fixture, request):
        model = request.getfixturevalue(fixture)
        rng = np.random.default_rng(32)
        for _ in range(20):
            q = 0.5 * rng.standard_normal(model.dim)
            np.testing.assert_allclose(
                model.metric_grad(q),
                fd_metric_grad(model.metric, q),
                rtol=1e-5,
                atol=1e-7,
            )

    @pytest.mark.parametrize("fixture", MODEL_FIXTURES)
    def test_metric_symmetric_positive_definite(self, fixture, request):
        model = request.getfixturevalue(fixture)
        rng = np.random.default_rng(33)
        for _ in range(20):
            q = rng.standard_normal(model.dim)
            g = model.metric(q)
            np.testing.assert_allclose(g, g.T, atol=1e-12)
            assert np.linalg.eigvalsh(g).min() > 0


class TestGaussian:
    def test_constant_metric_is_precision(self, gaussian_model):
        np.testing.assert_allclose(
            gaussian_model.metric(np.zeros(2)) @ gaussian_model.covariance,
            np.eye(2),
            atol=1e-12,
        )

    def test_metric_grad_exactly_zero(self, gaussian_model):
        assert not gaussian_model.metric_grad(np.ones(2)).any()

    def test_non_spd_covariance_rejected(self):
        with pytest.raises(MetricNotPositiveDefinite):
            GaussianModel([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])

    def test_harmonic_oscillator_metric(self):
        model = harmonic_oscillator(omega=2.0)
        np.testing.assert_allclose(model.metric(np.zeros(1)), [[4.0]])


class TestBanana:
    def test_metric_at_theta2_zero(self):
        model = BananaModel(np.zeros(100), sigma_y=2.0, sigma_theta=2.0)
        np.testing.assert_allclose(
            model.metric(np.array([0.0, 0.0])), [[25.25, 0.0], [0.0, 0.25]]
        )

    def test_metric_grad_structure(self, banana_model):
        grad = banana_model.metric_grad(np.array([3.0, 0.7]))
        assert not grad[0].any()  # metric does not depend on theta_1
        n, sy2 = 100, 4.0
        np.testing.assert_allclose(
            grad[1], [[0.0, 2 * n / sy2], [2 * n / sy2, 8 * n * 0.7 / sy2]]
        )

    def test_empty_observations_rejected(self):
        with pytest.raises(ValueError):
            BananaModel([])

    def test_generated_data_mean(self):
        data = generate_banana_data(0, 200_000)
        # E[y] = theta_1 + theta_2^2 = 0.5 + 0.5 = 1.0
        assert np.mean(data) == pytest.approx(1.0, abs=0.02)

    def test_generated_data_deterministic(self):
        np.testing.assert_array_equal(generate_banana_data(7, 50), generate_banana_data(7, 50))


class TestSoftAbs:
    def test_large_alpha_absolute_value(self):
        out = softabs_metric(np.diag([2.0, -3.0]), 1e6)
        np.testing.assert_allclose(out, np.diag([2.0, 3.0]), atol=1e-6)

    def test_zero_matrix_limit(self):
        out = softabs_metric(np.zeros((1, 1)), 1e3)
        assert out[0, 0] == pytest.approx(1e-3, rel=1e-9)

    def test_output_positive_definite_for_indefinite_input(self):
        rng = np.random.default_rng(34)
        for _ in range(20):
            h = rng.standard_normal((4, 4))
            h = 0.5 * (h + h.T)
            out = softabs_metric(h, 1e4)
            assert np.linalg.eigvalsh(out).min() > 0

    def test_invalid_alpha(self):
        with pytest.raises(ValueError):
            softabs_metric(np.eye(2), 0.0)

    def test_metric_grad_matches_finite_differences_with_degenerate_eigenvalues(self):
        # equal eigenvalues exercise the confluent divided-difference branch
        def hess(q):
            return np.array([[1.0 + q[0], q[1]], [q[1], 1.0 + q[0]]])

        def hess_grad(q):
            return np.array([np.eye(2), [[0.0, 1.0], [1.0, 0.0]]])

        alpha = 10.0
        q = np.array([0.2, 0.0])
        analytic = softabs_metric_grad(hess(q), hess_grad(q), alpha)
        h = 1e-6
        fd = np.empty((2, 2, 2))
        for i in range(2):
            shift = np.zeros(2)
            shift[i] = 0.5 * h
            fd[i] = (softabs_metric(hess(q + shift), alpha) - softabs_metric(hess(q - shift), alpha)) / h
        np.testing.assert_allclose(analytic, fd, rtol=1e-5, atol=1e-8)


class TestFunnel:
    def test_log_density_at_origin(self, funnel_model):
        expected = -10 * 0.5 * LOG_2PI - 0.5 * np.log(2 * np.pi * 9.0)
        assert funnel_model.log_posterior(np.zeros(11)) == pytest.approx(expected)

    def test_metric_positive_definite_in_extreme_tails(self, funnel_model):
        rng = np.random.default_rng(35)
        for v in (-5.0, 0.0, 5.0):
            q = np.append(rng.standard_normal(10), v)
            assert np.linalg.eigvalsh(funnel_model.metric(q)).min() > 0

    def test_dimension(self, funnel_model):
        assert funnel_model.dim == 11


class TestLogistic:
    def test_metric_at_zero(self, logistic_model):
        x = logistic_model.design
        expected = 0.25 * x.T @ x + np.eye(4)
        np.testing.assert_allclose(logistic_model.metric(np.zeros(4)), expected)

    def test_single_observation_hand_gradient(self):
        model = LogisticModel([[1.0]], [1.0])
        # sigma(0) = 1/2, so d log-lik = 1 - 1/2 = 0.5; prior term is zero at 0
        np.testing.assert_allclose(model.grad_log_posterior(np.zeros(1)), [0.5])
        assert model.log_posterior(np.zeros(1)) == pytest.approx(
            np.log(0.5) - 0.5 * LOG_2PI
        )

    def test_label_frequency_near_half_for_zero_beta(self):
        _, labels = generate_logistic_data(0, 10_000, 3)
        assert 0.45 <= labels.mean() <= 0.55

    def test_bad_labels_rejected(self):
        with pytest.raises(ValueError):
            LogisticModel([[1.0]], [2.0])

    def test_csv_round_trip(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("x1,x2,y\n1.0,2.0,1\n-0.5,0.25,0\n")
        design, labels = load_logistic_csv(path)
        np.testing.assert_allclose(design, [[1.0, 2.0], [-0.5, 0.25]])
        np.testing.assert_allclose(labels, [1.0, 0.0])

    def test_map_estimate_matches_independent_optimizer(self):
        from scipy.optimize import minimize

        design, labels = generate_logistic_data(3, 500, 4, [1.0, -1.0, 0.5, 0.0])
        model = LogisticModel(design, labels)
        oracle = minimize(
            lambda b: -model.log_posterior(b),
            np.zeros(4),
            jac=lambda b: -model.grad_log_posterior(b),
            method="BFGS",
        )
        assert oracle.success
        # our gradient must vanish at the independent optimizer's MAP point
        np.testing.assert_allclose(
            model.grad_log_posterior(oracle.x), np.zeros(4), atol=1e-4
        )


class TestFactoryAndCounting:
    def test_make_model_names(self):
        assert isinstance(make_model("gaussian"), GaussianModel)
        assert isinstance(make_model("banana"), BananaModel)
        assert isinstance(make_model("funnel", num_latent=5), FunnelModel)
        assert isinstance(make_model("logistic", n=20, k=2), LogisticModel)

    def test_make_model_unknown(self):
        with pytest.raises(ValueError):
            make_model("volatility")

    def test_call_counting(self, banana_model):
        counting = CallCountingModel(banana_model)
        counting.metric(np.zeros(2))
        counting.metric(np.zeros(2))
        counting.log_posterior(np.zeros(2))
        assert counting.counts["metric"] == 2
        assert counting.counts["log_posterior"] == 1
        assert counting.counts["metric_grad"] == 0
