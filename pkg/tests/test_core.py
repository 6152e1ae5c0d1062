import numpy as np
import pytest

from rmhmc.core import (
    IntegratorConfig,
    MetricFactor,
    PhasePoint,
    TargetModel,
    grad_p_hamiltonian,
    grad_q_hamiltonian,
    hamiltonian,
    metric_factor,
    phase_velocity,
    require_spd,
)
from rmhmc.errors import MetricNotPositiveDefinite, NonFiniteValue
from rmhmc.models import GaussianModel

from conftest import PAPER_COV, PAPER_MEAN


class ScaledIdentityModel(TargetModel):
    """L(q) = -||q||^2 / 2 with metric c * Id."""

    constant_metric = True

    def __init__(self, dim=2, scale=1.0, zero_logp=False):
        self._dim = dim
        self._scale = scale
        self._zero_logp = zero_logp

    @property
    def dim(self):
        return self._dim

    def log_posterior(self, q):
        return 0.0 if self._zero_logp else -0.5 * float(q @ q)

    def grad_log_posterior(self, q):
        return np.zeros(self._dim) if self._zero_logp else -q

    def metric(self, q):
        return self._scale * np.eye(self._dim)

    def metric_grad(self, q):
        return np.zeros((self._dim, self._dim, self._dim))


class TestPhasePoint:
    def test_valid_construction(self):
        point = PhasePoint([1.0, 2.0], [3.0, 4.0])
        assert point.dim == 2
        np.testing.assert_array_equal(point.q, [1.0, 2.0])

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            PhasePoint([1.0, 2.0], [3.0])

    def test_non_finite_rejected(self):
        with pytest.raises(NonFiniteValue):
            PhasePoint([np.nan], [0.0])
        with pytest.raises(NonFiniteValue):
            PhasePoint([0.0], [np.inf])

    def test_negated_momentum(self):
        point = PhasePoint([1.0], [2.0]).with_negated_momentum()
        assert point.p[0] == -2.0
        assert point.q[0] == 1.0


class TestIntegratorConfig:
    def test_defaults(self):
        config = IntegratorConfig(0.1, 5)
        assert config.tolerance == 1e-6
        assert config.max_fixed_point_iters == 1000

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(step_size=np.inf, num_steps=1),
            dict(step_size=0.1, num_steps=0),
            dict(step_size=0.1, num_steps=1, tolerance=-1.0),
            dict(step_size=0.1, num_steps=1, max_fixed_point_iters=0),
            dict(step_size=0.1, num_steps=1, relaxation=0.0),
            dict(step_size=0.1, num_steps=1, relaxation=1.5),
        ],
    )
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            IntegratorConfig(**kwargs)


class TestRequireSpd:
    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            require_spd([[1.0, 0.5], [0.0, 1.0]])

    def test_indefinite_rejected(self):
        with pytest.raises(MetricNotPositiveDefinite):
            require_spd([[1.0, 2.0], [2.0, 1.0]])

    def test_spd_accepted(self):
        out = require_spd(PAPER_COV)
        np.testing.assert_array_equal(out, PAPER_COV)


class TestHamiltonian:
    def test_all_terms_vanish(self):
        model = ScaledIdentityModel()
        assert hamiltonian(model, PhasePoint([0.0, 0.0], [0.0, 0.0])) == 0.0

    def test_identity_metric_hand_value(self):
        model = ScaledIdentityModel()
        value = hamiltonian(model, PhasePoint([1.0, 0.0], [0.0, 2.0]))
        assert value == pytest.approx(2.5)

    def test_constant_metric_log_determinant(self):
        model = ScaledIdentityModel(scale=2.0, zero_logp=True)
        value = hamiltonian(model, PhasePoint([0.0, 0.0], [0.0, 0.0]))
        assert value == pytest.approx(0.6931471805599453)

    def test_gaussian_against_direct_formula(self):
        model = GaussianModel(PAPER_MEAN, PAPER_COV)
        rng = np.random.default_rng(11)
        for _ in range(20):
            q = rng.standard_normal(2)
            p = rng.standard_normal(2)
            # independent oracle: explicit 2x2 inverse and determinant
            a, b, c, d = PAPER_COV[0, 0], PAPER_COV[0, 1], PAPER_COV[1, 0], PAPER_COV[1, 1]
            det = a * d - b * c
            prec = np.array([[d, -b], [-c, a]]) / det
            diff = q - PAPER_MEAN
            log_norm = -0.5 * 2 * np.log(2 * np.pi) - 0.5 * np.log(det)
            logp = log_norm - 0.5 * diff @ prec @ diff
            # metric G = Sigma^{-1}: G^{-1} = Sigma and log det G = -log det Sigma
            expected = -logp + 0.5 * p @ PAPER_COV @ p - 0.5 * np.log(det)
            assert hamiltonian(model, PhasePoint(q, p)) == pytest.approx(expected, rel=1e-12)

    def test_even_in_momentum(self, banana_model):
        rng = np.random.default_rng(12)
        for _ in range(10):
            q = 0.5 * rng.standard_normal(2)
            p = rng.standard_normal(2)
            assert hamiltonian(banana_model, PhasePoint(q, p)) == pytest.approx(
                hamiltonian(banana_model, PhasePoint(q, -p))
            )


class TestGradients:
    def test_grad_p_identity_metric(self):
        model = ScaledIdentityModel()
        out = grad_p_hamiltonian(model, PhasePoint([0.0, 0.0], [3.0, -1.0]))
        np.testing.assert_allclose(out, [3.0, -1.0])

    def test_grad_p_scaled_metric(self):
        model = ScaledIdentityModel(scale=2.0)
        out = grad_p_hamiltonian(model, PhasePoint([0.0, 0.0], [4.0, 0.0]))
        np.testing.assert_allclose(out, [2.0, 0.0])

    def test_grad_p_banana_closed_form_inverse(self, banana_model):
        rng = np.random.default_rng(13)
        q = 0.5 * rng.standard_normal(2)
        p = rng.standard_normal(2)
        g = banana_model.metric(q)
        det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
        inv = np.array([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]]) / det
        np.testing.assert_allclose(
            grad_p_hamiltonian(banana_model, PhasePoint(q, p)), inv @ p, rtol=1e-10
        )

    def test_grad_q_constant_metric(self):
        model = ScaledIdentityModel()
        out = grad_q_hamiltonian(model, PhasePoint([1.0, 2.0], [5.0, -5.0]))
        np.testing.assert_allclose(out, [1.0, 2.0])

    def test_grad_q_independent_of_p_for_constant_metric(self, gaussian_model):
        q = np.array([0.3, -0.4])
        a = grad_q_hamiltonian(gaussian_model, PhasePoint(q, np.array([1.0, 2.0])))
        b = grad_q_hamiltonian(gaussian_model, PhasePoint(q, np.array([-7.0, 0.5])))
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("fixture", ["banana_model", "logistic_model", "funnel_model"])
    def test_grad_q_matches_finite_differences(self, fixture, request):
        model = request.getfixturevalue(fixture)
        rng = np.random.default_rng(14)
        h = 1e-6
        for _ in range(5):
            q = 0.5 * rng.standard_normal(model.dim)
            p = rng.standard_normal(model.dim)
            grad = grad_q_hamiltonian(model, PhasePoint(q, p))
            fd = np.empty(model.dim)
            for i in range(model.dim):
                shift = np.zeros(model.dim)
                shift[i] = 0.5 * h
                fd[i] = (
                    hamiltonian(model, PhasePoint(q + shift, p))
                    - hamiltonian(model, PhasePoint(q - shift, p))
                ) / h
            np.testing.assert_allclose(grad, fd, rtol=1e-5, atol=1e-6)

    def test_phase_velocity_consistent(self, banana_model):
        rng = np.random.default_rng(15)
        q = 0.5 * rng.standard_normal(2)
        p = rng.standard_normal(2)
        dq, dp = phase_velocity(banana_model, q, p)
        point = PhasePoint(q, p)
        np.testing.assert_allclose(dq, grad_p_hamiltonian(banana_model, point))
        np.testing.assert_allclose(dp, -grad_q_hamiltonian(banana_model, point))


class TestMetricFactor:
    def test_log_det(self):
        factor = MetricFactor(np.diag([4.0, 9.0]))
        assert factor.log_det == pytest.approx(np.log(36.0))

    def test_solve_matches_inverse(self):
        g = np.array([[2.0, 0.3], [0.3, 1.0]])
        factor = MetricFactor(g)
        b = np.array([1.0, -2.0])
        np.testing.assert_allclose(factor.solve(b), np.linalg.solve(g, b), rtol=1e-12)

    def test_non_spd_rejected(self):
        with pytest.raises(MetricNotPositiveDefinite):
            MetricFactor(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_upper_factor_reconstructs(self):
        g = np.array([[2.0, 0.3], [0.3, 1.0]])
        upper = MetricFactor(g).upper_factor()
        np.testing.assert_allclose(upper.T @ upper, g, rtol=1e-12)

    def test_constant_metric_factor_cached(self, gaussian_model):
        first = metric_factor(gaussian_model, np.zeros(2))
        second = metric_factor(gaussian_model, np.ones(2))
        assert first is second

    def test_position_dependent_factor_not_cached(self, banana_model):
        a = metric_factor(banana_model, np.zeros(2))
        b = metric_factor(banana_model, np.zeros(2))
        assert a is not b
