"""Bundled target models with closed-form metrics and metric derivatives.

Four targets: a Gaussian with constant metric, the two-dimensional
banana-shaped posterior, Neal's funnel under a SoftAbs metric, and Bayesian
logistic regression with the Fisher-plus-prior metric. All derivatives are
analytic; the test suite audits every one against central finite differences.
"""

from __future__ import annotations

import csv

import numpy as np

from .core import TargetModel, require_spd
from .errors import EigendecompositionFailure

LOG_2PI = float(np.log(2.0 * np.pi))


class GaussianModel(TargetModel):
    """Multivariate normal posterior with the constant metric G = Sigma^{-1}."""

    constant_metric = True

    def __init__(self, mean, covariance):
        self.mean = np.asarray(mean, dtype=float)
        self.covariance = require_spd(covariance)
        self._dim = self.mean.size
        chol = np.linalg.cholesky(self.covariance)
        self.precision = np.linalg.inv(self.covariance)
        self.precision = 0.5 * (self.precision + self.precision.T)
        self._log_norm = -0.5 * self._dim * LOG_2PI - float(np.sum(np.log(np.diag(chol))))
        self._zero_grad = np.zeros((self._dim, self._dim, self._dim))
        self._neg_precision = -self.precision
        self._precision_mean = self.precision @ self.mean

    @property
    def dim(self):
        return self._dim

    def initial_position(self):
        return self.mean.copy()

    def log_posterior(self, q):
        d = q - self.mean
        return self._log_norm - 0.5 * float(d @ self.precision @ d)

    def grad_log_posterior(self, q):
        return self._neg_precision @ q + self._precision_mean

    def metric(self, q):
        return self.precision

    def metric_grad(self, q):
        return self._zero_grad


def harmonic_oscillator(omega: float = 1.0, dim: int = 1) -> GaussianModel:
    """Standard oscillator H = omega^2 q^2 / 2 + p^2 / 2 as a Gaussian target."""
    cov = np.eye(dim) / omega**2
    return GaussianModel(np.zeros(dim), cov)


class BananaModel(TargetModel):
    """Two-parameter model with likelihood mean theta_1 + theta_2^2.

    The ridge-shaped posterior arising from n observations
    y_i ~ Normal(theta_1 + theta_2^2, sigma_y^2) with independent
    Normal(0, sigma_theta^2) priors. The Fisher-plus-prior metric and its
    derivatives are closed-form in theta_2.
    """

    def __init__(self, observations, sigma_y=2.0, sigma_theta=2.0):
        self.observations = np.asarray(observations, dtype=float)
        if self.observations.size < 1:
            raise ValueError("at least one observation is required")
        self.sigma_y = float(sigma_y)
        self.sigma_theta = float(sigma_theta)
        self._n = self.observations.size
        self._sum_y = float(np.sum(self.observations))
        self._sum_y2 = float(np.sum(self.observations**2))

    @property
    def dim(self):
        return 2

    def initial_position(self):
        return np.zeros(2)

    def log_posterior(self, q):
        t1, t2 = q
        sy2 = self.sigma_y**2
        st2 = self.sigma_theta**2
        mean = t1 + t2 * t2
        sq_resid = self._sum_y2 - 2.0 * mean * self._sum_y + self._n * mean * mean
        log_lik = -0.5 * sq_resid / sy2 - 0.5 * self._n * (LOG_2PI + np.log(sy2))
        log_prior = -0.5 * (t1 * t1 + t2 * t2) / st2 - (LOG_2PI + np.log(st2))
        return float(log_lik + log_prior)

    def grad_log_posterior(self, q):
        t1, t2 = q
        sy2 = self.sigma_y**2
        st2 = self.sigma_theta**2
        resid_sum = (self._sum_y - self._n * (t1 + t2 * t2)) / sy2
        return np.array([resid_sum - t1 / st2, 2.0 * t2 * resid_sum - t2 / st2])

    def metric(self, q):
        t2 = q[1]
        sy2 = self.sigma_y**2
        prior = 1.0 / self.sigma_theta**2
        off = 2.0 * self._n * t2 / sy2
        return np.array(
            [
                [self._n / sy2 + prior, off],
                [off, 4.0 * self._n * t2 * t2 / sy2 + prior],
            ]
        )

    def metric_grad(self, q):
        t2 = q[1]
        sy2 = self.sigma_y**2
        grad = np.zeros((2, 2, 2))
        off = 2.0 * self._n / sy2
        grad[1] = [[0.0, off], [off, 8.0 * self._n * t2 / sy2]]
        return grad


def softabs_eigenvalue_map(eigenvalues: np.ndarray, alpha: float):
    """lambda * coth(alpha * lambda) and its derivative, with the smooth
    limits 1/alpha and 0 at lambda = 0."""
    lam = np.asarray(eigenvalues, dtype=float)
    x = alpha * lam
    near_zero = np.abs(x) < 1e-4
    x_safe = np.where(near_zero, 1.0, x)
    coth = 1.0 / np.tanh(x_safe)
    value = np.where(near_zero, (1.0 + x * x / 3.0) / alpha, lam * coth)
    deriv = np.where(near_zero, 2.0 * x / 3.0, coth - x_safe * (coth * coth - 1.0))
    return value, deriv


def softabs_metric(hessian: np.ndarray, alpha: float) -> np.ndarray:
    """Eigenvalue-wise smooth absolute value of a symmetric matrix."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    try:
        lam, vectors = np.linalg.eigh(hessian)
    except np.linalg.LinAlgError as exc:
        raise EigendecompositionFailure(str(exc)) from None
    mapped, _ = softabs_eigenvalue_map(lam, alpha)
    return (vectors * mapped) @ vectors.T


def softabs_metric_grad(hessian: np.ndarray, hessian_grad: np.ndarray, alpha: float) -> np.ndarray:
    """Coordinate derivatives of the SoftAbs metric.

    ``hessian_grad`` holds the derivative of the Hessian in each coordinate,
    shape (k, m, m). Uses the divided-difference (Daleckii-Krein) formula for
    the derivative of the eigenvalue-wise map, with the confluent limit
    phi'(lambda) on (near-)equal eigenvalue pairs.
    """
    try:
        lam, vectors = np.linalg.eigh(hessian)
    except np.linalg.LinAlgError as exc:
        raise EigendecompositionFailure(str(exc)) from None
    phi, dphi = softabs_eigenvalue_map(lam, alpha)

    diff = lam[:, None] - lam[None, :]
    scale = np.maximum(np.abs(lam[:, None]), np.abs(lam[None, :]))
    confluent = np.abs(diff) <= 1e-8 * np.maximum(scale, 1e-12)
    _, dphi_mid = softabs_eigenvalue_map(0.5 * (lam[:, None] + lam[None, :]), alpha)
    divided = np.where(
        confluent,
        dphi_mid,
        (phi[:, None] - phi[None, :]) / np.where(confluent, 1.0, diff),
    )

    rotated = np.einsum("ai,kab,bj->kij", vectors, hessian_grad, vectors)
    return np.einsum("ai,kij,bj->kab", vectors, rotated * divided, vectors)


class FunnelModel(TargetModel):
    """Neal's funnel x_i ~ Normal(0, exp(-v)), v ~ Normal(0, 9), sampled
    jointly under the SoftAbs transform of the log-density Hessian."""

    def __init__(self, num_latent=10, softabs_alpha=1e6):
        if softabs_alpha <= 0:
            raise ValueError("softabs_alpha must be positive")
        self.num_latent = int(num_latent)
        self.softabs_alpha = float(softabs_alpha)
        self._v_var = 9.0

    @property
    def dim(self):
        return self.num_latent + 1

    def initial_position(self):
        return np.zeros(self.dim)

    def log_posterior(self, q):
        x, v = q[:-1], q[-1]
        scale = np.exp(v)
        log_x = -0.5 * float(x @ x) * scale + 0.5 * self.num_latent * (v - LOG_2PI)
        log_v = -0.5 * v * v / self._v_var - 0.5 * (LOG_2PI + np.log(self._v_var))
        return log_x + log_v

    def grad_log_posterior(self, q):
        x, v = q[:-1], q[-1]
        scale = np.exp(v)
        grad = np.empty(self.dim)
        grad[:-1] = -x * scale
        grad[-1] = 0.5 * self.num_latent - 0.5 * float(x @ x) * scale - v / self._v_var
        return grad

    def neg_hessian(self, q):
        """Hessian of the negative log density (the SoftAbs input)."""
        x, v = q[:-1], q[-1]
        scale = np.exp(v)
        n = self.num_latent
        hess = np.zeros((self.dim, self.dim))
        hess[np.arange(n), np.arange(n)] = scale
        hess[:-1, -1] = hess[-1, :-1] = x * scale
        hess[-1, -1] = 0.5 * float(x @ x) * scale + 1.0 / self._v_var
        return hess

    def neg_hessian_grad(self, q):
        """Coordinate derivatives of :meth:`neg_hessian`, shape (m, m, m)."""
        x, v = q[:-1], q[-1]
        scale = np.exp(v)
        n = self.num_latent
        grad = np.zeros((self.dim, self.dim, self.dim))
        for j in range(n):
            grad[j, j, -1] = grad[j, -1, j] = scale
            grad[j, -1, -1] = x[j] * scale
        grad[-1, np.arange(n), np.arange(n)] = scale
        grad[-1, :-1, -1] = grad[-1, -1, :-1] = x * scale
        grad[-1, -1, -1] = 0.5 * float(x @ x) * scale
        return grad

    def metric(self, q):
        return softabs_metric(self.neg_hessian(q), self.softabs_alpha)

    def metric_grad(self, q):
        return softabs_metric_grad(self.neg_hessian(q), self.neg_hessian_grad(q), self.softabs_alpha)


def _sigmoid(t):
    out = np.empty_like(t, dtype=float)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    exp_t = np.exp(t[~pos])
    out[~pos] = exp_t / (1.0 + exp_t)
    return out


class LogisticModel(TargetModel):
    """Bayesian logistic regression with standard-normal priors.

    Metric: X^T Lambda X + Id with Lambda_ii = s_i (1 - s_i) for
    s_i = sigmoid(x_i . beta), the Fisher information plus the prior
    precision.
    """

    def __init__(self, design, labels):
        self.design = np.asarray(design, dtype=float)
        self.labels = np.asarray(labels, dtype=float)
        if self.design.ndim != 2 or self.labels.shape != (self.design.shape[0],):
            raise ValueError("design must be (n, k) with one label per row")
        if not np.isin(self.labels, (0.0, 1.0)).all():
            raise ValueError("labels must be binary")
        self._k = self.design.shape[1]

    @property
    def dim(self):
        return self._k

    def initial_position(self):
        return np.zeros(self._k)

    def log_posterior(self, q):
        t = self.design @ q
        # log sigma(t) = -log(1 + exp(-t)); log(1 - sigma(t)) = -log(1 + exp(t))
        log_lik = -float(np.sum(np.logaddexp(0.0, np.where(self.labels == 1.0, -t, t))))
        log_prior = -0.5 * float(q @ q) - 0.5 * self._k * LOG_2PI
        return log_lik + log_prior

    def grad_log_posterior(self, q):
        s = _sigmoid(self.design @ q)
        return self.design.T @ (self.labels - s) - q

    def metric(self, q):
        s = _sigmoid(self.design @ q)
        weights = s * (1.0 - s)
        return (self.design.T * weights) @ self.design + np.eye(self._k)

    def metric_grad(self, q):
        s = _sigmoid(self.design @ q)
        dweights = s * (1.0 - s) * (1.0 - 2.0 * s)
        return np.einsum("i,ij,ia,ib->jab", dweights, self.design, self.design, self.design)


def generate_banana_data(seed, n, true_theta=(0.5, 2.0**-0.5), sigma_y=2.0):
    """Seeded draws y_i ~ Normal(theta_1 + theta_2^2, sigma_y^2)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    t1, t2 = true_theta
    return rng.normal(t1 + t2 * t2, sigma_y, size=n)


def generate_logistic_data(seed, n, k, true_beta=None):
    """Standard-normal features with Bernoulli labels from the model."""
    if n < 1 or k < 1:
        raise ValueError("n and k must be >= 1")
    rng = np.random.default_rng(seed)
    beta = np.zeros(k) if true_beta is None else np.asarray(true_beta, dtype=float)
    design = rng.standard_normal((n, k))
    labels = (rng.random(n) < _sigmoid(design @ beta)).astype(float)
    return design, labels


def load_logistic_csv(path):
    """Read a logistic dataset: header row, one observation per line, label last."""
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    if len(rows) < 2:
        raise ValueError("expected a header row and at least one observation")
    data = np.array([[float(cell) for cell in row] for row in rows[1:]])
    return data[:, :-1], data[:, -1]


class CallCountingModel(TargetModel):
    """Wrapper that counts evaluations of each model operation."""

    def __init__(self, inner: TargetModel):
        self.inner = inner
        self.counts = {"log_posterior": 0, "grad_log_posterior": 0, "metric": 0, "metric_grad": 0}

    constant_metric = False  # force per-call metric evaluation so counts are meaningful

    @property
    def dim(self):
        return self.inner.dim

    def initial_position(self):
        return self.inner.initial_position()

    def log_posterior(self, q):
        self.counts["log_posterior"] += 1
        return self.inner.log_posterior(q)

    def grad_log_posterior(self, q):
        self.counts["grad_log_posterior"] += 1
        return self.inner.grad_log_posterior(q)

    def metric(self, q):
        self.counts["metric"] += 1
        return self.inner.metric(q)

    def metric_grad(self, q):
        self.counts["metric_grad"] += 1
        return self.inner.metric_grad(q)


PAPER_GAUSSIAN_MEAN = np.array([0.5, -1.0])
PAPER_GAUSSIAN_COV = np.array([[1.0, 0.5], [0.5, 2.0]])


def make_model(name: str, **params) -> TargetModel:
    """Build a bundled model by name with experiment-grade defaults."""
    name = name.lower()
    if name == "gaussian":
        return GaussianModel(
            params.get("mean", PAPER_GAUSSIAN_MEAN),
            params.get("covariance", PAPER_GAUSSIAN_COV),
        )
    if name == "banana":
        observations = params.get("observations")
        if observations is None:
            observations = generate_banana_data(
                params.get("data_seed", 0),
                params.get("n", 100),
                sigma_y=params.get("sigma_y", 2.0),
            )
        return BananaModel(
            observations,
            sigma_y=params.get("sigma_y", 2.0),
            sigma_theta=params.get("sigma_theta", 2.0),
        )
    if name == "funnel":
        return FunnelModel(
            num_latent=params.get("num_latent", 10),
            softabs_alpha=params.get("softabs_alpha", 1e6),
        )
    if name == "logistic":
        if "csv" in params:
            design, labels = load_logistic_csv(params["csv"])
        else:
            design, labels = generate_logistic_data(
                params.get("data_seed", 0),
                params.get("n", 100),
                params.get("k", 4),
                params.get("true_beta"),
            )
        return LogisticModel(design, labels)
    raise ValueError(f"unknown model {name!r}; choose from gaussian, banana, funnel, logistic")


MODEL_NAMES = ("gaussian", "banana", "funnel", "logistic")
