"""Phase-space state, the target-model interface, and Hamiltonian derivatives.

The Hamiltonian evaluated here is

    H(q, p) = -L(q) + 1/2 p^T G^{-1}(q) p + 1/2 log det G(q)

where L is the log-posterior and G the position-dependent metric. All
linear algebra with G goes through a single Cholesky factorization per
position; the log-determinant is accumulated from the factor's diagonal,
never from an explicit determinant expansion.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .errors import MetricNotPositiveDefinite, NonFiniteValue


@dataclass(frozen=True)
class PhasePoint:
    """Position/momentum pair the dynamics acts on."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if q.shape != p.shape or q.ndim != 1 or q.size < 1:
            raise ValueError(f"q and p must be equal-length vectors, got {q.shape} and {p.shape}")
        if not (np.isfinite(q).all() and np.isfinite(p).all()):
            raise NonFiniteValue("phase point has non-finite components")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def dim(self) -> int:
        return self.q.size

    def with_negated_momentum(self) -> "PhasePoint":
        return PhasePoint(self.q, -self.p)


@dataclass(frozen=True)
class IntegratorConfig:
    """Step size, step count, and fixed-point solver settings for one trajectory.

    ``relaxation`` damps the fixed-point update (Krasnoselskii iteration):
    z <- z + relaxation * (f(z) - z). The default 1.0 is the undamped
    iteration; values below 1 extend convergence to step sizes where the
    undamped map is expansive (needed only for very large steps on
    oscillatory systems).
    """

    step_size: float
    num_steps: int
    tolerance: float = 1e-6
    max_fixed_point_iters: int = 1000
    relaxation: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.step_size):
            raise ValueError("step_size must be finite")
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        if self.tolerance < 0:
            raise ValueError("tolerance must be non-negative")
        if self.max_fixed_point_iters < 1:
            raise ValueError("max_fixed_point_iters must be >= 1")
        if not 0 < self.relaxation <= 1:
            raise ValueError("relaxation must lie in (0, 1]")


def require_spd(matrix: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
    """Validate symmetry and positive definiteness; returns the input."""
    matrix = np.asarray(matrix, dtype=float)
    scale = np.abs(matrix).max() or 1.0
    if np.abs(matrix - matrix.T).max() > rel_tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    try:
        np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError as exc:
        raise MetricNotPositiveDefinite(str(exc)) from None
    return matrix


class TargetModel(ABC):
    """Log-posterior, gradient, metric, and metric derivatives of one target.

    Implementations must be immutable after construction. ``constant_metric``
    marks models whose metric does not depend on position; their factorization
    is computed once and reused, and the metric-derivative terms of the
    equations of motion are skipped (they are identically zero).
    """

    constant_metric = False

    @property
    @abstractmethod
    def dim(self) -> int:
        """Dimension of the position space."""

    @abstractmethod
    def log_posterior(self, q: np.ndarray) -> float:
        """Log of the unnormalized posterior density at q."""

    @abstractmethod
    def grad_log_posterior(self, q: np.ndarray) -> np.ndarray:
        """Gradient of the log-posterior at q."""

    @abstractmethod
    def metric(self, q: np.ndarray) -> np.ndarray:
        """Positive-definite metric at q, shape (dim, dim)."""

    @abstractmethod
    def metric_grad(self, q: np.ndarray) -> np.ndarray:
        """Coordinate-wise metric derivatives, shape (dim, dim, dim).

        Entry [i] is the symmetric matrix of partial derivatives of the
        metric with respect to the i-th position coordinate.
        """


class MetricFactor:
    """Cholesky factorization of a metric, with lazily-materialized inverse."""

    __slots__ = ("chol", "_inv")

    def __init__(self, metric: np.ndarray):
        try:
            self.chol = np.linalg.cholesky(metric)
        except np.linalg.LinAlgError as exc:
            raise MetricNotPositiveDefinite(str(exc)) from None
        self._inv = None

    @property
    def log_det(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    @property
    def inv(self) -> np.ndarray:
        if self._inv is None:
            identity = np.eye(self.chol.shape[0])
            self._inv = cho_solve((self.chol, True), identity, check_finite=False)
        return self._inv

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self._inv is not None:
            return self._inv @ b
        return cho_solve((self.chol, True), b, check_finite=False)

    def upper_factor(self) -> np.ndarray:
        """Upper-triangular C with C^T C equal to the metric."""
        return self.chol.T

    def sample_momentum(self, rng: np.random.Generator) -> np.ndarray:
        xi = rng.standard_normal(self.chol.shape[0])
        return self.chol @ xi


def metric_factor(model: TargetModel, q: np.ndarray) -> MetricFactor:
    """Factorize the model metric at q, caching the factor for constant metrics."""
    if model.constant_metric:
        cached = getattr(model, "_metric_factor", None)
        if cached is None:
            cached = MetricFactor(model.metric(q))
            cached.inv  # materialize once so every reuse solves by matmul
            # immutable-after-construction caveat: this cache is write-once
            model.__dict__["_metric_factor"] = cached
        return cached
    return MetricFactor(model.metric(q))


def hamiltonian(model: TargetModel, point: PhasePoint) -> float:
    """Total energy -L(q) + 1/2 p^T G^{-1} p + 1/2 log det G."""
    factor = metric_factor(model, point.q)
    half_quad = 0.5 * float(point.p @ factor.solve(point.p))
    value = -float(model.log_posterior(point.q)) + half_quad + 0.5 * factor.log_det
    if not np.isfinite(value):
        raise NonFiniteValue(f"Hamiltonian is not finite at q={point.q}")
    return value


def grad_p_hamiltonian(model: TargetModel, point: PhasePoint) -> np.ndarray:
    """Position velocity G^{-1}(q) p."""
    return metric_factor(model, point.q).solve(point.p)


def grad_q_hamiltonian(model: TargetModel, point: PhasePoint) -> np.ndarray:
    """Position gradient of H; callers negate to obtain the momentum velocity."""
    return _grad_q(model, point.q, point.p, metric_factor(model, point.q))


def _grad_q(model: TargetModel, q: np.ndarray, p: np.ndarray, factor: MetricFactor) -> np.ndarray:
    grad_l = model.grad_log_posterior(q)
    if model.constant_metric:
        return -grad_l
    g_inv = factor.inv
    d_metric = model.metric_grad(q)
    a = g_inv @ p
    k, m = d_metric.shape[0], q.size
    # tr(G^{-1} dG_k) and a^T dG_k a for each coordinate k
    trace_term = 0.5 * (d_metric.reshape(k, m * m) @ g_inv.ravel())
    quad_term = 0.5 * ((d_metric @ a) @ a)
    return -grad_l + trace_term - quad_term


def phase_velocity(model: TargetModel, q: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(dq/dt, dp/dt) sharing one metric factorization.

    dq/dt = G^{-1} p and dp/dt = -dH/dq, the equations of motion.
    """
    factor = metric_factor(model, q)
    dq = factor.solve(p)
    dp = -_grad_q(model, q, p, factor)
    return dq, dp
