"""Single-step maps for the four implicit integrator variants and explicit
leapfrog, plus the driver that chains steps into a trajectory.

The two generalized-leapfrog variants and the two implicit-midpoint variants
realize the same mathematical maps; the (b) variants reorganize the
computation (caching position-invariant quantities, or solving for the
midpoint instead of the endpoint).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import core
from .core import IntegratorConfig, PhasePoint, TargetModel
from .errors import NonConvergence, NonFiniteValue, RmhmcError, TrajectoryError
from .solver import fixed_point


@dataclass(frozen=True)
class StepOutcome:
    """Result of one integrator step.

    ``fixed_point_iterations`` totals the inner-solve iterations of the step;
    ``converged`` is the conjunction of every inner solve's convergence flag.
    """

    point: PhasePoint
    fixed_point_iterations: int
    converged: bool


@dataclass(frozen=True)
class TrajectoryStep:
    """Per-step diagnostic record kept by :func:`integrate`."""

    point: PhasePoint
    energy: float
    fixed_point_iterations: int


@dataclass(frozen=True)
class TrajectoryResult:
    final: StepOutcome
    steps: tuple[TrajectoryStep, ...]


StepFunction = Callable[[TargetModel, PhasePoint, IntegratorConfig], StepOutcome]


def _solve(f, initial, config: IntegratorConfig, stage: str):
    try:
        return fixed_point(
            f,
            initial,
            config.tolerance,
            config.max_fixed_point_iters,
            config.relaxation,
        )
    except (NonConvergence, NonFiniteValue) as exc:
        exc.stage = stage
        raise


def glf_a_step(model: TargetModel, point: PhasePoint, config: IntegratorConfig) -> StepOutcome:
    """Generalized leapfrog, direct form.

    Half-step implicit momentum update, implicit position update, explicit
    half-step momentum update. Each implicit stage re-evaluates the full
    Hamiltonian gradients every iteration.
    """
    eps = config.step_size
    q, p = point.q, point.p

    def momentum_map(p_bar):
        return p - 0.5 * eps * core.grad_q_hamiltonian(model, PhasePoint(q, p_bar))

    half = _solve(momentum_map, p, config, "momentum-half-step")
    p_bar = half.value

    def position_map(q_new):
        v_start = core.grad_p_hamiltonian(model, PhasePoint(q, p_bar))
        v_end = core.grad_p_hamiltonian(model, PhasePoint(q_new, p_bar))
        return q + 0.5 * eps * (v_start + v_end)

    pos = _solve(position_map, q, config, "position-step")
    q_new = pos.value

    p_new = p_bar - 0.5 * eps * core.grad_q_hamiltonian(model, PhasePoint(q_new, p_bar))
    return StepOutcome(
        PhasePoint(q_new, p_new),
        half.iterations + pos.iterations,
        half.converged and pos.converged,
    )


def glf_b_step(model: TargetModel, point: PhasePoint, config: IntegratorConfig) -> StepOutcome:
    """Generalized leapfrog with cached invariants.

    The metric, its derivatives, its inverse, and the position-only part of
    dH/dq are computed once at q before the momentum solve; G^{-1} p-bar is
    computed once before the position solve. Same map as :func:`glf_a_step`.
    """
    eps = config.step_size
    q, p = point.q, point.p

    factor = core.metric_factor(model, q)
    grad_l = model.grad_log_posterior(q)
    if model.constant_metric:
        # dG/dq vanishes: dH/dq has no momentum dependence, so both implicit
        # stages collapse to explicit updates that the solver confirms.
        position_force = -grad_l
        d_metric = None
    else:
        g_inv = factor.inv
        d_metric = model.metric_grad(q)
        position_force = -grad_l + 0.5 * np.einsum("ij,kij->k", g_inv, d_metric)

    def momentum_map(p_bar):
        force = position_force
        if d_metric is not None:
            a = g_inv @ p_bar
            force = force - 0.5 * ((d_metric @ a) @ a)
        return p - 0.5 * eps * force

    half = _solve(momentum_map, p, config, "momentum-half-step")
    p_bar = half.value

    v_start = factor.solve(p_bar)

    def position_map(q_new):
        end_factor = core.metric_factor(model, q_new)
        return q + 0.5 * eps * (v_start + end_factor.solve(p_bar))

    pos = _solve(position_map, q, config, "position-step")
    q_new = pos.value

    p_new = p_bar - 0.5 * eps * core.grad_q_hamiltonian(model, PhasePoint(q_new, p_bar))
    return StepOutcome(
        PhasePoint(q_new, p_new),
        half.iterations + pos.iterations,
        half.converged and pos.converged,
    )


def im_a_step(model: TargetModel, point: PhasePoint, config: IntegratorConfig) -> StepOutcome:
    """Implicit midpoint, endpoint form: one joint solve in 2m variables for
    z' = z + eps * X_H((z' + z) / 2) where X_H is the Hamiltonian vector field."""
    eps = config.step_size
    m = point.dim
    z0 = np.concatenate([point.q, point.p])

    if model.constant_metric:
        # dp/dt reduces to the log-posterior gradient; inline the field to
        # keep the many fixed-point iterations cheap
        scaled_inv = eps * core.metric_factor(model, point.q).inv
        grad_l = model.grad_log_posterior
        q0, p0 = z0[:m], z0[m:]

        def midpoint_map(z):
            mid = 0.5 * (z + z0)
            out = np.empty(2 * m)
            out[:m] = q0 + scaled_inv @ mid[m:]
            out[m:] = p0 + eps * grad_l(mid[:m])
            return out

    else:

        def midpoint_map(z):
            mid = 0.5 * (z + z0)
            dq, dp = core.phase_velocity(model, mid[:m], mid[m:])
            return z0 + eps * np.concatenate([dq, dp])

    result = _solve(midpoint_map, z0, config, "midpoint-step")
    z = result.value
    return StepOutcome(PhasePoint(z[:m], z[m:]), result.iterations, result.converged)


def im_b_step(model: TargetModel, point: PhasePoint, config: IntegratorConfig) -> StepOutcome:
    """Implicit midpoint, midpoint form: implicit half-step Euler to the
    midpoint, then an explicit half-step Euler from it. Same map as
    :func:`im_a_step`."""
    eps = config.step_size
    m = point.dim
    z0 = np.concatenate([point.q, point.p])

    if model.constant_metric:
        half_eps = 0.5 * eps
        scaled_inv = half_eps * core.metric_factor(model, point.q).inv
        grad_l = model.grad_log_posterior
        q0, p0 = z0[:m], z0[m:]

        def half_euler_map(z):
            out = np.empty(2 * m)
            out[:m] = q0 + scaled_inv @ z[m:]
            out[m:] = p0 + half_eps * grad_l(z[:m])
            return out

    else:

        def half_euler_map(z):
            dq, dp = core.phase_velocity(model, z[:m], z[m:])
            return z0 + 0.5 * eps * np.concatenate([dq, dp])

    result = _solve(half_euler_map, z0, config, "midpoint-step")
    z_mid = result.value
    dq, dp = core.phase_velocity(model, z_mid[:m], z_mid[m:])
    z = z_mid + 0.5 * eps * np.concatenate([dq, dp])
    return StepOutcome(PhasePoint(z[:m], z[m:]), result.iterations, result.converged)


def leapfrog_step(model: TargetModel, point: PhasePoint, config: IntegratorConfig) -> StepOutcome:
    """Explicit leapfrog for constant-metric models: half kick, drift, half kick.

    The metric acts as the (fixed) mass matrix; no fixed-point solves occur.
    """
    if not model.constant_metric:
        raise ValueError("leapfrog_step requires a constant-metric model")
    eps = config.step_size
    factor = core.metric_factor(model, point.q)
    p_half = point.p + 0.5 * eps * model.grad_log_posterior(point.q)
    q_new = point.q + eps * factor.solve(p_half)
    p_new = p_half + 0.5 * eps * model.grad_log_posterior(q_new)
    return StepOutcome(PhasePoint(q_new, p_new), 0, True)


class Integrator(str, enum.Enum):
    """Identifiers so the sampler and CLI treat all step maps uniformly."""

    GLF_A = "glf_a"
    GLF_B = "glf_b"
    IM_A = "im_a"
    IM_B = "im_b"
    LEAPFROG = "leapfrog"

    @property
    def step(self) -> StepFunction:
        return _STEP_FUNCTIONS[self]


_STEP_FUNCTIONS: dict[Integrator, StepFunction] = {
    Integrator.GLF_A: glf_a_step,
    Integrator.GLF_B: glf_b_step,
    Integrator.IM_A: im_a_step,
    Integrator.IM_B: im_b_step,
    Integrator.LEAPFROG: leapfrog_step,
}


def integrate(
    model: TargetModel,
    point: PhasePoint,
    config: IntegratorConfig,
    step_fn: StepFunction,
) -> TrajectoryResult:
    """Apply ``step_fn`` for ``config.num_steps`` steps, recording each step.

    Aborts on the first failing step: a non-converged or non-finite step is
    neither integrator, so continuing from a stale point would silently
    change the map. The raised :class:`TrajectoryError` carries the records
    accumulated so far.
    """
    steps: list[TrajectoryStep] = []
    outcome = StepOutcome(point, 0, True)
    for index in range(config.num_steps):
        try:
            # overflow on a diverging trajectory surfaces as NonFiniteValue
            with np.errstate(over="ignore", invalid="ignore"):
                outcome = step_fn(model, outcome.point, config)
                energy = core.hamiltonian(model, outcome.point)
        except RmhmcError as exc:
            raise TrajectoryError(index, exc, steps) from exc
        steps.append(TrajectoryStep(outcome.point, energy, outcome.fixed_point_iterations))
    return TrajectoryResult(outcome, tuple(steps))
