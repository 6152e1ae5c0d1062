"""Metropolis-corrected HMC transitions built from any integrator step map.

Each transition refreshes momentum from Normal(0, G(q)), integrates for L
steps, applies the momentum flip to form the proposal, and accepts with
probability min{1, exp(H(q, p) - H(q', p'))}. A transition whose inner
fixed-point solve fails is treated as a rejected proposal: the realized
kernel stays a valid Metropolis kernel with a conservative proposal.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import core
from .core import IntegratorConfig, PhasePoint, TargetModel
from .errors import NonConvergence, NonFiniteValue, MetricNotPositiveDefinite, TrajectoryError
from .integrators import Integrator, StepOutcome


@dataclass(frozen=True)
class ChainConfig:
    num_samples: int
    integrator: Integrator
    integrator_config: IntegratorConfig
    seed: int
    burn_in: int = 0

    def __post_init__(self):
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")


@dataclass(frozen=True)
class ChainReport:
    samples: np.ndarray
    acceptance_rate: float
    rejected_for_nonconvergence: int
    wall_time: float
    seed: int


@dataclass(frozen=True)
class TransitionInfo:
    accepted: bool
    nonconvergent: bool
    energy_change: float
    fixed_point_iterations: int


_PROPOSAL_FAILURES = (NonConvergence, NonFiniteValue, MetricNotPositiveDefinite, TrajectoryError)


def sample_momentum(model: TargetModel, q: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw p ~ Normal(0, G(q)) through the metric's Cholesky factor."""
    return core.metric_factor(model, q).sample_momentum(rng)


def hmc_transition(
    model: TargetModel,
    q: np.ndarray,
    integrator: Integrator,
    config: IntegratorConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, TransitionInfo]:
    """One Metropolis-corrected HMC transition from q.

    Model failures at the initial point propagate; failures anywhere
    downstream (solver divergence, non-finite proposals) reject. Returns the
    (possibly unchanged) position and per-transition diagnostics.
    """
    p = sample_momentum(model, q, rng)
    start = PhasePoint(q, p)
    energy_start = core.hamiltonian(model, start)
    # log-uniform drawn unconditionally so the RNG stream does not depend on
    # whether the proposal failed
    log_u = np.log(rng.random())
    step_fn = integrator.step
    iterations = 0
    try:
        point = start
        for _ in range(config.num_steps):
            outcome: StepOutcome = step_fn(model, point, config)
            point = outcome.point
            iterations += outcome.fixed_point_iterations
        proposal = point.with_negated_momentum()
        energy_end = core.hamiltonian(model, proposal)
    except _PROPOSAL_FAILURES:
        return q, TransitionInfo(False, True, np.inf, iterations)
    log_ratio = energy_start - energy_end
    if log_u < log_ratio:
        return proposal.q, TransitionInfo(True, False, -log_ratio, iterations)
    return q, TransitionInfo(False, False, -log_ratio, iterations)


def run_chain(model: TargetModel, initial_q: np.ndarray, config: ChainConfig) -> ChainReport:
    """Run burn-in plus sampling transitions; deterministic for a fixed seed.

    The RNG is a PCG64 generator seeded from ``config.seed``; concurrent
    chains should derive their seeds by spawning one SeedSequence child per
    chain (see the CLI).
    """
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    q = np.asarray(initial_q, dtype=float).copy()
    core.hamiltonian(model, PhasePoint(q, np.zeros(model.dim)))  # fail fast off-support
    samples = np.empty((config.num_samples, model.dim))
    accepted = 0
    nonconvergent = 0
    start_time = time.perf_counter()
    for i in range(config.burn_in + config.num_samples):
        q, info = hmc_transition(model, q, config.integrator, config.integrator_config, rng)
        if i >= config.burn_in:
            samples[i - config.burn_in] = q
            accepted += info.accepted
            nonconvergent += info.nonconvergent
    wall_time = time.perf_counter() - start_time
    return ChainReport(
        samples=samples,
        acceptance_rate=accepted / config.num_samples,
        rejected_for_nonconvergence=nonconvergent,
        wall_time=wall_time,
        seed=config.seed,
    )
