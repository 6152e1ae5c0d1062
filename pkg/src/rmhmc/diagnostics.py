"""Numerical-fidelity metrics for integrators and effective sample size.

Reversibility: distance between a state and its image under
integrate-flip-integrate-flip. Volume preservation: deviation of the
finite-difference Jacobian determinant of the integration map from one.
Energy error: Hamiltonian drift over one trajectory. A probe whose
integration fails reports an infinite violation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import core
from .core import IntegratorConfig, PhasePoint, TargetModel
from .errors import EmptyInput, RmhmcError, ZeroVariance
from .integrators import Integrator
from .sampler import sample_momentum

DEFAULT_FD_STEP = 1e-5


def _apply_trajectory(model, integrator: Integrator, config: IntegratorConfig, point: PhasePoint) -> PhasePoint:
    step_fn = integrator.step
    for _ in range(config.num_steps):
        point = step_fn(model, point, config).point
    return point


def reversibility_violation(
    model: TargetModel,
    integrator: Integrator,
    config: IntegratorConfig,
    q: np.ndarray,
    rng: np.random.Generator,
) -> float:
    """Euclidean distance from (q, p) to its integrate-flip-integrate-flip image.

    Returns inf when either integration leg fails.
    """
    p = sample_momentum(model, q, rng)
    try:
        forward = _apply_trajectory(model, integrator, config, PhasePoint(q, p))
        back = _apply_trajectory(model, integrator, config, forward.with_negated_momentum())
    except RmhmcError:
        return math.inf
    returned = back.with_negated_momentum()
    return float(np.sqrt(np.sum((q - returned.q) ** 2) + np.sum((p - returned.p) ** 2)))


def jacobian_determinant(
    phi: Callable[[np.ndarray], np.ndarray],
    z: np.ndarray,
    fd_step: float,
) -> float:
    """Determinant of the central-difference Jacobian of phi at z."""
    dim = z.size
    jac = np.empty((dim, dim))
    for j in range(dim):
        shift = np.zeros(dim)
        shift[j] = 0.5 * fd_step
        jac[:, j] = (phi(z + shift) - phi(z - shift)) / fd_step
    return float(np.linalg.det(jac))


def volume_violation(
    model: TargetModel,
    integrator: Integrator,
    config: IntegratorConfig,
    q: np.ndarray,
    rng: np.random.Generator,
    fd_step: float = DEFAULT_FD_STEP,
) -> float:
    """|det F - 1| for the finite-difference Jacobian F of the integration map.

    Returns inf when integration fails at any perturbed point.
    """
    if fd_step <= 0:
        raise ValueError("fd_step must be positive")
    p = sample_momentum(model, q, rng)
    m = q.size

    def phi(z):
        end = _apply_trajectory(model, integrator, config, PhasePoint(z[:m], z[m:]))
        return np.concatenate([end.q, end.p])

    try:
        det = jacobian_determinant(phi, np.concatenate([q, p]), fd_step)
    except RmhmcError:
        return math.inf
    return abs(det - 1.0)


def energy_error(
    model: TargetModel,
    integrator: Integrator,
    config: IntegratorConfig,
    q: np.ndarray,
    rng: np.random.Generator,
) -> float:
    """|H(start) - H(end)| over one trajectory; inf when integration fails."""
    p = sample_momentum(model, q, rng)
    start = PhasePoint(q, p)
    try:
        initial = core.hamiltonian(model, start)
        end = _apply_trajectory(model, integrator, config, start)
        terminal = core.hamiltonian(model, end)
    except RmhmcError:
        return math.inf
    return abs(initial - terminal)


@dataclass(frozen=True)
class FidelityRecord:
    reversibility_violation: float
    volume_violation: float
    energy_error: float
    probe_index: int


@dataclass(frozen=True)
class FidelitySummary:
    reversibility: tuple[float, float, float]
    volume: tuple[float, float, float]
    energy: tuple[float, float, float]
    count: int


def run_fidelity_probes(
    model: TargetModel,
    integrator: Integrator,
    config: IntegratorConfig,
    positions: Sequence[np.ndarray],
    rng: np.random.Generator,
    fd_step: float = DEFAULT_FD_STEP,
) -> list[FidelityRecord]:
    """Evaluate all three fidelity metrics at each probe position."""
    records = []
    for index, q in enumerate(positions):
        records.append(
            FidelityRecord(
                reversibility_violation=reversibility_violation(model, integrator, config, q, rng),
                volume_violation=volume_violation(model, integrator, config, q, rng, fd_step),
                energy_error=energy_error(model, integrator, config, q, rng),
                probe_index=index,
            )
        )
    return records


def _percentiles(values):
    # failed probes carry infinite violations; interpolating between two
    # infinities is fine to report as inf
    with np.errstate(invalid="ignore"):
        result = np.percentile(np.asarray(values, dtype=float), [10.0, 50.0, 90.0])
    # interpolating between two infinite order statistics yields nan
    return tuple(math.inf if math.isnan(x) else float(x) for x in result)


def summarize(records: Sequence[FidelityRecord]) -> FidelitySummary:
    """10th/50th/90th percentiles (linear interpolation between closest ranks)."""
    if not records:
        raise EmptyInput("no fidelity records to summarize")
    return FidelitySummary(
        reversibility=_percentiles([r.reversibility_violation for r in records]),
        volume=_percentiles([r.volume_violation for r in records]),
        energy=_percentiles([r.energy_error for r in records]),
        count=len(records),
    )


def _autocorrelation(x: np.ndarray) -> np.ndarray:
    n = x.size
    centered = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    transform = np.fft.rfft(centered, size)
    acov = np.fft.irfft(transform * np.conj(transform), size)[:n]
    return acov / acov[0]


def effective_sample_size(samples: np.ndarray) -> np.ndarray:
    """Per-coordinate ESS n / (1 + 2 sum rho_k), truncated by Geyer's initial
    positive-sequence rule on consecutive-pair autocorrelation sums, clamped
    to [1, n]."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    n = samples.shape[0]
    if n < 4:
        raise ValueError("effective_sample_size requires at least 4 draws")
    out = np.empty(samples.shape[1])
    for j in range(samples.shape[1]):
        column = samples[:, j]
        if np.var(column) == 0.0:
            raise ZeroVariance(f"coordinate {j} is constant")
        rho = _autocorrelation(column)
        # pair sums Gamma_t = rho_{2t} + rho_{2t+1}; Gamma_0 includes rho_0 = 1
        tau = -1.0
        for t in range(n // 2):
            gamma = rho[2 * t] + (rho[2 * t + 1] if 2 * t + 1 < n else 0.0)
            if gamma <= 0.0:
                break
            tau += 2.0 * gamma
        out[j] = min(max(n / tau, 1.0), float(n))
    return out
