"""Riemannian manifold HMC with implicit midpoint and generalized leapfrog
integrators, plus numerical-fidelity diagnostics and a benchmark CLI."""

from .core import (
    IntegratorConfig,
    PhasePoint,
    TargetModel,
    grad_p_hamiltonian,
    grad_q_hamiltonian,
    hamiltonian,
)
from .diagnostics import (
    FidelityRecord,
    FidelitySummary,
    effective_sample_size,
    energy_error,
    reversibility_violation,
    summarize,
    volume_violation,
)
from .errors import (
    EmptyInput,
    MetricNotPositiveDefinite,
    NonConvergence,
    NonFiniteValue,
    RmhmcError,
    TrajectoryError,
    ZeroVariance,
)
from .integrators import (
    Integrator,
    StepOutcome,
    glf_a_step,
    glf_b_step,
    im_a_step,
    im_b_step,
    integrate,
    leapfrog_step,
)
from .models import (
    BananaModel,
    FunnelModel,
    GaussianModel,
    LogisticModel,
    generate_banana_data,
    generate_logistic_data,
    harmonic_oscillator,
    make_model,
    softabs_metric,
)
from .sampler import ChainConfig, ChainReport, hmc_transition, run_chain, sample_momentum
from .solver import FixedPointResult, fixed_point

__version__ = "0.1.0"
