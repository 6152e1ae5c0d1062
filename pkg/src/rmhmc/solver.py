"""Fixed-point iteration used by every implicitly-defined integrator step.

The loop repeats z'' = f(z'), Delta = max_i |z''_i - z'_i|, z' = z'' while
Delta exceeds the tolerance. A tolerance of zero is accepted: the loop then
terminates only on exact stagnation (Delta == 0) or at the iteration cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonConvergence, NonFiniteValue


@dataclass(frozen=True)
class FixedPointResult:
    value: np.ndarray
    iterations: int
    final_delta: float
    converged: bool


def fixed_point(
    f: Callable[[np.ndarray], np.ndarray],
    initial: np.ndarray,
    tolerance: float,
    max_iters: int,
    relaxation: float = 1.0,
) -> FixedPointResult:
    """Solve z = f(z) by iteration from ``initial``.

    ``relaxation`` below 1 applies the damped update
    z'' = z' + relaxation * (f(z') - z'), which converges on expansive-but-
    oscillatory maps where the plain iteration does not; 1.0 is the plain
    iteration.

    Raises:
        NonConvergence: cap reached with the last update still above
            tolerance; the exception carries the partial result.
        NonFiniteValue: f produced NaN or infinity.
    """
    if tolerance < 0:
        raise ValueError("tolerance must be non-negative")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    z = np.asarray(initial, dtype=float)
    if not np.isfinite(z).all():
        raise NonFiniteValue("initial iterate is not finite")
    delta = np.inf
    # overflow during a diverging solve is expected and surfaces as the
    # NonFiniteValue below, not as a warning
    with np.errstate(over="ignore", invalid="ignore"):
        for iteration in range(1, max_iters + 1):
            z_next = f(z)
            if relaxation != 1.0:
                z_next = z + relaxation * (z_next - z)
            delta = float(np.abs(z_next - z).max())
            # a non-finite component of z_next makes delta inf or nan
            if not math.isfinite(delta):
                raise NonFiniteValue(
                    f"fixed-point map produced non-finite values at iteration {iteration}"
                )
            z = z_next
            if delta <= tolerance:
                return FixedPointResult(z, iteration, delta, True)
    raise NonConvergence(
        f"no convergence in {max_iters} iterations (last delta {delta:.3e})",
        result=FixedPointResult(z, max_iters, delta, False),
    )
