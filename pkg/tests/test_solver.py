import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmhmc.errors import NonConvergence, NonFiniteValue
from rmhmc.solver import fixed_point


def test_halving_map_converges():
    result = fixed_point(lambda z: z / 2, np.array([1.0]), 1e-6, 100)
    assert result.converged
    assert result.value[0] <= 2e-6
    # the update after k applications is 2^-k; the first k with 2^-k <= 1e-6 is 20
    assert result.iterations == 20
    assert result.final_delta <= 1e-6


def test_constant_map_stagnates_in_two_iterations():
    result = fixed_point(lambda z: np.array([3.5]), np.array([0.0]), 1e-12, 100)
    assert result.converged
    assert result.value[0] == 3.5
    assert result.iterations == 2


def test_expansive_map_fails():
    with pytest.raises((NonConvergence, NonFiniteValue)):
        fixed_point(lambda z: 2 * z, np.array([1.0]), 1e-6, 50)


def test_nonconvergence_carries_partial_result():
    with pytest.raises(NonConvergence) as excinfo:
        fixed_point(lambda z: z + 1e-3, np.array([0.0]), 1e-6, 10)
    partial = excinfo.value.result
    assert partial is not None
    assert not partial.converged
    assert partial.iterations == 10
    assert partial.final_delta == pytest.approx(1e-3)


def test_zero_tolerance_terminates_on_exact_stagnation():
    result = fixed_point(lambda z: np.maximum(z / 2, 0.0), np.zeros(1), 0.0, 100)
    assert result.converged
    assert result.final_delta == 0.0


def test_at_least_one_application_occurs():
    calls = []

    def f(z):
        calls.append(1)
        return z

    result = fixed_point(f, np.array([1.0]), 1e-6, 100)
    assert len(calls) >= 1
    assert result.iterations == 1


def test_non_finite_initial_rejected():
    with pytest.raises(NonFiniteValue):
        fixed_point(lambda z: z, np.array([np.nan]), 1e-6, 10)


def test_nan_producing_map_rejected():
    with pytest.raises(NonFiniteValue):
        fixed_point(lambda z: z * np.nan, np.array([1.0]), 1e-6, 10)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        fixed_point(lambda z: z, np.array([1.0]), -1e-6, 10)
    with pytest.raises(ValueError):
        fixed_point(lambda z: z, np.array([1.0]), 1e-6, 0)


@pytest.mark.parametrize("rate", [0.1, 0.5, 0.9])
def test_linear_contraction_residual_bound(rate):
    target = np.array([2.0, -1.0])
    tol = 1e-8

    def f(z):
        return target + rate * (z - target)

    result = fixed_point(f, np.zeros(2), tol, 10_000)
    assert result.converged
    residual = np.abs(result.value - f(result.value)).max()
    assert residual <= tol / (1 - rate) * rate + 1e-15


@given(
    st.lists(st.floats(-100, 100), min_size=1, max_size=5),
    st.floats(0.05, 0.95),
)
@settings(max_examples=50, deadline=None)
def test_deterministic_and_convergent_on_contractions(initial, rate):
    initial = np.array(initial)

    def f(z):
        return rate * z

    first = fixed_point(f, initial, 1e-9, 10_000)
    second = fixed_point(f, initial, 1e-9, 10_000)
    assert first.converged and second.converged
    assert first.iterations == second.iterations
    np.testing.assert_array_equal(first.value, second.value)


def test_relaxation_matches_plain_iteration_at_one():
    f = lambda z: 0.5 * z + 1.0
    plain = fixed_point(f, np.zeros(1), 1e-10, 1000)
    relaxed = fixed_point(f, np.zeros(1), 1e-10, 1000, relaxation=1.0)
    np.testing.assert_array_equal(plain.value, relaxed.value)
    assert plain.iterations == relaxed.iterations


def test_relaxation_converges_where_plain_oscillation_diverges():
    # z -> -3z + 4 has the fixed point 1 but spectral radius 3; the damped
    # update with weight 1/4 contracts toward it
    f = lambda z: -3.0 * z + 4.0
    with pytest.raises((NonConvergence, NonFiniteValue)):
        fixed_point(f, np.zeros(1), 1e-8, 100)
    result = fixed_point(f, np.zeros(1), 1e-8, 10_000, relaxation=0.25)
    assert result.converged
    assert result.value[0] == pytest.approx(1.0, abs=1e-6)
