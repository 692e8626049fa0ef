import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from rtn_dephase.errors import ContractViolationError, InvalidStateError
from rtn_dephase.noise_model import (
    MomentKernel,
    NoiseParams,
    conditional_probability,
    cumulant_series_check,
    cumulants_from_moments,
    initial_distribution,
    mean,
    ordered_moment,
    second_moment,
)
from rtn_dephase.spectral import build

STRONG = NoiseParams(eta=1.0, chi=3.0, kappa=1.0, a0=0.5)
WEAK = NoiseParams(eta=1.0, chi=0.8, kappa=2.0, a0=-0.3)


@pytest.mark.parametrize(
    "fields",
    [
        {"eta": 0.0, "chi": 1.0, "kappa": 1.0},
        {"eta": 1.0, "chi": -1.0, "kappa": 1.0},
        {"eta": 1.0, "chi": 1.0, "kappa": 0.0},
        {"eta": 1.0, "chi": 1.0, "kappa": 1.0, "a0": 1.5},
        {"eta": float("nan"), "chi": 1.0, "kappa": 1.0},
    ],
)
def test_invalid_params_rejected(fields):
    """Out-of-range parameters raise a structured validation error."""
    with pytest.raises(ValidationError):
        NoiseParams(**fields)


def test_params_are_frozen():
    """Parameters cannot be mutated in place; replace() gives a new model."""
    with pytest.raises(ValidationError):
        STRONG.chi = 2.0
    moved = STRONG.replace(a0=-0.5)
    assert moved.a0 == -0.5
    assert STRONG.a0 == 0.5


def test_memoryless_constructor():
    """The memoryless limit is kappa=None."""
    p = NoiseParams.memoryless(1.0, 0.8, a0=0.2)
    assert p.is_memoryless
    assert p.kappa is None
    assert not p.is_stationary
    assert p.rate_scale == 1.0


def test_initial_distribution():
    """Initial probabilities are (1 +- a0)/2."""
    assert_allclose(initial_distribution(STRONG), [0.75, 0.25])


@pytest.mark.parametrize("params", [STRONG, WEAK, NoiseParams.memoryless(1.0, 2.0)])
def test_conditional_probability_is_stochastic(params):
    """Columns sum to one and entries stay in [0, 1]."""
    for t, t_prime in [(0.0, 0.0), (1.0, 0.3), (7.5, 2.0), (40.0, 0.0)]:
        p = conditional_probability(params, t, t_prime)
        assert_allclose(p.sum(axis=0), [1.0, 1.0], atol=1e-14)
        assert np.all(p >= -1e-14)
        assert np.all(p <= 1.0 + 1e-14)
    assert_allclose(conditional_probability(params, 2.0, 2.0), np.eye(2), atol=1e-14)


def test_conditional_probability_time_order():
    """t < t' is rejected."""
    with pytest.raises(InvalidStateError):
        conditional_probability(STRONG, 1.0, 2.0)


def test_kernel_initial_conditions_and_decay():
    """Omega(0) = 1, Omega'(0) = 0 and Omega vanishes at long times."""
    for params in (STRONG, WEAK):
        kernel = MomentKernel.from_params(params)
        assert kernel.omega(0.0) == pytest.approx(1.0, abs=1e-14)
        assert kernel.omega_derivative(0.0) == pytest.approx(0.0, abs=1e-13)
        assert abs(kernel.omega(200.0)) < 1e-12


def test_kernel_satisfies_moment_equation():
    """Omega'' + kappa Omega' + 2 eta kappa Omega = 0."""
    kernel = MomentKernel.from_params(STRONG)
    tau = np.linspace(0.1, 8.0, 50)
    h = 1e-5
    second = (kernel.omega_derivative(tau + h) - kernel.omega_derivative(tau - h)) / (
        2 * h
    )
    kappa, eta = STRONG.kappa, STRONG.eta
    residual = second + kappa * kernel.omega_derivative(tau) + 2 * eta * kappa * (
        kernel.omega(tau)
    )
    assert np.max(np.abs(residual)) < 1e-7


def test_memoryless_kernel_is_exponential():
    """Without memory Omega(tau) = exp(-2 eta tau)."""
    kernel = MomentKernel.from_params(NoiseParams.memoryless(1.5, 1.0))
    tau = np.linspace(0.0, 5.0, 11)
    assert_allclose(kernel.omega(tau), np.exp(-3.0 * tau), rtol=1e-14)


def test_critically_damped_kernel_is_continuous():
    """kappa = 8 eta uses the confluent form and matches its neighbours."""
    tau = np.linspace(0.0, 6.0, 61)
    exact = MomentKernel.from_params(NoiseParams(eta=1.0, chi=1.0, kappa=8.0))
    assert exact.powers == (0, 1)
    for kappa in (8.0 * (1 + 1e-6), 8.0 * (1 - 1e-6)):
        near = MomentKernel.from_params(NoiseParams(eta=1.0, chi=1.0, kappa=kappa))
        assert_allclose(near.omega(tau), exact.omega(tau), atol=1e-5)


def test_first_and_second_moments():
    """M1(0) = a0 chi and M2 is symmetric in its arguments."""
    assert mean(STRONG, 0.0) == pytest.approx(1.5)
    assert second_moment(STRONG, 2.0, 0.5) == pytest.approx(
        second_moment(STRONG, 0.5, 2.0)
    )
    assert second_moment(STRONG, 1.0, 1.0) == pytest.approx(9.0)
    with pytest.raises(InvalidStateError):
        mean(STRONG, -1.0)


def test_ordered_moment_factorizes():
    """Odd orders carry the mean, even orders pair up neighbouring times."""
    kernel = MomentKernel.from_params(STRONG)
    chi, a0 = STRONG.chi, STRONG.a0
    assert ordered_moment(STRONG, [1.2]) == pytest.approx(mean(STRONG, 1.2))
    assert ordered_moment(STRONG, [2.0, 0.5]) == pytest.approx(
        chi**2 * kernel.omega(1.5)
    )
    assert ordered_moment(STRONG, [3.0, 2.0, 0.5]) == pytest.approx(
        chi**2 * kernel.omega(1.0) * a0 * chi * kernel.omega(0.5)
    )
    assert ordered_moment(STRONG, [1.0] * 4) == pytest.approx(chi**4)


def test_ordered_moment_rejects_increasing_times():
    """Times must be non-increasing."""
    with pytest.raises(InvalidStateError):
        ordered_moment(STRONG, [0.5, 2.0])
    with pytest.raises(InvalidStateError):
        ordered_moment(STRONG, [])


def test_cumulants_from_moments():
    """Low-order moment to cumulant recursion."""
    m1, m2, m3 = 0.7, 1.3, 2.1
    k = cumulants_from_moments([m1, m2, m3])
    assert_allclose(
        k, [m1, m2 - m1**2, m3 - 3 * m1 * m2 + 2 * m1**3], rtol=1e-14, atol=1e-15
    )


@pytest.mark.parametrize("params", [STRONG, WEAK])
def test_cumulant_series_matches_exact_at_short_times(params):
    """Fourth-order cumulant expansion tracks the exact D(t) at short times."""
    df = build(params)
    for t in (0.01, 0.03, 0.05):
        approx = cumulant_series_check(params, t, 4)
        assert abs(approx - df(t)) < 5e-6


def test_cumulant_order_guard():
    """Orders above the guard are refused."""
    with pytest.raises(ContractViolationError):
        cumulant_series_check(STRONG, 0.1, 5)
    assert cumulant_series_check(STRONG, 0.0, 2) == 1.0


if __name__ == "__main__":
    pytest.main([__file__])
