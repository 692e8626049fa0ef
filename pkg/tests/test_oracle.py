import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError
from scipy.optimize import brentq

from rtn_dephase.errors import (
    CoherenceZeroError,
    ContractViolationError,
    InvalidStateError,
)
from rtn_dephase.noise_model import MomentKernel, NoiseParams, mean
from rtn_dephase.oracle import (
    OdeConfig,
    convergence_ratio,
    finite_difference_rates,
    integrate,
    integrate_moment,
    integrate_third_order,
    integrate_third_order_batch,
    max_error,
    peak_revival_sum,
)
from rtn_dephase.single_qubit import (
    SingleQubitState,
    non_markovianity_pair,
    non_markovianity_single,
)
from rtn_dephase.spectral import build, rates

STRONG = NoiseParams(eta=1.0, chi=3.0, kappa=1.0, a0=0.5)
WEAK = NoiseParams(eta=1.0, chi=0.8, kappa=2.0, a0=-0.3)
FINE = OdeConfig(step=0.002, horizon=10.0, record_every=10)


def test_ode_config_validation():
    """Steps coarser than horizon/100 are refused."""
    with pytest.raises(ValidationError):
        OdeConfig(step=0.2, horizon=10.0)
    with pytest.raises(ValidationError):
        OdeConfig(step=-0.01, horizon=10.0)
    with pytest.raises(ValidationError):
        OdeConfig(step=0.01, horizon=10.0, method="euler")


def test_ode_config_grid():
    """The actual step divides the horizon exactly."""
    cfg = OdeConfig(step=0.003, horizon=1.0)
    assert cfg.n_steps == 334
    assert cfg.dt * cfg.n_steps == pytest.approx(1.0)
    half = cfg.halved()
    assert half.n_steps == 2 * cfg.n_steps
    assert half.record_every == 2


def test_rk4_exponential_decay():
    """y' = -y reaches exp(-1) at t = 1 with fourth-order accuracy."""
    cfg = OdeConfig(step=0.01, horizon=1.0, record_every=10)
    traj = integrate(lambda _t, y: -y, np.array([1.0]), cfg)
    assert traj.t.size == 11
    assert traj.t[-1] == pytest.approx(1.0)
    assert abs(traj.values[-1, 0] - np.exp(-1.0)) < 1e-9


@pytest.mark.parametrize("params", [STRONG, WEAK])
def test_third_order_equation_matches_closed_form(params):
    """The RK4 matrix trajectory reproduces rho_coh(0) D(t)."""
    state0 = SingleQubitState.maximally_coherent()
    traj = integrate_third_order(params, state0, FINE)
    df = build(params)
    assert_allclose(traj.coherence() / state0.coherence, df(traj.t), atol=1e-6)
    assert_allclose(traj.values[:, 0, 0], 0.5, atol=1e-12)
    states = traj.states()
    assert len(states) == traj.t.size
    assert states[-1].coherence == pytest.approx(traj.coherence()[-1])


def test_third_order_requires_memory():
    """The memoryless limit has no third-order equation."""
    state0 = SingleQubitState.maximally_coherent()
    memoryless = NoiseParams.memoryless(1.0, 0.8)
    with pytest.raises(ContractViolationError):
        integrate_third_order(memoryless, state0, FINE)
    with pytest.raises(ContractViolationError):
        integrate_third_order_batch([STRONG, memoryless], state0, FINE)


def test_batch_matches_single_runs():
    """The scalar batch reproduces the matrix integration column by column."""
    state0 = SingleQubitState.from_ket([0.6, 0.8])
    batch = integrate_third_order_batch([STRONG, WEAK], state0, FINE)
    assert batch.values.shape == (batch.t.size, 2)
    for k, params in enumerate((STRONG, WEAK)):
        single = integrate_third_order(params, state0, FINE)
        assert_allclose(batch.values[:, k], single.coherence(), atol=1e-10)


@pytest.mark.parametrize("params", [STRONG, WEAK, NoiseParams.memoryless(1.5, 2.0)])
def test_moment_equation_matches_kernel(params):
    """M2 at lag tau is chi^2 Omega(tau) and M1(t) is the mean."""
    kernel = MomentKernel.from_params(params)
    second = integrate_moment(params, FINE, order=2)
    assert_allclose(second.values, params.chi**2 * kernel.omega(second.t), atol=1e-9)
    first = integrate_moment(params, FINE, order=1)
    assert_allclose(first.values, [mean(params, t) for t in first.t], atol=1e-9)


def test_moment_order_guard():
    """Only first and second moments have an oracle."""
    with pytest.raises(InvalidStateError):
        integrate_moment(STRONG, FINE, order=3)


@pytest.mark.parametrize("t", [0.0, 0.3, 1.3, 4.0])
def test_finite_difference_rates(t):
    """Differenced log D agrees with the analytic rates."""
    df = build(STRONG)
    phi, gamma = rates(df, t)
    fd_phi, fd_gamma = finite_difference_rates(df, t)
    assert fd_phi == pytest.approx(phi, abs=1e-6)
    assert fd_gamma == pytest.approx(gamma, abs=1e-6)


def test_finite_difference_rates_at_zero_crossing():
    """A node on a zero of D raises CoherenceZeroError."""
    df = build(STRONG.replace(a0=0.0))
    t = np.linspace(0.0, 10.0, 2001)
    values = np.real(df(t))
    k = int(np.flatnonzero(np.sign(values[:-1]) != np.sign(values[1:]))[0])
    t0 = brentq(lambda x: df(x).real, t[k], t[k + 1], xtol=1e-16)
    with pytest.raises(CoherenceZeroError):
        finite_difference_rates(df, t0)
    with pytest.raises(InvalidStateError):
        finite_difference_rates(df, -1.0)


def test_peak_revival_sum_matches_breakpoint_scan():
    """Sampled revivals reproduce N_S and N_T on a dense grid."""
    df = build(STRONG)
    grid = np.linspace(0.0, 400.0, 200001)
    squared = np.abs(df(grid)) ** 2
    n_s, n_t = non_markovianity_pair(df, horizon=400.0)
    assert peak_revival_sum(squared, 1) == pytest.approx(n_s, rel=1e-4)
    assert peak_revival_sum(squared, 2) == pytest.approx(n_t, rel=1e-4)
    assert n_s == pytest.approx(non_markovianity_single(df, horizon=400.0))


def test_peak_revival_sum_on_rk4_trajectory():
    """Peaks of the integrated third-order equation give N_S and N_T."""
    state0 = SingleQubitState.maximally_coherent()
    cfg = OdeConfig(step=1e-3, horizon=60.0, record_every=2)
    traj = integrate_third_order_batch([STRONG], state0, cfg)
    squared = np.abs(traj.values[:, 0] / state0.coherence) ** 2
    n_s, n_t = non_markovianity_pair(build(STRONG), horizon=60.0, tol=1e-2)
    assert n_s > 1.0
    assert peak_revival_sum(squared, 1) == pytest.approx(n_s, rel=1e-4)
    assert peak_revival_sum(squared, 2) == pytest.approx(n_t, rel=1e-4)


def test_peak_revival_sum_degenerate_input():
    """Fewer than two samples carry no revival."""
    assert peak_revival_sum([]) == 0.0
    assert peak_revival_sum([0.3]) == 0.0
    assert peak_revival_sum(np.linspace(1.0, 0.0, 10)) == 0.0


def test_rk4_error_and_order():
    """Error is small at the oracle step and drops ~16x per halving."""
    assert max_error(STRONG, OdeConfig(step=0.002, horizon=20.0)) < 1e-6
    ratio = convergence_ratio(STRONG, OdeConfig(step=0.02, horizon=20.0))
    assert 12.0 <= ratio <= 20.0


if __name__ == "__main__":
    pytest.main([__file__])
