"""Independent numerical ground truth for the closed forms.

Fixed-step RK4 integration of the third-order equation for the reduced
density matrix,

    rho''' = -kappa (rho'' + 2 eta rho') - (chi^2/4) [sz, [sz, rho' + kappa rho]],

and of the moment equation M'' = -kappa M' - 2 eta kappa M, plus
finite-difference rates and a peak/trough revival sum for sampled curves.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.signal import find_peaks

from .errors import CoherenceZeroError, ContractViolationError, InvalidStateError
from .noise_model import NoiseParams
from .single_qubit import SIGMA_Z, SingleQubitState
from .spectral import DecoherenceFunction, build

logger = logging.getLogger(__name__)

MIN_STEPS = 100
FD_FLOOR = 1e-10


class OdeConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    step: float = Field(gt=0, allow_inf_nan=False)
    horizon: float = Field(gt=0, allow_inf_nan=False)
    method: Literal["rk4"] = "rk4"
    record_every: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _enough_steps(self) -> "OdeConfig":
        if self.step > self.horizon / MIN_STEPS:
            raise ValueError(
                f"step {self.step} exceeds horizon/{MIN_STEPS} "
                f"= {self.horizon / MIN_STEPS}"
            )
        return self

    @property
    def n_steps(self) -> int:
        return int(np.ceil(self.horizon / self.step - 1e-9))

    @property
    def dt(self) -> float:
        """Actual step, adjusted so the grid ends exactly at the horizon."""
        return self.horizon / self.n_steps

    def halved(self) -> "OdeConfig":
        return self.model_copy(
            update={"step": self.dt / 2, "record_every": 2 * self.record_every}
        )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded times and values; ``values[k]`` is the state at ``t[k]``."""

    t: np.ndarray
    values: np.ndarray

    def coherence(self) -> np.ndarray:
        """The element that evolves as D(t) for matrix trajectories."""
        return self.values[:, 1, 0]

    def states(self) -> List[SingleQubitState]:
        """Matrix trajectories as validated states."""
        return [SingleQubitState(m) for m in self.values]


def rk4_step(f: Callable, y: np.ndarray, t: float, h: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(f: Callable, y0: np.ndarray, cfg: OdeConfig) -> Trajectory:
    h, n, every = cfg.dt, cfg.n_steps, cfg.record_every
    y = np.array(y0, dtype=complex)
    times, values = [0.0], [y.copy()]
    for k in range(n):
        y = rk4_step(f, y, k * h, h)
        if (k + 1) % every == 0 or k + 1 == n:
            times.append((k + 1) * h)
            values.append(y.copy())
    return Trajectory(np.asarray(times), np.asarray(values))


def _double_commutator(x: np.ndarray) -> np.ndarray:
    comm = SIGMA_Z @ x - x @ SIGMA_Z
    return SIGMA_Z @ comm - comm @ SIGMA_Z


def _require_memory(params: NoiseParams) -> None:
    if params.is_memoryless:
        raise ContractViolationError("third-order equation needs a finite kappa")


def integrate_third_order(
    params: NoiseParams, state0: SingleQubitState, cfg: OdeConfig
) -> Trajectory:
    """rho(t) from the third-order equation, stacked as (rho, rho', rho'')."""
    _require_memory(params)
    eta, chi, kappa, a0 = params.eta, params.chi, params.kappa, params.a0
    rho0 = state0.matrix
    comm0 = SIGMA_Z @ rho0 - rho0 @ SIGMA_Z
    # +i sign: makes the [1, 0] element start as 1 + i a0 chi t
    y0 = np.stack(
        [rho0, 0.5j * a0 * chi * comm0, -0.25 * chi**2 * _double_commutator(rho0)]
    )

    def rhs(_t: float, y: np.ndarray) -> np.ndarray:
        rho, d1, d2 = y
        d3 = -kappa * (d2 + 2.0 * eta * d1) - 0.25 * chi**2 * _double_commutator(
            d1 + kappa * rho
        )
        return np.stack([d1, d2, d3])

    traj = integrate(rhs, y0, cfg)
    return Trajectory(traj.t, traj.values[:, 0])


def integrate_third_order_batch(
    params_list: Sequence[NoiseParams], state0: SingleQubitState, cfg: OdeConfig
) -> Trajectory:
    """Coherence trajectories for many parameter sets on one shared grid.

    Only ``matrix[1, 0]`` evolves, so each set reduces to the scalar equation
    x''' = -kappa x'' - (2 eta kappa + chi^2) x' - kappa chi^2 x.
    ``values`` has shape (n_times, n_sets).
    """
    for p in params_list:
        _require_memory(p)
    eta = np.array([p.eta for p in params_list])
    chi = np.array([p.chi for p in params_list])
    kappa = np.array([p.kappa for p in params_list])
    a0 = np.array([p.a0 for p in params_list])
    x0 = state0.coherence
    y0 = np.stack([np.full(eta.shape, x0), 1j * a0 * chi * x0, -(chi**2) * x0])
    c1, c2 = 2.0 * eta * kappa + chi**2, kappa * chi**2

    def rhs(_t: float, y: np.ndarray) -> np.ndarray:
        return np.stack([y[1], y[2], -kappa * y[2] - c1 * y[1] - c2 * y[0]])

    traj = integrate(rhs, y0, cfg)
    return Trajectory(traj.t, traj.values[:, 0])


def integrate_moment(
    params: NoiseParams, cfg: OdeConfig, order: int = 2
) -> Trajectory:
    """M1(t) (order 1) or the correlation M2 at lag tau (order 2), real-valued."""
    if order not in (1, 2):
        raise InvalidStateError(f"moment order must be 1 or 2, got {order}")
    start = params.chi**2 if order == 2 else params.a0 * params.chi
    eta = params.eta
    if params.is_memoryless:
        traj = integrate(lambda _t, y: -2.0 * eta * y, np.array([start]), cfg)
        return Trajectory(traj.t, np.real(traj.values[:, 0]))

    kappa = params.kappa

    def rhs(_t: float, y: np.ndarray) -> np.ndarray:
        return np.array([y[1], -kappa * y[1] - 2.0 * eta * kappa * y[0]])

    # Omega~(s) = 1/s + 0/s^2 + ..., so the initial slope vanishes.
    traj = integrate(rhs, np.array([start, 0.0]), cfg)
    return Trajectory(traj.t, np.real(traj.values[:, 0]))


def finite_difference_rates(
    df: DecoherenceFunction, t: float, h: float = 1e-5
) -> Tuple[float, float]:
    """(phi, gamma) as minus the imaginary and real parts of the differenced log D.

    d ln D/dt is taken as (difference quotient of D) / D(t), which keeps the
    truncation error bounded near zeros of |D| where ln|D| itself is steep.
    Differences are central, or one-sided of second order when t < h.
    """
    if t < 0 or h <= 0:
        raise InvalidStateError(f"need t >= 0 and h > 0, got t={t}, h={h}")
    if t >= h:
        nodes = np.array([t - h, t, t + h])
        weights = np.array([-0.5, 0.0, 0.5]) / h
    else:
        nodes = np.array([t, t + h, t + 2 * h])
        weights = np.array([-1.5, 2.0, -0.5]) / h
    d = np.atleast_1d(df(nodes))
    mag = np.abs(d)
    if np.min(mag) < FD_FLOOR:
        k = int(np.argmin(mag))
        raise CoherenceZeroError(nodes[k], mag[k])
    centre = d[0] if t < h else d[1]
    log_slope = complex(weights @ d) / centre
    return -log_slope.imag, -log_slope.real


def peak_revival_sum(squared_magnitude: Sequence[float], power: int = 1) -> float:
    """Sum of rises of |D|^power between detected troughs and peaks.

    Takes samples of the smooth |D|^2 and refines each interior extremum with
    a parabola through its neighbours.
    """
    y = np.asarray(squared_magnitude, dtype=float)
    if y.size < 2:
        return 0.0
    peaks, _ = find_peaks(y)
    troughs, _ = find_peaks(-y)
    idx = np.unique(np.concatenate([[0], peaks, troughs, [y.size - 1]]))
    values = []
    for k in idx:
        if 0 < k < y.size - 1:
            y0, y1, y2 = y[k - 1], y[k], y[k + 1]
            curv = y0 - 2.0 * y1 + y2
            values.append(y1 - (y2 - y0) ** 2 / (8.0 * curv) if curv != 0 else y1)
        else:
            values.append(y[k])
    levels = np.clip(np.asarray(values), 0.0, None) ** (power / 2.0)
    return float(np.sum(np.clip(np.diff(levels), 0.0, None)))


def max_error(
    params: NoiseParams, cfg: OdeConfig, df: Optional[DecoherenceFunction] = None
) -> float:
    """max_t |D_RK4(t) - D(t)| for the maximally coherent start."""
    df = df or build(params)
    state0 = SingleQubitState.maximally_coherent()
    traj = integrate_third_order_batch([params], state0, cfg)
    numeric = traj.values[:, 0] / state0.coherence
    return float(np.max(np.abs(numeric - df(traj.t))))


def convergence_ratio(params: NoiseParams, cfg: OdeConfig) -> float:
    """Error ratio under step halving; about 16 for a fourth-order method."""
    df = build(params)
    coarse = max_error(params, cfg, df)
    fine = max_error(params, cfg.halved(), df)
    logger.debug("RK4 errors %.3e -> %.3e", coarse, fine)
    return coarse / fine
