"""Nonequilibrium random telegraph noise with an exponential memory kernel.

The noise switches between +chi and -chi at average rate eta. Its conditional
probability obeys a generalized master equation with kernel
K(t) = kappa * exp(-kappa * t); the initial distribution is biased by the
nonstationary parameter a0. In the Laplace domain the relaxation factor is

    Omega~(s) = (s + kappa) / (s^2 + kappa s + 2 eta kappa)

and every moment of the noise is built from its inverse transform Omega(t).
"""

import logging
from dataclasses import dataclass
from math import comb, factorial
from typing import Annotated, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import roots_legendre

from ._modes import mode_basis
from .errors import ContractViolationError, InvalidStateError

logger = logging.getLogger(__name__)

TimeLike = Union[float, np.ndarray]

CONFLUENT_DISCRIMINANT_TOL = 1e-12
SIMPLEX_QUADRATURE_ORDER = 16
MAX_CUMULANT_ORDER = 4

PositiveRate = Annotated[float, Field(gt=0, allow_inf_nan=False)]


class NoiseParams(BaseModel):
    """Environment parameters. ``kappa=None`` is the memoryless (Markovian) limit."""

    model_config = ConfigDict(frozen=True)

    eta: float = Field(gt=0, allow_inf_nan=False, description="transition rate")
    chi: float = Field(ge=0, allow_inf_nan=False, description="coupling amplitude")
    kappa: Optional[PositiveRate] = Field(
        description="memory decay rate, None = memoryless"
    )
    a0: float = Field(default=0.0, ge=-1, le=1, description="nonstationary parameter")

    @classmethod
    def memoryless(cls, eta: float, chi: float, a0: float = 0.0) -> "NoiseParams":
        return cls(eta=eta, chi=chi, kappa=None, a0=a0)

    @property
    def is_memoryless(self) -> bool:
        return self.kappa is None

    @property
    def is_stationary(self) -> bool:
        return self.a0 == 0.0

    @property
    def rate_scale(self) -> float:
        """Largest rate in the model, used to scale tolerances and steps."""
        rates = [self.eta, self.chi]
        if self.kappa is not None:
            rates.append(self.kappa)
        return max(rates)

    def replace(self, **changes) -> "NoiseParams":
        """Validated copy with some fields changed."""
        return NoiseParams(**{**self.model_dump(), **changes})


@dataclass(frozen=True)
class MomentKernel:
    """Closed-form Omega(tau) as a sum of (confluent) exponential modes."""

    params: NoiseParams
    roots: Tuple[complex, ...]
    residues: Tuple[complex, ...]
    powers: Tuple[int, ...]

    @classmethod
    def from_params(cls, params: NoiseParams) -> "MomentKernel":
        if params.is_memoryless:
            return cls(params, (complex(-2.0 * params.eta),), (1.0 + 0j,), (0,))

        kappa, eta = params.kappa, params.eta
        disc = kappa * kappa - 8.0 * eta * kappa
        if abs(disc) < CONFLUENT_DISCRIMINANT_TOL * kappa * kappa:
            # kappa = 8 eta: Omega~ = 1/(s-p) + (p+kappa)/(s-p)^2
            p = complex(-0.5 * kappa)
            logger.debug("moment kernel is critically damped (kappa=%g)", kappa)
            return cls(params, (p, p), (1.0 + 0j, p + kappa), (0, 1))

        sq = np.sqrt(complex(disc))
        p_plus = complex((-kappa + sq) / 2.0)
        p_minus = complex((-kappa - sq) / 2.0)
        res_plus = (p_plus + kappa) / (p_plus - p_minus)
        res_minus = (p_minus + kappa) / (p_minus - p_plus)
        return cls(params, (p_plus, p_minus), (res_plus, res_minus), (0, 0))

    def omega(self, tau: TimeLike) -> TimeLike:
        f, _ = mode_basis(self.roots, self.powers, tau)
        return _real_like(f @ np.asarray(self.residues), tau)

    def omega_derivative(self, tau: TimeLike) -> TimeLike:
        _, df = mode_basis(self.roots, self.powers, tau)
        return _real_like(df @ np.asarray(self.residues), tau)


def _real_like(values: np.ndarray, like: TimeLike) -> TimeLike:
    out = np.real(values)
    return float(out) if np.ndim(like) == 0 else out


def _check_times(*times: TimeLike) -> None:
    for t in times:
        if np.any(np.asarray(t) < 0):
            raise InvalidStateError(f"times must be non-negative, got {t!r}")


def initial_distribution(params: NoiseParams) -> np.ndarray:
    """Probabilities of (+chi, -chi) at t=0."""
    return 0.5 * np.array([1.0 + params.a0, 1.0 - params.a0])


def conditional_probability(
    params: NoiseParams, t: float, t_prime: float
) -> np.ndarray:
    """Transition matrix P(eps, t | eps', t') for t >= t' (columns sum to one)."""
    _check_times(t, t_prime)
    if t < t_prime:
        raise InvalidStateError(f"need t >= t', got t={t}, t'={t_prime}")
    om = MomentKernel.from_params(params).omega(t - t_prime)
    return 0.5 * np.array([[1.0 + om, 1.0 - om], [1.0 - om, 1.0 + om]])


def mean(params: NoiseParams, t: TimeLike) -> TimeLike:
    """First moment M1(t) = a0 chi Omega(t)."""
    _check_times(t)
    return params.a0 * params.chi * MomentKernel.from_params(params).omega(t)


def second_moment(params: NoiseParams, t: TimeLike, t_prime: TimeLike) -> TimeLike:
    """Two-time correlation M2(t, t') = chi^2 Omega(|t - t'|)."""
    _check_times(t, t_prime)
    tau = np.abs(np.asarray(t, dtype=float) - np.asarray(t_prime, dtype=float))
    if np.ndim(tau) == 0:
        tau = float(tau)
    return params.chi**2 * MomentKernel.from_params(params).omega(tau)


def _ordered_moments(kernel: MomentKernel, times: np.ndarray) -> np.ndarray:
    """Factorized moments for rows of non-increasing times, shape (N, n)."""
    chi, a0 = kernel.params.chi, kernel.params.a0
    n = times.shape[1]
    out = np.ones(times.shape[0])
    for k in range(0, n - 1, 2):
        out = out * chi**2 * kernel.omega(times[:, k] - times[:, k + 1])
    if n % 2:
        out = out * a0 * chi * kernel.omega(times[:, -1])
    return out


def ordered_moment(params: NoiseParams, times: Sequence[float]) -> float:
    """<eps(t1)...eps(tn)> for t1 >= t2 >= ... >= tn by pairwise peeling."""
    arr = np.asarray(times, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidStateError("need at least one time instant")
    _check_times(arr)
    if np.any(np.diff(arr) > 0):
        raise InvalidStateError(f"times must be in decreasing order, got {list(times)}")
    kernel = MomentKernel.from_params(params)
    return float(_ordered_moments(kernel, arr[None, :])[0])


def _simplex_rule(t: float, n: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nested Gauss-Legendre rule on {t >= t1 >= ... >= tn >= 0}."""
    x, w = roots_legendre(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    pts = (t * x)[:, None]
    wts = t * w
    for _ in range(1, n):
        last = pts[:, -1]
        inner = last[:, None] * x[None, :]
        wts = (wts[:, None] * last[:, None] * w[None, :]).ravel()
        pts = np.concatenate(
            [np.repeat(pts, order, axis=0), inner.reshape(-1, 1)], axis=1
        )
    return pts, wts


def integrated_moments(params: NoiseParams, t: float, order: int) -> np.ndarray:
    """[M_1(t), ..., M_order(t)] with M_n the n-fold integral over [0, t]^n."""
    kernel = MomentKernel.from_params(params)
    out = np.zeros(order)
    for n in range(1, order + 1):
        pts, wts = _simplex_rule(t, n, SIMPLEX_QUADRATURE_ORDER)
        out[n - 1] = factorial(n) * float(wts @ _ordered_moments(kernel, pts))
    return out


def cumulants_from_moments(moments: Sequence[float]) -> np.ndarray:
    """k_n = m_n - sum_{k<n} C(n-1, k-1) k_k m_{n-k}."""
    m = np.asarray(moments, dtype=float)
    kappas = np.zeros_like(m)
    for n in range(1, m.size + 1):
        acc = m[n - 1]
        for k in range(1, n):
            acc -= comb(n - 1, k - 1) * kappas[k - 1] * m[n - k - 1]
        kappas[n - 1] = acc
    return kappas


def cumulant_series_check(params: NoiseParams, t: float, order: int) -> complex:
    """Truncated cumulant expansion of D(t), for short-time validation only."""
    if not 1 <= order <= MAX_CUMULANT_ORDER:
        raise ContractViolationError(
            f"cumulant order must be in 1..{MAX_CUMULANT_ORDER}, got {order}"
        )
    _check_times(t)
    if params.chi == 0.0 or t == 0.0:
        return 1.0 + 0j
    kappas = cumulants_from_moments(integrated_moments(params, t, order))
    # (+i)^m reproduces the phase convention of the exact D(t).
    log_d = sum((1j) ** m * kappas[m - 1] / factorial(m) for m in range(1, order + 1))
    return complex(np.exp(log_d))
