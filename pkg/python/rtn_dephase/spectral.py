"""Exact decoherence function D(t) from the partial fractions of its transform.

For finite kappa the transform is

    D~(s) = [s^2 + kappa s + 2 eta kappa + i a0 chi (s + kappa)] / P(s),
    P(s)  = s^3 + kappa s^2 + (2 eta kappa + chi^2) s + kappa chi^2,

and in the memoryless limit it reduces to
(s + 2 eta + i a0 chi) / (s^2 + 2 eta s + chi^2). Roots of P come from the
companion matrix, polished by Newton steps; coefficients are the residues of
the real and imaginary numerators. Repeated roots get confluent modes
t^p/p! e^{rt}, so D(t) stays exact in the degenerate limit.
"""

import logging
from dataclasses import dataclass
from math import factorial
from typing import List, Tuple, Union

import numpy as np
from scipy.linalg import companion

from ._modes import mode_basis, mode_derivative_at_zero
from .errors import (
    CoherenceZeroError,
    ContractViolationError,
    DegenerateSpectrumError,
    InvalidStateError,
)
from .noise_model import MomentKernel, NoiseParams

logger = logging.getLogger(__name__)

TimeLike = Union[float, np.ndarray]
ComplexLike = Union[complex, np.ndarray]

NEWTON_STEPS = 2
ROOT_SEPARATION_TOL = 1e-8
MULTIPLICITY_RADIUS = 1e-4
INITIAL_DATA_TOL = 1e-9
MAGNITUDE_TOL = 1e-9
IMAG_ROOT_TOL = 1e-12
STABILITY_TOL = 1e-12
LEAKAGE_TOL = 1e-10
COHERENCE_FLOOR = 1e-13


@dataclass(frozen=True, eq=False)
class DecoherenceFunction:
    """D(t) = sum_n (c_r^n + i c_i^n) t^p_n / p_n! exp(r_n t).

    ``powers`` is zero for every simple root; a root of multiplicity m
    appears m times with powers m-1, ..., 0.
    """

    params: NoiseParams
    roots: Tuple[complex, ...]
    residues_real: Tuple[complex, ...]
    residues_imag: Tuple[complex, ...]
    powers: Tuple[int, ...]

    @property
    def is_confluent(self) -> bool:
        return any(self.powers)

    @property
    def is_trivial(self) -> bool:
        return self.params.chi == 0.0

    def components(self, t: TimeLike) -> Tuple[np.ndarray, ...]:
        """Real arrays (D_r, D_i, dD_r/dt, dD_i/dt) at the given times."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0):
            raise InvalidStateError(f"times must be non-negative, got {t!r}")
        f, df = mode_basis(self.roots, self.powers, t_arr)
        c_r = np.asarray(self.residues_real)
        c_i = np.asarray(self.residues_imag)
        raw = [f @ c_r, f @ c_i, df @ c_r, df @ c_i]
        weight = max(1.0, float(np.sum(np.abs(c_r) + np.abs(c_i))))
        bound = LEAKAGE_TOL * weight * max(1.0, float(np.max(np.abs(self.roots))))
        for values in raw:
            leak = float(np.max(np.abs(np.imag(values)), initial=0.0))
            if leak > bound:
                raise ContractViolationError(
                    f"imaginary leakage {leak:.3e} in real mode combination"
                )
        return tuple(np.real(v) for v in raw)

    def __call__(self, t: TimeLike) -> ComplexLike:
        d_r, d_i, _, _ = self.components(t)
        return _complex_like(d_r + 1j * d_i, t)

    def derivative(self, t: TimeLike) -> ComplexLike:
        _, _, dd_r, dd_i = self.components(t)
        return _complex_like(dd_r + 1j * dd_i, t)

    def derivative_at_zero(self, order: int) -> complex:
        """order-th derivative of D at t=0 (residue-sum identities)."""
        basis = mode_derivative_at_zero(self.roots, self.powers, order)
        d_r = complex(basis @ np.asarray(self.residues_real))
        d_i = complex(basis @ np.asarray(self.residues_imag))
        return complex(d_r.real, 0.0) + 1j * d_i.real

    def decay_rate(self) -> float:
        """Slowest decay rate among modes that carry weight (0 for D = 1)."""
        rates = [
            -r.real
            for r, c_r, c_i in zip(self.roots, self.residues_real, self.residues_imag)
            if abs(c_r) + abs(c_i) > 0.0
        ]
        return min(rates) if rates else 0.0

    def oscillation_rate(self) -> float:
        return max((abs(r.imag) for r in self.roots), default=0.0)

    def variation_tail(self, horizon: float) -> float:
        """Upper bound on the total variation of |D| over [horizon, inf)."""
        total = 0.0
        for r, c_r, c_i, p in zip(
            self.roots, self.residues_real, self.residues_imag, self.powers
        ):
            weight = abs(c_r) + abs(c_i)
            if weight == 0.0:
                continue
            a = -r.real
            if a <= 0.0:
                return float("inf")
            tail = abs(r) * _exp_poly_tail(p, a, horizon)
            if p > 0:
                tail += _exp_poly_tail(p - 1, a, horizon)
            total += weight * tail
        return total


def _exp_poly_tail(k: int, a: float, horizon: float) -> float:
    """int_T^inf t^k/k! e^{-a t} dt."""
    acc = sum(horizon**j / (factorial(j) * a ** (k - j + 1)) for j in range(k + 1))
    return float(np.exp(-a * horizon) * acc)


def _complex_like(values: np.ndarray, like: TimeLike) -> ComplexLike:
    return complex(values) if np.ndim(like) == 0 else values


def _polished_roots(coeffs: np.ndarray) -> np.ndarray:
    """Roots of a monic real polynomial: companion eigenvalues + Newton."""
    roots = np.linalg.eigvals(companion(coeffs)).astype(complex)
    deriv = np.polyder(coeffs)
    for _ in range(NEWTON_STEPS):
        value = np.polyval(coeffs, roots)
        slope = np.polyval(deriv, roots)
        safe = np.where(slope != 0, slope, 1.0)
        roots = roots - np.where(slope != 0, value / safe, 0.0)
    return roots


def _conjugate_symmetric(roots: np.ndarray, scale: float) -> List[complex]:
    """Force exact conjugate pairing (a real cubic/quadratic has at most one pair)."""
    order = np.argsort(-np.abs(roots.imag))
    lead = roots[order[0]]
    if len(roots) >= 2 and abs(lead.imag) > IMAG_ROOT_TOL * scale:
        partner = roots[order[1]]
        upper, lower = (lead, partner) if lead.imag > 0 else (partner, lead)
        z = 0.5 * (upper + np.conj(lower))
        rest = [complex(r.real, 0.0) for r in roots[order[2:]]]
        return [complex(z), complex(np.conj(z))] + rest
    return [complex(r.real, 0.0) for r in roots]


def _cluster(
    roots: List[complex], scale: float, radius: float
) -> Tuple[List[List[complex]], float]:
    """Group roots closer than radius * scale."""
    groups: List[List[complex]] = []
    min_sep = float("inf")
    for r in roots:
        for g in groups:
            sep = abs(r - g[0]) / scale
            min_sep = min(min_sep, sep)
            if sep < radius:
                g.append(r)
                break
        else:
            groups.append([r])
    return groups, min_sep


def _taylor(coeffs: np.ndarray, x: complex, terms: int) -> np.ndarray:
    """First Taylor coefficients of a polynomial around x."""
    out = np.zeros(terms, dtype=complex)
    poly = np.asarray(coeffs, dtype=complex)
    for j in range(terms):
        out[j] = np.polyval(poly, x) / factorial(j) if poly.size else 0.0
        poly = np.polyder(poly) if poly.size > 1 else np.zeros(0)
    return out


def _confluent_coefficients(
    numerator: np.ndarray, centre: complex, others: List[complex], mult: int
) -> np.ndarray:
    """Coefficients of 1/(s-r)^(mult-j), j = 0..mult-1, in N/P around a root."""
    q = np.poly(others) if others else np.array([1.0])
    a = _taylor(numerator, centre, mult)
    b = _taylor(q, centre, mult)
    c = np.zeros(mult, dtype=complex)
    for j in range(mult):
        c[j] = (a[j] - sum(c[i] * b[j - i] for i in range(j))) / b[0]
    return c


def _trivial(params: NoiseParams) -> DecoherenceFunction:
    # chi = 0: the numerator cancels every root but s = 0, so D(t) = 1.
    if params.is_memoryless:
        others: Tuple[complex, ...] = (complex(-2.0 * params.eta),)
    else:
        others = MomentKernel.from_params(params).roots
    roots = (0j,) + tuple(others)
    zeros = (0j,) * len(others)
    return DecoherenceFunction(
        params, roots, (1.0 + 0j,) + zeros, (0j,) * len(roots), (0,) * len(roots)
    )


def transform_coefficients(
    params: NoiseParams,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(denominator, real numerator, imaginary numerator), highest power first."""
    eta, chi, a0 = params.eta, params.chi, params.a0
    if params.is_memoryless:
        den = np.array([1.0, 2.0 * eta, chi**2])
        return den, np.array([1.0, 2.0 * eta]), np.array([a0 * chi])
    kappa = params.kappa
    den = np.array([1.0, kappa, 2.0 * eta * kappa + chi**2, kappa * chi**2])
    num_r = np.array([1.0, kappa, 2.0 * eta * kappa])
    num_i = np.array([a0 * chi, a0 * chi * kappa])
    return den, num_r, num_i


def _cluster_centre(den: np.ndarray, group: List[complex]) -> complex:
    """Mean of a cluster, refined as a simple root of P^(m-1)."""
    centre = complex(np.mean(group))
    mult = len(group)
    if mult == 1:
        return centre
    poly = np.polyder(den, mult - 1)
    slope_poly = np.polyder(poly)
    for _ in range(NEWTON_STEPS + 1):
        slope = np.polyval(slope_poly, centre)
        if slope == 0:
            break
        centre = complex(centre - np.polyval(poly, centre) / slope)
    return centre


def _assemble(
    params: NoiseParams,
    groups: List[List[complex]],
    den: np.ndarray,
    num_r: np.ndarray,
    num_i: np.ndarray,
) -> DecoherenceFunction:
    out_roots, out_r, out_i, out_p = [], [], [], []
    centres = [_cluster_centre(den, g) for g in groups]
    for k, (g, centre) in enumerate(zip(groups, centres)):
        mult = len(g)
        others: List[complex] = []
        for j, (h, other) in enumerate(zip(groups, centres)):
            if j != k:
                others.extend([other] * len(h))
        c_r = _confluent_coefficients(num_r, centre, others, mult)
        c_i = _confluent_coefficients(num_i, centre, others, mult)
        for j in range(mult):
            out_roots.append(centre)
            out_r.append(complex(c_r[j]))
            out_i.append(complex(c_i[j]))
            out_p.append(mult - 1 - j)
    return DecoherenceFunction(
        params, tuple(out_roots), tuple(out_r), tuple(out_i), tuple(out_p)
    )


def initial_data_defect(df: DecoherenceFunction) -> float:
    """Largest violation of D(0) = 1 and D'(0) = i a0 chi (rate-scaled)."""
    p = df.params
    d0 = abs(df.derivative_at_zero(0) - 1.0)
    d1 = abs(df.derivative_at_zero(1) - 1j * p.a0 * p.chi) / p.rate_scale
    return max(d0, d1)


def build(params: NoiseParams, strict: bool = False) -> DecoherenceFunction:
    """Roots and residues of D~(s).

    Roots closer than ROOT_SEPARATION_TOL share a confluent mode. A split
    pair coming from an exactly repeated root (eigenvalues of the companion
    matrix separate it by about sqrt(eps)) fails the initial-data identities;
    such spectra are re-clustered within MULTIPLICITY_RADIUS. With
    ``strict=True`` any clustering raises DegenerateSpectrumError instead.
    """
    if params.chi == 0.0:
        return _trivial(params)

    den, num_r, num_i = transform_coefficients(params)
    scale = params.rate_scale
    raw = _polished_roots(den)
    roots = _conjugate_symmetric(raw, scale)
    groups, min_sep = _cluster(roots, scale, ROOT_SEPARATION_TOL)
    df = _assemble(params, groups, den, num_r, num_i)
    defect = initial_data_defect(df)
    if defect > INITIAL_DATA_TOL:
        wide, _ = _cluster(roots, scale, MULTIPLICITY_RADIUS)
        if len(wide) < len(groups):
            groups = wide
            df = _assemble(params, groups, den, num_r, num_i)
            defect = initial_data_defect(df)

    if len(groups) < len(roots):
        if strict:
            raise DegenerateSpectrumError(roots, min_sep)
        logger.warning(
            "near-repeated roots (separation %.2e) for %s; using confluent modes",
            min_sep,
            params,
        )
    if defect > INITIAL_DATA_TOL:
        raise ContractViolationError(
            f"residues violate the initial data by {defect:.3e} for {params}"
        )
    if max(r.real for r in df.roots) > STABILITY_TOL * scale:
        raise ContractViolationError(f"unstable root in spectrum: {df.roots}")

    logger.debug("spectrum for %s: roots=%s", params, df.roots)
    return df


def evaluate(df: DecoherenceFunction, t: TimeLike) -> ComplexLike:
    """D(t) = D_r(t) + i D_i(t), contractive within MAGNITUDE_TOL."""
    values = df(t)
    peak = float(np.max(np.abs(values), initial=0.0))
    if peak > 1.0 + MAGNITUDE_TOL:
        raise ContractViolationError(f"|D| = {peak!r} exceeds 1 for {df.params}")
    return values


def markovian_limit(params: NoiseParams, t: TimeLike) -> ComplexLike:
    """Closed-form D(t) for memoryless noise.

    D_r = e^{-eta t} [cosh(delta t) + eta sinh(delta t)/delta],
    D_i = a0 chi e^{-eta t} sinh(delta t)/delta,  delta = sqrt(eta^2 - chi^2).
    """
    if not params.is_memoryless:
        raise ContractViolationError("markovian_limit needs memoryless parameters")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise InvalidStateError(f"times must be non-negative, got {t!r}")
    eta, chi, a0 = params.eta, params.chi, params.a0
    delta = np.sqrt(complex(eta * eta - chi * chi))
    x = delta * t_arr
    small = np.abs(x) < 1e-4
    safe_delta = delta if delta != 0 else 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        sinh_over = np.where(
            small, t_arr * (1.0 + x * x / 6.0 + x**4 / 120.0), np.sinh(x) / safe_delta
        )
    envelope = np.exp(-eta * t_arr)
    d_r = np.real(envelope * (np.cosh(x) + eta * sinh_over))
    d_i = np.real(envelope * a0 * chi * sinh_over)
    return _complex_like(d_r + 1j * d_i, t)


def rates(df: DecoherenceFunction, t: TimeLike) -> Tuple[TimeLike, TimeLike]:
    """Frequency shift phi = -d arg D/dt and decoherence rate gamma = -d ln|D|/dt."""
    d_r, d_i, dd_r, dd_i = df.components(t)
    mag2 = d_r * d_r + d_i * d_i
    small = np.sqrt(mag2) < COHERENCE_FLOOR
    if np.any(small):
        t_arr = np.broadcast_to(np.asarray(t, dtype=float), mag2.shape)
        idx = np.flatnonzero(np.atleast_1d(small))[0]
        raise CoherenceZeroError(
            np.atleast_1d(t_arr)[idx], float(np.sqrt(np.atleast_1d(mag2)[idx]))
        )
    phi = -(d_r * dd_i - d_i * dd_r) / mag2
    gamma = -(d_r * dd_r + d_i * dd_i) / mag2
    if np.ndim(t) == 0:
        return float(phi), float(gamma)
    return phi, gamma
