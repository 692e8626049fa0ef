"""Evaluation of exponential-polynomial mode sums  sum_n c_n t^p_n / p_n! exp(r_n t)."""

from math import factorial
from typing import Sequence, Tuple

import numpy as np


def mode_basis(
    roots: Sequence[complex], powers: Sequence[int], t: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Return (f, df/dt) with shape ``t.shape + (len(roots),)``."""
    t = np.asarray(t, dtype=float)[..., None]
    r = np.asarray(roots, dtype=complex)
    p = np.asarray(powers, dtype=int)
    expo = np.exp(r * t)
    norm = np.array([1.0 / factorial(k) for k in p])
    poly = np.where(p == 0, 1.0, t ** np.maximum(p, 0)) * norm
    # d/dt t^p/p! = t^(p-1)/(p-1)!
    dnorm = np.array([1.0 / factorial(k - 1) if k > 0 else 0.0 for k in p])
    dpoly = np.where(p <= 1, 1.0, t ** np.maximum(p - 1, 0)) * dnorm
    f = poly * expo
    return f, dpoly * expo + r * f


def mode_derivative_at_zero(
    roots: Sequence[complex], powers: Sequence[int], order: int
) -> np.ndarray:
    """k-th derivative at t=0 of each basis function t^p/p! e^{rt}."""
    out = np.zeros(len(roots), dtype=complex)
    for n, (r, p) in enumerate(zip(roots, powers)):
        if order >= p:
            # Leibniz: only the term differentiating t^p exactly p times survives.
            binom = factorial(order) / (factorial(p) * factorial(order - p))
            out[n] = binom * complex(r) ** (order - p)
    return out
