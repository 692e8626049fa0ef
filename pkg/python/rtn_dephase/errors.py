"""Exception hierarchy for rtn-dephase.

Parameter validation goes through pydantic (``pydantic.ValidationError``);
everything raised by the numerical layers derives from :class:`DephasingError`.
"""

from typing import Optional, Sequence


class DephasingError(Exception):
    """Base class for every error raised by the library."""


class InvalidStateError(DephasingError, ValueError):
    """A density matrix or time argument violates its preconditions."""


class ContractViolationError(DephasingError):
    """A numerical invariant failed or a function was called outside its domain."""


class DegenerateSpectrumError(DephasingError):
    """The transform denominator has (near-)repeated roots."""

    def __init__(self, roots: Sequence[complex], separation: float):
        self.roots = tuple(complex(r) for r in roots)
        self.separation = float(separation)
        pretty = ", ".join(f"{r:.6g}" for r in self.roots)
        super().__init__(
            f"degenerate spectrum: roots [{pretty}] have relative separation "
            f"{self.separation:.3e}"
        )


class CoherenceZeroError(DephasingError):
    """Rates were requested where |D(t)| is numerically zero."""

    def __init__(self, t: float, magnitude: float):
        self.t = float(t)
        self.magnitude = float(magnitude)
        super().__init__(
            f"coherence zero crossing at t={self.t:.6g}: |D|={self.magnitude:.3e}"
        )


class HorizonError(DephasingError):
    """The integration horizon leaves a tail larger than the requested tolerance."""

    def __init__(self, horizon: float, tail_bound: float, tol: Optional[float] = None):
        self.horizon = float(horizon)
        self.tail_bound = float(tail_bound)
        self.tol = tol
        msg = f"horizon {self.horizon:.6g} too short: tail bound {self.tail_bound:.3e}"
        if tol is not None:
            msg += f" exceeds tol {tol:.3e}"
        super().__init__(msg)
