"""
rtn-dephase: exact dephasing of qubits under nonequilibrium telegraph noise

Closed-form decoherence function, non-Markovianity, concurrence and Bell
nonlocality, with numerical oracles for every closed form.
"""

from .errors import (
    CoherenceZeroError,
    ContractViolationError,
    DegenerateSpectrumError,
    DephasingError,
    HorizonError,
    InvalidStateError,
)
from .noise_model import NoiseParams
from .series import MeasureSeries
from .single_qubit import (
    SingleQubitState,
    evolve,
    non_markovianity_single,
)
from .spectral import DecoherenceFunction, build, rates
from .two_qubit import (
    CompositeBellParams,
    ExtendedWernerParams,
    TwoQubitState,
    bell_chsh,
    concurrence,
    evolve_two,
    non_markovianity_two,
)

__version__ = "0.1.0"
__all__ = [
    "CoherenceZeroError",
    "CompositeBellParams",
    "ContractViolationError",
    "DecoherenceFunction",
    "DegenerateSpectrumError",
    "DephasingError",
    "ExtendedWernerParams",
    "HorizonError",
    "InvalidStateError",
    "MeasureSeries",
    "NoiseParams",
    "SingleQubitState",
    "TwoQubitState",
    "bell_chsh",
    "build",
    "concurrence",
    "evolve",
    "evolve_two",
    "non_markovianity_single",
    "non_markovianity_two",
    "rates",
]
