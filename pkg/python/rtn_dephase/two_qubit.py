"""Two noninteracting qubits in a common dephasing environment.

The product basis is {|11>, |10>, |01>, |00>}, i.e. kron of the single-qubit
(|1>, |0>) basis, so array index 0 is |11> and index 3 is |00>. The channel is
the tensor product of the single-qubit channel: every matrix element is
multiplied by the matching entry of kron(M, M), M = [[1, D*], [D, 1]].

Families:

* composite Bell states, (1+c)/2 |psi><psi| + (1-c)/2 |phi><phi| with
  psi = (|00> +- |11>)/sqrt(2) (super-decoherent) and
  phi = (|01> +- |10>)/sqrt(2) (sub-decoherent);
* extended Werner states, r |w><w| + (1-r)/4 I with w = a|00> + b|11>
  ("psi" family) or a|01> + b|10> ("phi" family).

Concurrence and the CHSH-Bell function come from the evolved matrix. The
uncorrected family formulas are kept as ``paper_variant_*`` columns: for composite
Bell states they are twice the matrix values, and for extended Werner states
the concurrence and thresholds lack the purity r.
"""

import logging
from dataclasses import dataclass
from typing import Literal, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import bisect

from .errors import InvalidStateError
from .series import ENTANGLEMENT_COLUMNS, MeasureSeries, gather, spectrum_metadata
from .single_qubit import (
    DEFAULT_TOL,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    SingleQubitKraus,
    increase_sum,
    validate_density,
)
from .single_qubit import kraus_operators as single_kraus_operators
from .spectral import DecoherenceFunction

logger = logging.getLogger(__name__)

PSD_TOL = 1e-10
EIGEN_CLAMP = 1e-12
X_PATTERN_TOL = 1e-14
THRESHOLD_XTOL = 1e-12
NORMALIZATION_TOL = 1e-12
TSIRELSON = 2.0 * np.sqrt(2.0)

IDX_11, IDX_10, IDX_01, IDX_00 = 0, 1, 2, 3
X_MASK = np.eye(4, dtype=bool) | np.eye(4, dtype=bool)[::-1]
SIGMA_YY = np.kron(SIGMA_Y, SIGMA_Y)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)


def _ket(**amplitudes: complex) -> np.ndarray:
    """Ket from labels like ``q00=...``, ``q11=...``."""
    index = {"q11": IDX_11, "q10": IDX_10, "q01": IDX_01, "q00": IDX_00}
    psi = np.zeros(4, dtype=complex)
    for label, amp in amplitudes.items():
        psi[index[label]] = amp
    return psi


@dataclass(frozen=True, eq=False)
class TwoQubitState:
    """Validated 4x4 density matrix in the {|11>, |10>, |01>, |00>} basis."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", validate_density(self.matrix, 4, PSD_TOL))

    @classmethod
    def from_ket(cls, ket: Sequence[complex]) -> "TwoQubitState":
        psi = np.asarray(ket, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def bell(cls, kind: str) -> "TwoQubitState":
        """``psi+-`` = (|00> +- |11>)/sqrt2, ``phi+-`` = (|01> +- |10>)/sqrt2."""
        kets = {
            "psi+": _ket(q00=1, q11=1),
            "psi-": _ket(q00=1, q11=-1),
            "phi+": _ket(q01=1, q10=1),
            "phi-": _ket(q01=1, q10=-1),
        }
        if kind not in kets:
            raise InvalidStateError(f"unknown Bell state {kind!r}")
        return cls.from_ket(kets[kind])

    @classmethod
    def maximally_mixed(cls) -> "TwoQubitState":
        return cls(np.eye(4) / 4.0)

    @property
    def is_x_structured(self) -> bool:
        return bool(np.all(np.abs(self.matrix[~X_MASK]) <= X_PATTERN_TOL))


class CompositeBellParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    c: float = Field(ge=-1, le=1, allow_inf_nan=False)
    psi_sign: Literal[1, -1] = 1
    phi_sign: Literal[1, -1] = 1


class ExtendedWernerParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    r: float = Field(ge=0, le=1, allow_inf_nan=False)
    alpha: complex
    beta: complex
    family: Literal["psi", "phi"] = "psi"

    @model_validator(mode="after")
    def _normalized(self) -> "ExtendedWernerParams":
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"|alpha|^2 + |beta|^2 = {norm!r}, expected 1")
        return self

    @property
    def overlap(self) -> float:
        """|alpha beta|."""
        return abs(self.alpha * self.beta)


FamilyParams = Union[CompositeBellParams, ExtendedWernerParams]


class Thresholds(NamedTuple):
    """|D| above which C > 0 and B > 2; None means never."""

    entanglement: Optional[float]
    nonlocality: Optional[float]


@dataclass(frozen=True, eq=False)
class TwoQubitKraus:
    operators: Tuple[np.ndarray, ...]

    def completeness_defect(self) -> float:
        total = sum(k.conj().T @ k for k in self.operators)
        return float(np.max(np.abs(total - np.eye(4))))


def kraus_operators(d: complex) -> TwoQubitKraus:
    """K_i (x) K_j for the single-qubit pair at the same D."""
    single: SingleQubitKraus = single_kraus_operators(d)
    ops = tuple(np.kron(a, b) for a in single.operators for b in single.operators)
    return TwoQubitKraus(ops)


def apply_kraus(state: TwoQubitState, kraus: TwoQubitKraus) -> TwoQubitState:
    rho = state.matrix
    return TwoQubitState(sum(k @ rho @ k.conj().T for k in kraus.operators))


def dephase_two(state: TwoQubitState, d: complex) -> TwoQubitState:
    m = np.array([[1.0, np.conj(d)], [d, 1.0]], dtype=complex)
    return TwoQubitState(state.matrix * np.kron(m, m))


def evolve_two(
    state0: TwoQubitState, df: DecoherenceFunction, t: float
) -> TwoQubitState:
    """Single flips scale by D, |10><01| by |D|^2, |00><11| by D^2."""
    return dephase_two(state0, df(t))


def non_markovianity_two(
    df: DecoherenceFunction, horizon: Optional[float] = None, tol: float = DEFAULT_TOL
) -> float:
    """N_T: total growth of |D(t)|^2, the trace distance of a Bell pair."""
    return increase_sum(df, horizon, tol, power=2)


def _matrix(state: Union[TwoQubitState, np.ndarray]) -> np.ndarray:
    if isinstance(state, TwoQubitState):
        return state.matrix
    return TwoQubitState(state).matrix


def _is_x(rho: np.ndarray) -> bool:
    return bool(np.all(np.abs(rho[~X_MASK]) <= X_PATTERN_TOL))


def concurrence_x(rho: np.ndarray) -> float:
    diag = np.clip(np.real(np.diag(rho)), 0.0, None)
    c1 = 2.0 * (abs(rho[1, 2]) - np.sqrt(diag[0] * diag[3]))
    c2 = 2.0 * (abs(rho[0, 3]) - np.sqrt(diag[1] * diag[2]))
    return float(max(0.0, c1, c2))


def concurrence_wootters(rho: np.ndarray) -> float:
    flipped = SIGMA_YY @ rho.conj() @ SIGMA_YY
    eig = np.real(np.linalg.eigvals(rho @ flipped))
    if np.min(eig) < -EIGEN_CLAMP * max(1.0, float(np.max(np.abs(eig)))):
        logger.debug("negative R eigenvalue %.3e clamped", np.min(eig))
    lam = np.sqrt(np.clip(np.sort(eig)[::-1], 0.0, None))
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def concurrence(
    state: Union[TwoQubitState, np.ndarray],
    method: Literal["auto", "wootters", "x"] = "auto",
) -> float:
    """Wootters concurrence; X-structured states take the closed form."""
    rho = _matrix(state)
    if method == "x" or (method == "auto" and _is_x(rho)):
        return concurrence_x(rho)
    return concurrence_wootters(rho)


def correlation_matrix(state: Union[TwoQubitState, np.ndarray]) -> np.ndarray:
    """T_mn = Tr[rho sigma_m (x) sigma_n]."""
    rho = _matrix(state)
    t = np.empty((3, 3))
    for m, sm in enumerate(PAULIS):
        for n, sn in enumerate(PAULIS):
            t[m, n] = np.real(np.trace(rho @ np.kron(sm, sn)))
    return t


def bell_x(rho: np.ndarray) -> float:
    a, b = abs(rho[0, 3]), abs(rho[1, 2])
    diag = np.real(np.diag(rho))
    mu1 = 4.0 * (a + b) ** 2
    mu2 = (diag[0] + diag[3] - diag[1] - diag[2]) ** 2
    mu3 = 4.0 * (a - b) ** 2
    return float(max(2.0 * np.sqrt(mu1 + mu2), 2.0 * np.sqrt(mu1 + mu3)))


def bell_horodecki(rho: np.ndarray) -> float:
    t = correlation_matrix(rho)
    mu = np.sort(np.clip(np.linalg.eigvalsh(t.T @ t), 0.0, None))[::-1]
    return float(2.0 * np.sqrt(mu[0] + mu[1]))


def bell_chsh(
    state: Union[TwoQubitState, np.ndarray],
    method: Literal["auto", "horodecki", "x"] = "auto",
) -> float:
    """Maximal CHSH value 2 sqrt(mu1 + mu2) (Horodecki criterion)."""
    rho = _matrix(state)
    if method == "x" or (method == "auto" and _is_x(rho)):
        return bell_x(rho)
    return bell_horodecki(rho)


def initial_state(params: FamilyParams) -> TwoQubitState:
    return family_state(params, 1.0)


def family_state(params: FamilyParams, d: complex) -> TwoQubitState:
    """Family member after the channel with decoherence value ``d``."""
    if isinstance(params, CompositeBellParams):
        psi = _ket(q00=1, q11=params.psi_sign) / np.sqrt(2.0)
        phi = _ket(q01=1, q10=params.phi_sign) / np.sqrt(2.0)
        rho = 0.5 * (1.0 + params.c) * np.outer(psi, psi.conj())
        rho = rho + 0.5 * (1.0 - params.c) * np.outer(phi, phi.conj())
    else:
        if params.family == "psi":
            w = _ket(q00=params.alpha, q11=params.beta)
        else:
            w = _ket(q01=params.alpha, q10=params.beta)
        rho = params.r * np.outer(w, w.conj()) + 0.25 * (1.0 - params.r) * np.eye(4)
    return dephase_two(TwoQubitState(rho), d)


def measures_at(params: FamilyParams, d: complex) -> Tuple[float, float]:
    """(C, B) from the family matrix at decoherence value ``d``."""
    state = family_state(params, d)
    return concurrence(state), bell_chsh(state)


def closed_form(params: FamilyParams, magnitude: float) -> Tuple[float, float]:
    """(C, B) as closed functions of |D| for the matrix-derived family."""
    d2 = magnitude * magnitude
    if isinstance(params, CompositeBellParams):
        c = params.c
        conc = max(0.0, 0.5 * ((1 - c) * d2 - (1 + c)), 0.5 * ((1 + c) * d2 - (1 - c)))
        return conc, 2.0 * np.sqrt(d2 * d2 + c * c)
    r, ab = params.r, params.overlap
    conc = max(0.0, 2.0 * r * ab * d2 - 0.5 * (1.0 - r))
    return conc, 2.0 * r * np.sqrt(1.0 + 4.0 * ab * ab * d2 * d2)


def literal_variant(params: FamilyParams, magnitude: float) -> Tuple[float, float]:
    """(C, B) from the uncorrected family formulas."""
    d2 = magnitude * magnitude
    if isinstance(params, CompositeBellParams):
        c = params.c
        conc = max(0.0, (1 - c) * d2 - (1 + c), (1 + c) * d2 - (1 - c))
        return conc, 4.0 * np.sqrt(d2 * d2 + c * c)
    r, ab = params.r, params.overlap
    conc = max(0.0, 2.0 * ab * d2 - 0.5 * (1.0 - r))
    return conc, 2.0 * r * np.sqrt(1.0 + 4.0 * ab * ab * d2 * d2)


def bell_relation(concurrence_value: float, r: float) -> float:
    """B = 2 sqrt(r^2 + (C + (1-r)/2)^2) for extended Werner states with C > 0."""
    return float(2.0 * np.sqrt(r * r + (concurrence_value + 0.5 * (1.0 - r)) ** 2))


def _crossing(func, lo: float = 0.0, hi: float = 1.0) -> Optional[float]:
    """Smallest |D| in [lo, hi] where the increasing ``func`` becomes positive."""
    f_lo, f_hi = func(lo), func(hi)
    if f_lo >= 0.0:
        return lo
    if f_hi <= 0.0:
        return None
    return float(bisect(func, lo, hi, xtol=THRESHOLD_XTOL))


def entanglement_threshold(params: FamilyParams) -> Optional[float]:
    """Closed form; None when C stays 0 for every |D| <= 1."""
    if isinstance(params, CompositeBellParams):
        c = abs(params.c)
        value = np.sqrt((1.0 - c) / (1.0 + c))
    else:
        r, ab = params.r, params.overlap
        if r == 0.0 or ab == 0.0:
            return None
        value = 0.5 * np.sqrt((1.0 - r) / (r * ab))
    return float(value) if value < 1.0 else None


def nonlocality_threshold(params: FamilyParams) -> Optional[float]:
    """Bisection on the matrix-derived B(|D|) = 2."""
    return _crossing(lambda m: measures_at(params, m)[1] - 2.0)


def thresholds(params: FamilyParams) -> Thresholds:
    return Thresholds(entanglement_threshold(params), nonlocality_threshold(params))


def classical_threshold(params: FamilyParams) -> Optional[float]:
    """Concurrence at the |D| where B crosses 2 (C_th); None if B never exceeds 2."""
    d = nonlocality_threshold(params)
    if d is None:
        return None
    return measures_at(params, d)[0]


def werner_purity_threshold(
    alpha: complex, beta: complex, family: Literal["psi", "phi"] = "psi"
) -> Optional[float]:
    """Smallest purity r for which the undecohered Werner state is entangled."""
    if abs(alpha * beta) == 0.0:
        return None

    def initial_concurrence(r: float) -> float:
        p = ExtendedWernerParams(r=r, alpha=alpha, beta=beta, family=family)
        s = family_state(p, 1.0).matrix
        # unclipped C2/C1 so the bracket has a sign change
        if family == "psi":
            return 2.0 * (abs(s[0, 3]) - np.sqrt(np.real(s[1, 1] * s[2, 2])))
        return 2.0 * (abs(s[1, 2]) - np.sqrt(np.real(s[0, 0] * s[3, 3])))

    return float(bisect(initial_concurrence, 0.0, 1.0, xtol=THRESHOLD_XTOL))


def literal_thresholds(params: FamilyParams) -> Thresholds:
    """Thresholds matching :func:`literal_variant`."""
    if isinstance(params, CompositeBellParams):
        c = abs(params.c)
        ent = float(np.sqrt((1.0 - c) / (1.0 + c))) if c > 0 else None
        if c > 0.5:
            nl = 0.0
        else:
            nl = float((0.5 - c * c) ** 0.25)
        return Thresholds(ent, nl)
    r, ab = params.r, params.overlap
    if ab == 0.0:
        return Thresholds(None, None)
    ent = float(0.5 * np.sqrt((1.0 - r) / ab))
    nl = float((1.0 - r * r) ** 0.25 / np.sqrt(2.0 * ab))
    return Thresholds(ent, nl)


def _family_metadata(params: FamilyParams, df: DecoherenceFunction) -> dict:
    kind = "cbs" if isinstance(params, CompositeBellParams) else "ews"
    matrix = thresholds(params)
    literal = literal_thresholds(params)
    dumped = params.model_dump()
    for key in ("alpha", "beta"):
        if key in dumped:
            dumped[key] = [dumped[key].real, dumped[key].imag]
    return {
        "family": kind,
        "family_params": dumped,
        "spectrum": spectrum_metadata(df),
        "thresholds": {
            "entanglement": matrix.entanglement,
            "nonlocality": matrix.nonlocality,
            "classical_concurrence": classical_threshold(params),
            "never_entangled": matrix.entanglement is None,
        },
        "paper_variant_thresholds": {
            "entanglement": literal.entanglement,
            "nonlocality": literal.nonlocality,
        },
    }


def family_series(
    params: FamilyParams,
    df: DecoherenceFunction,
    grid: Sequence[float],
    workers: Optional[int] = None,
) -> MeasureSeries:
    t = np.asarray(grid, dtype=float)
    d = np.atleast_1d(df(t))

    def row(k: int) -> Tuple[float, ...]:
        conc, bell = measures_at(params, d[k])
        mag = abs(d[k])
        return (t[k], mag, conc, bell, *literal_variant(params, mag))

    rows = gather(row, range(t.size), workers)
    return MeasureSeries(
        ENTANGLEMENT_COLUMNS,
        np.asarray(rows).reshape(-1, 6),
        _family_metadata(params, df),
    )


def cbs_series(
    params: CompositeBellParams,
    df: DecoherenceFunction,
    grid: Sequence[float],
    workers: Optional[int] = None,
) -> MeasureSeries:
    """Concurrence and Bell function for a composite Bell state on a time grid."""
    return family_series(params, df, grid, workers)


def ews_series(
    params: ExtendedWernerParams,
    df: DecoherenceFunction,
    grid: Sequence[float],
    workers: Optional[int] = None,
) -> MeasureSeries:
    """Concurrence and Bell function for an extended Werner state on a time grid."""
    return family_series(params, df, grid, workers)
