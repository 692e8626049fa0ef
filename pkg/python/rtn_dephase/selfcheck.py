"""Oracle-vs-analytic acceptance groups.

Each group draws its own parameters from a seeded generator and returns one
:class:`CheckResult`. Timings are logged, never printed, so the report text
depends only on the seed and the draw count.
"""

import dataclasses
import logging
import time
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from .errors import DephasingError
from .noise_model import NoiseParams
from .oracle import (
    OdeConfig,
    convergence_ratio,
    finite_difference_rates,
    integrate_third_order_batch,
    peak_revival_sum,
)
from .single_qubit import (
    SingleQubitState,
    breakpoints,
    evolve,
    non_markovianity_pair,
    non_markovianity_single,
)
from .single_qubit import apply_kraus as apply_kraus_single
from .single_qubit import kraus_operators as kraus_single
from .spectral import DecoherenceFunction, build, markovian_limit, rates
from .two_qubit import (
    CompositeBellParams,
    ExtendedWernerParams,
    TwoQubitState,
    apply_kraus,
    bell_horodecki,
    bell_relation,
    bell_x,
    classical_threshold,
    concurrence_wootters,
    concurrence_x,
    dephase_two,
    kraus_operators,
    measures_at,
    werner_purity_threshold,
)

logger = logging.getLogger(__name__)

ORACLE_STEP = 0.002
ORACLE_HORIZON = 20.0
ORACLE_RECORD_EVERY = 10
ORACLE_TOL = 1e-6
FD_STEP = 1e-5
FD_DRAWS = 50
MARKOV_KAPPA = 1e4
STATE_DRAWS = 100
A0_GRID = np.linspace(-1.0, 1.0, 21)
SYMMETRY_KAPPAS = (0.3, 1.0, 3.0)
TREND_KAPPAS = (0.2, 0.5, 1.0, 2.0, 5.0)
PEAK_HORIZON = 40.0
PEAK_RECORD_EVERY = 2
PEAK_RTOL = 1e-4


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def draw_params(rng: np.random.Generator, n: int) -> List[NoiseParams]:
    """Parameters in units of eta: eta, kappa in [0.2, 5], chi/eta in [0.1, 5]."""
    eta = rng.uniform(0.2, 5.0, n)
    kappa = rng.uniform(0.2, 5.0, n)
    ratio = rng.uniform(0.1, 5.0, n)
    a0 = rng.uniform(-1.0, 1.0, n)
    return [
        NoiseParams(eta=1.0, chi=float(x), kappa=float(k / e), a0=float(a))
        for e, k, x, a in zip(eta, kappa, ratio, a0)
    ]


def _perturbed(df: DecoherenceFunction, amount: float) -> DecoherenceFunction:
    if amount == 0.0:
        return df
    shifted = (df.residues_real[0] + amount,) + df.residues_real[1:]
    return dataclasses.replace(df, residues_real=shifted)


def check_residue_identities(
    params: Sequence[NoiseParams], perturbation: float = 0.0
) -> CheckResult:
    worst = 0.0
    for p in params:
        df = _perturbed(build(p), perturbation)
        d0, d1 = df.derivative_at_zero(0), df.derivative_at_zero(1)
        errs = [
            abs(d0.real - 1.0) / 1e-11,
            abs(d0.imag) / 1e-11,
            abs(d1.real) / (1e-9 * p.chi),
            abs(d1.imag - p.a0 * p.chi) / (1e-9 * p.chi),
        ]
        worst = max(worst, *errs)
    return CheckResult(
        "residue identities", worst <= 1.0, f"worst error / tolerance = {worst:.3g}"
    )


def check_oracle_equivalence(params: Sequence[NoiseParams]) -> CheckResult:
    cfg = OdeConfig(
        step=ORACLE_STEP, horizon=ORACLE_HORIZON, record_every=ORACLE_RECORD_EVERY
    )
    state0 = SingleQubitState.maximally_coherent()
    traj = integrate_third_order_batch(params, state0, cfg)
    numeric = traj.values / state0.coherence
    worst = 0.0
    for k, p in enumerate(params):
        worst = max(worst, float(np.max(np.abs(numeric[:, k] - build(p)(traj.t)))))
    return CheckResult(
        "RK4 oracle equivalence", worst < ORACLE_TOL, f"max |dD| = {worst:.3e}"
    )


def check_rates(params: Sequence[NoiseParams]) -> CheckResult:
    grid = np.linspace(0.05, 10.0, 40)
    worst = 0.0
    for p in params[:FD_DRAWS]:
        df = build(p)
        scale = max(p.eta, p.chi)
        for t in grid:
            if abs(df(t)) <= 1e-3:
                continue
            phi, gamma = rates(df, t)
            fd_phi, fd_gamma = finite_difference_rates(df, t, FD_STEP)
            worst = max(worst, abs(phi - fd_phi) / scale, abs(gamma - fd_gamma) / scale)
    return CheckResult("rates vs finite differences", worst < 1e-6, f"{worst:.3e}")


def check_markovian_limit() -> CheckResult:
    grid = np.linspace(0.0, 10.0, 501)
    worst = 0.0
    for chi in (0.8, 3.0):
        for a0 in (0.0, 0.5):
            slow = NoiseParams(eta=1.0, chi=chi, kappa=MARKOV_KAPPA, a0=a0)
            exact = markovian_limit(NoiseParams.memoryless(1.0, chi, a0), grid)
            worst = max(worst, float(np.max(np.abs(build(slow)(grid) - exact))))
    return CheckResult("Markovian limit", worst < 1e-3, f"max |dD| = {worst:.3e}")


def _random_density(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def _max_abs(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)))


def check_channel_physics(
    rng: np.random.Generator, params: Sequence[NoiseParams]
) -> CheckResult:
    defect, mismatch, failures = 0.0, 0.0, 0
    for k in range(STATE_DRAWS):
        df = build(params[k % len(params)])
        t = float(rng.uniform(0.0, 10.0))
        d = df(t)
        k1, k2 = kraus_single(d), kraus_operators(d)
        defect = max(defect, k1.completeness_defect(), k2.completeness_defect())
        try:
            one = SingleQubitState(_random_density(rng, 2))
            two = TwoQubitState(_random_density(rng, 4))
            mismatch = max(
                mismatch,
                _max_abs(evolve(one, df, t).matrix, apply_kraus_single(one, k1).matrix),
                _max_abs(dephase_two(two, d).matrix, apply_kraus(two, k2).matrix),
            )
        except DephasingError as exc:
            logger.warning("channel physics draw %d failed: %s", k, exc)
            failures += 1
    ok = defect <= 1e-12 and mismatch <= 1e-12 and failures == 0
    detail = (
        f"completeness {defect:.2e}, Kraus mismatch {mismatch:.2e}, "
        f"invalid {failures}"
    )
    return CheckResult("channel physics", ok, detail)


def random_x_state(rng: np.random.Generator) -> np.ndarray:
    diag = rng.dirichlet(np.ones(4))
    rho = np.diag(diag).astype(complex)
    for i, j in ((0, 3), (1, 2)):
        amp = rng.uniform() * np.sqrt(diag[i] * diag[j])
        z = amp * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
        rho[i, j], rho[j, i] = z, np.conj(z)
    return rho


def check_measures(rng: np.random.Generator, draws: int) -> CheckResult:
    worst_c, worst_b = 0.0, 0.0
    for _ in range(draws):
        rho = random_x_state(rng)
        worst_c = max(worst_c, abs(concurrence_x(rho) - concurrence_wootters(rho)))
        worst_b = max(worst_b, abs(bell_x(rho) - bell_horodecki(rho)))
    ok = worst_c < 1e-10 and worst_b < 1e-10
    return CheckResult(
        "X-state measures", ok, f"concurrence {worst_c:.2e}, Bell {worst_b:.2e}"
    )


def _peak_oracle_error() -> float:
    """Relative gap between RK4 peak sums and the breakpoint scan (N_S, N_T)."""
    params = NoiseParams(eta=1.0, chi=3.0, kappa=1.0, a0=0.5)
    state0 = SingleQubitState.maximally_coherent()
    cfg = OdeConfig(
        step=ORACLE_STEP, horizon=PEAK_HORIZON, record_every=PEAK_RECORD_EVERY
    )
    traj = integrate_third_order_batch([params], state0, cfg)
    squared = np.abs(traj.values[:, 0] / state0.coherence) ** 2
    exact = non_markovianity_pair(build(params), PEAK_HORIZON, tol=1e-2)
    sampled = (peak_revival_sum(squared, 1), peak_revival_sum(squared, 2))
    return max(abs(s - e) / e for s, e in zip(sampled, exact))


def check_non_markovianity() -> CheckResult:
    weak = non_markovianity_single(build(NoiseParams.memoryless(1.0, 0.8)))
    asym, ordering_ok = 0.0, True
    for chi in (0.8, 3.0):
        for kappa in SYMMETRY_KAPPAS:
            values = []
            for a0 in A0_GRID:
                df = build(NoiseParams(eta=1.0, chi=chi, kappa=kappa, a0=float(a0)))
                n_s, n_t = non_markovianity_pair(df)
                if n_s > 1e-8:
                    ordering_ok &= n_t < 2.0 * n_s - 1e-10
                values.append(n_s)
            spread = np.abs(np.subtract(values, values[::-1]))
            asym = max(asym, float(np.max(spread)))
    peak_error = _peak_oracle_error()
    ok = weak == 0.0 and asym < 1e-6 and ordering_ok and peak_error < PEAK_RTOL
    detail = (
        f"N(weak, memoryless) = {weak:.1e}, asymmetry {asym:.1e}, "
        f"N_T < 2 N_S {ordering_ok}, RK4 peak sums rel. error {peak_error:.1e}"
    )
    return CheckResult("non-Markovianity structure", ok, detail)


def first_trough(df: DecoherenceFunction, horizon: float) -> float:
    """|D| at the first local minimum after t = 0."""
    points = breakpoints(df, horizon)
    mags = np.abs(df(points))
    for k in range(1, len(points) - 1):
        if mags[k] <= mags[k - 1] and mags[k] <= mags[k + 1]:
            return float(mags[k])
    return float(mags[-1])


def check_curve_shapes() -> CheckResult:
    stationary = build(NoiseParams(eta=1.0, chi=3.0, kappa=1.0, a0=0.0))
    biased = build(NoiseParams(eta=1.0, chi=3.0, kappa=1.0, a0=0.5))
    extrema = breakpoints(stationary, 40.0)
    zero_revival = float(np.min(np.abs(stationary(extrema))))
    nonzero_revival = first_trough(biased, 40.0)
    bell_pair = CompositeBellParams(c=1.0)
    conc_min = min(measures_at(bell_pair, stationary(t))[0] for t in extrema)
    trend = [
        non_markovianity_single(build(NoiseParams(eta=1.0, chi=3.0, kappa=k, a0=0.5)))
        for k in TREND_KAPPAS
    ]
    monotone = bool(np.all(np.diff(trend) < 0))
    ok = (
        zero_revival < 1e-3
        and nonzero_revival > 0.01
        and conc_min < 1e-6
        and monotone
    )
    detail = (
        f"min|D| stationary {zero_revival:.2e}, first trough biased "
        f"{nonzero_revival:.3f}, N decreasing in kappa {monotone}"
    )
    return CheckResult("curve shapes", ok, detail)


def check_relations(rng: np.random.Generator, draws: int) -> CheckResult:
    worst_rel, worst_cth, worst_r = 0.0, 0.0, 0.0
    for _ in range(draws):
        r = float(rng.uniform(0.3, 1.0))
        theta = float(rng.uniform(0.05, 0.5 * np.pi - 0.05))
        phase = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
        alpha, beta = complex(np.cos(theta)), complex(np.sin(theta) * phase)
        params = ExtendedWernerParams(r=r, alpha=alpha, beta=beta)
        conc, bell = measures_at(params, float(rng.uniform(0.0, 1.0)))
        if conc > 0:
            worst_rel = max(worst_rel, abs(bell - bell_relation(conc, r)))
        c_th = classical_threshold(params)
        if c_th is not None:
            expected = np.sqrt(1.0 - r * r) - 0.5 * (1.0 - r)
            worst_cth = max(worst_cth, abs(c_th - expected))
        r_th = werner_purity_threshold(alpha, beta)
        worst_r = max(worst_r, abs(r_th - 1.0 / (4.0 * abs(alpha * beta) + 1.0)))
    ok = worst_rel < 1e-10 and worst_cth < 1e-8 and worst_r < 1e-8
    detail = f"B-C {worst_rel:.1e}, C_th {worst_cth:.1e}, purity {worst_r:.1e}"
    return CheckResult("relations and thresholds", ok, detail)


def check_convergence() -> CheckResult:
    params = NoiseParams(eta=1.0, chi=3.0, kappa=1.0, a0=0.5)
    ratio = convergence_ratio(params, OdeConfig(step=0.02, horizon=20.0))
    ok = 12.0 <= ratio <= 20.0
    return CheckResult("RK4 convergence order", ok, f"ratio {ratio:.2f}")


def run_selfcheck(
    seed: int = 0, draws: int = 1000, residue_perturbation: float = 0.0
) -> List[CheckResult]:
    """Run every group in a fixed order; a raised library error fails its group."""
    rng = np.random.default_rng(seed)
    params = draw_params(rng, draws)
    groups: List[Tuple[str, Callable[[], CheckResult]]] = [
        (
            "residue identities",
            lambda: check_residue_identities(params, residue_perturbation),
        ),
        ("RK4 oracle equivalence", lambda: check_oracle_equivalence(params)),
        ("rates vs finite differences", lambda: check_rates(params)),
        ("Markovian limit", check_markovian_limit),
        ("channel physics", lambda: check_channel_physics(rng, params)),
        ("X-state measures", lambda: check_measures(rng, draws)),
        ("non-Markovianity structure", check_non_markovianity),
        ("curve shapes", check_curve_shapes),
        ("relations and thresholds", lambda: check_relations(rng, min(draws, 200))),
        ("RK4 convergence order", check_convergence),
    ]
    results = []
    for name, group in groups:
        start = time.perf_counter()
        try:
            result = group()
        except DephasingError as exc:
            logger.error("%s raised %s", name, exc)
            result = CheckResult(name, False, f"{type(exc).__name__}: {exc}")
        logger.info("%s: %.2fs", name, time.perf_counter() - start)
        results.append(result)
    return results


def format_report(results: Sequence[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [
        f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}"
        for r in results
    ]
    passed = sum(r.passed for r in results)
    lines.append(f"{passed}/{len(results)} groups passed")
    return "\n".join(lines)
