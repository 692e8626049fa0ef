import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from rtn_dephase.errors import InvalidStateError
from rtn_dephase.noise_model import NoiseParams
from rtn_dephase.selfcheck import first_trough, random_x_state
from rtn_dephase.single_qubit import non_markovianity_pair
from rtn_dephase.spectral import build
from rtn_dephase.two_qubit import (
    TSIRELSON,
    CompositeBellParams,
    ExtendedWernerParams,
    TwoQubitState,
    apply_kraus,
    bell_chsh,
    bell_horodecki,
    bell_relation,
    bell_x,
    cbs_series,
    classical_threshold,
    closed_form,
    concurrence,
    concurrence_wootters,
    concurrence_x,
    correlation_matrix,
    dephase_two,
    entanglement_threshold,
    evolve_two,
    ews_series,
    family_state,
    kraus_operators,
    literal_thresholds,
    literal_variant,
    measures_at,
    non_markovianity_two,
    nonlocality_threshold,
    werner_purity_threshold,
)

STRONG = NoiseParams(eta=1.0, chi=3.0, kappa=1.0, a0=0.5)
HALF = 0.5**0.5
GRID = np.linspace(0.0, 10.0, 101)


def random_density(rng):
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


@pytest.mark.parametrize("kind", ["psi+", "psi-", "phi+", "phi-"])
def test_bell_states_are_maximally_entangled(kind):
    """Bell states have C = 1 and B = 2 sqrt 2."""
    state = TwoQubitState.bell(kind)
    assert concurrence(state) == pytest.approx(1.0, abs=1e-12)
    assert bell_chsh(state) == pytest.approx(TSIRELSON, abs=1e-12)


def test_unknown_bell_label():
    """Only the four Bell labels are accepted."""
    with pytest.raises(InvalidStateError):
        TwoQubitState.bell("omega")


def test_maximally_mixed_state_is_classical():
    """I/4 has no entanglement and no correlations."""
    state = TwoQubitState.maximally_mixed()
    assert concurrence(state) == 0.0
    assert bell_chsh(state) == pytest.approx(0.0, abs=1e-14)


def test_correlation_matrix_of_bell_state():
    """(|00> + |11>)/sqrt 2 has T = diag(1, -1, 1)."""
    t = correlation_matrix(TwoQubitState.bell("psi+"))
    assert_allclose(t, np.diag([1.0, -1.0, 1.0]), atol=1e-14)


def test_product_state_is_unentangled():
    """A non-X product state goes through the Wootters path."""
    plus = np.array([1.0, 1.0]) / np.sqrt(2.0)
    zero = np.array([0.0, 1.0])
    state = TwoQubitState.from_ket(np.kron(zero, plus))
    assert not state.is_x_structured
    assert concurrence(state) == pytest.approx(0.0, abs=1e-7)
    assert bell_chsh(state) <= 2.0 + 1e-12


def test_channel_element_rules():
    """Single flips scale by D, |10><01| by |D|^2 and |11><00| by D^2."""
    rng = np.random.default_rng(5)
    state = TwoQubitState(random_density(rng))
    d = 0.6 * np.exp(0.4j)
    out = dephase_two(state, d).matrix
    rho = state.matrix
    assert out[3, 0] == pytest.approx(d * d * rho[3, 0])
    assert out[0, 3] == pytest.approx(np.conj(d * d) * rho[0, 3])
    assert out[1, 2] == pytest.approx(abs(d) ** 2 * rho[1, 2])
    assert out[1, 0] == pytest.approx(d * rho[1, 0])
    assert_allclose(np.diag(out), np.diag(rho))


def test_kraus_operators_match_channel():
    """Four tensor-product Kraus operators reproduce the Hadamard form."""
    rng = np.random.default_rng(6)
    df = build(STRONG)
    for t in (0.4, 2.2, 6.0):
        d = df(t)
        kraus = kraus_operators(d)
        assert len(kraus.operators) == 4
        assert kraus.completeness_defect() < 1e-12
        state = TwoQubitState(random_density(rng))
        assert_allclose(
            apply_kraus(state, kraus).matrix, dephase_two(state, d).matrix, atol=1e-12
        )


def test_evolution_preserves_x_structure():
    """X states stay X states under the channel."""
    rng = np.random.default_rng(7)
    df = build(STRONG)
    state0 = TwoQubitState(random_x_state(rng))
    for t in GRID[::10]:
        assert evolve_two(state0, df, t).is_x_structured


def test_x_state_closed_forms_match_brute_force():
    """Closed-form concurrence and Bell function agree with the general ones."""
    rng = np.random.default_rng(8)
    for _ in range(200):
        rho = random_x_state(rng)
        assert concurrence_x(rho) == pytest.approx(concurrence_wootters(rho), abs=1e-10)
        assert bell_x(rho) == pytest.approx(bell_horodecki(rho), abs=1e-10)


def test_invalid_two_qubit_state():
    """Non-normalised matrices are rejected."""
    with pytest.raises(InvalidStateError):
        TwoQubitState(np.eye(4))


def test_werner_params_must_be_normalised():
    """|alpha|^2 + |beta|^2 = 1 is enforced."""
    with pytest.raises(ValidationError):
        ExtendedWernerParams(r=1.0, alpha=1.0, beta=1.0)
    with pytest.raises(ValidationError):
        CompositeBellParams(c=1.5)


@pytest.mark.parametrize("c", [-1.0, -0.4, 0.0, 0.5, 1.0])
def test_cbs_closed_form(c):
    """Matrix measures of composite Bell states follow their closed forms."""
    params = CompositeBellParams(c=c)
    for mag in np.linspace(0.0, 1.0, 11):
        for phase in (0.0, 1.3):
            conc, bell = measures_at(params, mag * np.exp(1j * phase))
            expected_c, expected_b = closed_form(params, mag)
            assert conc == pytest.approx(expected_c, abs=1e-10)
            assert bell == pytest.approx(expected_b, abs=1e-10)


@pytest.mark.parametrize("r", [0.2, 0.6, 1.0])
@pytest.mark.parametrize("family", ["psi", "phi"])
def test_ews_closed_form(r, family):
    """Matrix measures of extended Werner states follow their closed forms."""
    params = ExtendedWernerParams(
        r=r,
        alpha=complex(np.cos(0.4)),
        beta=complex(np.sin(0.4) * np.exp(0.7j)),
        family=family,
    )
    for mag in np.linspace(0.0, 1.0, 11):
        conc, bell = measures_at(params, mag)
        expected_c, expected_b = closed_form(params, mag)
        assert conc == pytest.approx(expected_c, abs=1e-10)
        assert bell == pytest.approx(expected_b, abs=1e-10)


def test_ews_pure_bell_start():
    """r = 1, |alpha| = |beta| = 1/sqrt 2 starts with C = 1 and B = 2 sqrt 2."""
    params = ExtendedWernerParams(r=1.0, alpha=HALF, beta=HALF)
    conc, bell = measures_at(params, 1.0)
    assert conc == pytest.approx(1.0, abs=1e-12)
    assert bell == pytest.approx(TSIRELSON, abs=1e-12)


def test_bell_concurrence_relation():
    """B = 2 sqrt(r^2 + (C + (1-r)/2)^2) while C > 0."""
    params = ExtendedWernerParams(r=0.8, alpha=HALF, beta=HALF * 1j)
    for mag in np.linspace(0.6, 1.0, 9):
        conc, bell = measures_at(params, mag)
        assert conc > 0
        assert bell == pytest.approx(bell_relation(conc, 0.8), abs=1e-10)


def test_cbs_thresholds():
    """|D| thresholds for entanglement and nonlocality of a composite Bell state."""
    params = CompositeBellParams(c=0.5)
    ent = entanglement_threshold(params)
    assert ent == pytest.approx(np.sqrt(0.5 / 1.5))
    assert measures_at(params, ent + 1e-6)[0] > 0
    assert measures_at(params, ent - 1e-6)[0] == 0.0
    assert nonlocality_threshold(params) == pytest.approx(0.75**0.25, abs=1e-9)


def test_never_entangled_family():
    """c = 0 stays separable for every |D| <= 1."""
    params = CompositeBellParams(c=0.0)
    assert entanglement_threshold(params) is None
    series = cbs_series(params, build(STRONG), GRID)
    assert np.max(series.column("concurrence")) <= 1e-12
    assert series.metadata["thresholds"]["never_entangled"] is True


def test_ews_thresholds_and_classical_concurrence():
    """EWS thresholds and C at the B = 2 boundary."""
    r = 0.9
    params = ExtendedWernerParams(r=r, alpha=HALF, beta=HALF)
    assert entanglement_threshold(params) == pytest.approx(
        0.5 * np.sqrt((1 - r) / (r * 0.5))
    )
    assert nonlocality_threshold(params) == pytest.approx(
        (1 - r * r) ** 0.25 / np.sqrt(2 * r * 0.5), abs=1e-9
    )
    assert classical_threshold(params) == pytest.approx(
        np.sqrt(1 - r * r) - 0.5 * (1 - r), abs=1e-8
    )


def test_werner_purity_threshold():
    """The undecohered Werner state is entangled above r = 1/(4|ab| + 1)."""
    assert werner_purity_threshold(HALF, HALF) == pytest.approx(1.0 / 3.0, abs=1e-10)
    alpha, beta = float(np.cos(0.3)), float(np.sin(0.3))
    expected = 1.0 / (4.0 * abs(alpha * beta) + 1.0)
    assert werner_purity_threshold(alpha, beta, "phi") == pytest.approx(
        expected, abs=1e-10
    )
    assert werner_purity_threshold(1.0, 0.0) is None


def test_literal_variants():
    """Literal family formulas differ from the matrix values as documented."""
    cbs = CompositeBellParams(c=1.0)
    for mag in (0.3, 0.9):
        c_matrix, b_matrix = closed_form(cbs, mag)
        c_literal, b_literal = literal_variant(cbs, mag)
        assert c_literal == pytest.approx(2.0 * c_matrix)
        assert b_literal == pytest.approx(2.0 * b_matrix)
    ews = ExtendedWernerParams(r=1.0, alpha=HALF, beta=HALF)
    assert literal_variant(ews, 0.7) == pytest.approx(closed_form(ews, 0.7))


def test_literal_thresholds():
    """Uncorrected thresholds, including the |c| > 1/2 shortcut."""
    assert literal_thresholds(CompositeBellParams(c=0.8)).nonlocality == 0.0
    assert literal_thresholds(CompositeBellParams(c=0.3)).nonlocality == pytest.approx(
        (0.5 - 0.09) ** 0.25
    )
    ews = literal_thresholds(ExtendedWernerParams(r=0.5, alpha=HALF, beta=HALF))
    assert ews.entanglement == pytest.approx(0.5 * np.sqrt(0.5 / 0.5))


def test_zero_and_nonzero_revivals():
    """Stationary noise kills CBS entanglement at the zeros of D; bias does not."""
    params = CompositeBellParams(c=1.0)
    fine = np.linspace(0.0, 10.0, 20001)
    stationary = cbs_series(params, build(STRONG.replace(a0=0.0)), fine)
    assert stationary.column("concurrence").min() < 1e-5
    trough = first_trough(build(STRONG), 40.0)
    assert measures_at(params, trough)[0] > 1e-4


def test_series_respect_tsirelson_bound():
    """The Bell column never exceeds 2 sqrt 2."""
    df = build(STRONG)
    for series in (
        cbs_series(CompositeBellParams(c=-1.0), df, GRID, workers=2),
        ews_series(ExtendedWernerParams(r=1.0, alpha=HALF, beta=HALF), df, GRID),
    ):
        assert series.column("bell").max() <= TSIRELSON + 1e-9
        assert series.columns[0] == "t"
        assert len(series) == GRID.size


def test_family_state_matches_evolution():
    """family_state(p, D(t)) is the evolved initial family member."""
    params = ExtendedWernerParams(r=0.7, alpha=HALF, beta=-HALF, family="phi")
    df = build(STRONG)
    start = family_state(params, 1.0)
    assert_allclose(
        family_state(params, df(3.0)).matrix,
        evolve_two(start, df, 3.0).matrix,
        atol=1e-14,
    )


def test_two_qubit_non_markovianity():
    """N_T is the power-2 increase sum."""
    df = build(STRONG)
    assert non_markovianity_two(df) == pytest.approx(
        non_markovianity_pair(df)[1], abs=1e-7
    )


if __name__ == "__main__":
    pytest.main([__file__])
