import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from povm_squeeze.linalg import random_density, random_unitary
from povm_squeeze.quantum import (
    Ensemble,
    InvalidPovmError,
    InvalidStateError,
    KrausInstrument,
    Povm,
    SubPovm,
    canonical_ensemble,
    ensemble_average,
    entropy_defect,
    post_measurement_state,
    pretty_good_measurement,
    random_ensemble,
    random_povm,
    shannon_entropy,
    single_letter_fidelity,
    spectrum_conjugacy_check,
    von_neumann_entropy,
)


def h2(p):
    return -p * np.log2(p) - (1 - p) * np.log2(1 - p)


def test_entropies_known():
    assert von_neumann_entropy(np.eye(2) / 2) == pytest.approx(1.0)
    assert von_neumann_entropy(np.diag([1.0, 0.0])) == 0.0
    assert von_neumann_entropy(np.eye(4) / 4) == pytest.approx(2.0)
    assert shannon_entropy([0.5, 0.5, 0.0]) == pytest.approx(1.0)


def test_density_validation():
    with pytest.raises(InvalidStateError):
        von_neumann_entropy(np.diag([0.6, 0.6]))
    with pytest.raises(InvalidStateError):
        von_neumann_entropy(np.diag([1.2, -0.2]))


def test_povm_validation():
    Povm(np.array([np.eye(2)]))
    with pytest.raises(InvalidPovmError, match="completeness"):
        Povm(np.array([0.9 * np.eye(2)]))
    with pytest.raises(InvalidPovmError):
        Povm(np.array([np.diag([1.5, 0.5]), np.diag([-0.5, 0.5])]))
    SubPovm(np.array([0.9 * np.eye(2)]))
    with pytest.raises(InvalidPovmError):
        SubPovm(np.array([1.1 * np.eye(2)]))


def test_ensemble_validation():
    with pytest.raises(InvalidStateError, match="probabilit"):
        Ensemble(np.array([np.eye(2) / 2, np.eye(2) / 2]), np.array([1.2, -0.2]))
    with pytest.raises(InvalidStateError):
        Ensemble(np.array([np.eye(2) / 2]), np.array([0.5]))


def test_canonical_ensemble_trivial_povm():
    rho = random_density(3, np.random.default_rng(0))
    c = canonical_ensemble(rho, Povm(np.eye(3)[None]))
    assert np.allclose(c.states[0], rho)
    assert np.allclose(c.probs, [1.0])
    assert entropy_defect(c) == pytest.approx(0.0, abs=1e-12)


def test_canonical_ensemble_projective_maximally_mixed():
    a = Povm(np.array([np.diag([1.0, 0]), np.diag([0, 1.0])]))
    c = canonical_ensemble(np.eye(2) / 2, a)
    assert np.allclose(c.probs, [0.5, 0.5])
    assert entropy_defect(c) == pytest.approx(1.0)


def test_canonical_ensemble_drops_zero_weight():
    rho = np.diag([1.0, 0.0])
    a = Povm(np.array([np.diag([1.0, 0]), np.diag([0, 1.0])]))
    c = canonical_ensemble(rho, a)
    assert c.kept == (0,) and c.dropped == (1,)


def test_rank2_defect_closed_form():
    a0 = np.diag([0.7, 0.3])
    c = canonical_ensemble(np.eye(2) / 2, Povm(np.array([a0, np.eye(2) - a0])))
    assert entropy_defect(c) == pytest.approx(1 - h2(0.7), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=2, max_value=4), st.integers(min_value=2, max_value=4), st.integers(0, 2**32 - 1))
def test_canonical_average_and_pgm_inverse(d, m, seed):
    rng = np.random.default_rng(seed)
    rho = random_density(d, rng)
    a = random_povm(d, m, rng)
    c = canonical_ensemble(rho, a)
    assert np.allclose(ensemble_average(c), rho, atol=1e-10)
    # square-root measurement of the canonical ensemble recovers a
    S = pretty_good_measurement(c)
    assert isinstance(S, Povm)
    assert np.allclose(S.elements, a.elements[list(c.kept)], atol=1e-8)
    assert 0 <= entropy_defect(c) <= von_neumann_entropy(rho) + 1e-12


def test_pgm_rank_deficient_sums_to_support():
    e = Ensemble(np.array([np.diag([1.0, 0, 0]), np.diag([0, 1.0, 0])]).astype(complex), np.array([0.5, 0.5]))
    S = pretty_good_measurement(e)
    assert isinstance(S, SubPovm) and not isinstance(S, Povm)
    assert np.allclose(S.elements.sum(axis=0), np.diag([1, 1, 0]))


def test_single_letter_fidelity():
    e = Ensemble(np.array([np.diag([1.0, 0]), np.diag([0, 1.0])]).astype(complex), np.array([0.3, 0.7]))
    a = Povm(np.array([np.diag([1.0, 0]), np.diag([0, 1.0])]))
    assert single_letter_fidelity(e, np.eye(2), a) == pytest.approx(1.0)
    assert single_letter_fidelity(e, np.full((2, 2), 0.4), a) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        single_letter_fidelity(e, np.eye(3), a)


def test_luders_post_measurement_entropy_matches_canonical():
    rng = np.random.default_rng(7)
    rho = random_density(3, rng)
    a = random_povm(3, 3, rng)
    ins = KrausInstrument.luders(a)
    c = canonical_ensemble(rho, a)
    for idx, j in enumerate(c.kept):
        sig, p = post_measurement_state(ins, rho, j)
        assert p == pytest.approx(c.probs[idx] * 1.0, rel=1e-10)
        assert von_neumann_entropy(sig) == pytest.approx(von_neumann_entropy(c.states[idx]), abs=1e-8)


def test_post_measurement_unreachable():
    ins = KrausInstrument.luders(Povm(np.array([np.diag([1.0, 0]), np.diag([0, 1.0])])))
    with pytest.raises(ValueError, match="unreachable"):
        post_measurement_state(ins, np.diag([1.0, 0]), 1)


def test_kraus_instrument_rejects_incomplete():
    with pytest.raises(InvalidPovmError):
        KrausInstrument(((0.5 * np.eye(2),),))


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=2, max_value=4), st.integers(0, 2**32 - 1))
def test_spectrum_conjugacy(d, seed):
    rng = np.random.default_rng(seed)
    rho = random_density(d, rng)
    a = random_povm(d, 2, rng)
    _, _, gap = spectrum_conjugacy_check(rho, a.elements[0])
    assert gap <= 1e-9


def test_random_ensemble_average_is_state():
    e = random_ensemble(3, 4, np.random.default_rng(3), pure=True)
    assert np.isclose(np.trace(ensemble_average(e)).real, 1.0)
    for s in e.states:
        assert np.isclose(np.trace(s @ s).real, 1.0)


def test_unitary_invariance_of_defect():
    rng = np.random.default_rng(11)
    rho = random_density(3, rng)
    a = random_povm(3, 3, rng)
    U = random_unitary(3, rng)
    d1 = entropy_defect(canonical_ensemble(rho, a))
    d2 = entropy_defect(canonical_ensemble(U @ rho @ U.conj().T, Povm(U @ a.elements @ U.conj().T)))
    assert d1 == pytest.approx(d2, abs=1e-10)
