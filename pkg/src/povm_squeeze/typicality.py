"""Frequency-typical projectors, conditional typical projectors and typical sets.

A product-basis word ``t^l`` is typical for a spectrum ``r`` when, for every
eigen-index ``t``, ``|N(t|t^l) - l r_t| <= delta sqrt(l) sqrt(r_t (1 - r_t))``.
Degenerate eigenvalues are counted per eigenvector, not merged.
"""
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import kernels
from .linalg import (
    eig_hermitian,
    loewner_leq,
    partial_trace,
    permute_factors,
    support,
    tensor_product,
)

DEFAULT_DIM_CAP = 4096
DEFAULT_WORD_CAP = 65536


class CapExceeded(RuntimeError):
    pass


def _check_cap(q, l, cap, what):
    if q**l > cap:
        raise CapExceeded(f"{what}: {q}^{l} = {q**l} exceeds cap {cap}")


def spectrum_probs(values):
    return np.clip(np.asarray(values, dtype=float), 0.0, 1.0)


@dataclass(frozen=True)
class TypicalProjector:
    """Projector diagonal in a product eigenbasis, stored as a word mask.

    ``bases[k]`` holds the eigenvectors used at position ``k`` as columns;
    ``mask`` runs over all ``d**l`` basis words in lexicographic order.
    """

    l: int
    mask: np.ndarray
    bases: tuple

    @property
    def d(self):
        return self.bases[0].shape[0] if self.bases else 1

    @property
    def rank(self):
        return int(self.mask.sum())

    @property
    def words(self):
        return kernels.all_words(self.d, self.l)[self.mask]

    def basis_matrix(self):
        if not self.bases:
            return np.ones((1, 1), dtype=complex)
        return tensor_product(self.bases)

    def dense(self, cap=DEFAULT_DIM_CAP):
        D = self.d**self.l
        if D > cap:
            raise CapExceeded(f"dense projector of dimension {D} exceeds cap {cap}")
        U = self.basis_matrix()[:, self.mask]
        return U @ U.conj().T


@dataclass(frozen=True)
class TypicalSet:
    delta: float
    l: int
    words: np.ndarray  # (n, l), lexicographic
    weights: np.ndarray  # lambda^l of each word
    mass: float  # S

    def export_lines(self):
        """Words as strings of base-m digits, one per line."""
        return "\n".join("".join(str(int(x)) for x in w) for w in self.words)


def typical_projector(rho, l, delta, cap=DEFAULT_DIM_CAP, spectrum=None):
    spec = eig_hermitian(rho) if spectrum is None else spectrum
    d = len(spec.values)
    _check_cap(d, l, cap, "typical projector enumeration")
    mask = kernels.typical_mask(spectrum_probs(spec.values), l, delta)
    return TypicalProjector(int(l), mask, tuple(spec.vectors for _ in range(l)))


def conditional_masks(spectra, words, delta):
    """Masks of the conditional typical projectors for each outcome word."""
    letter_probs = np.array([spectrum_probs(s.values) for s in spectra])
    return kernels.conditional_typical_masks(words, letter_probs, delta)


def conditional_typical_projector(spectra, word, delta, cap=DEFAULT_DIM_CAP):
    """Tensor product over letters j of the typical projector of state j on positions {k: word_k = j}.

    ``spectra[j]`` is the (canonically ordered) eigendecomposition of the
    state attached to letter ``j``.
    """
    word = np.asarray(word, dtype=np.int64)
    d = len(spectra[0].values)
    _check_cap(d, len(word), cap, "conditional typical projector enumeration")
    mask = conditional_masks(spectra, word[None, :], delta)[0]
    return TypicalProjector(len(word), mask, tuple(spectra[j].vectors for j in word))


def typical_sequences(lam, l, delta, cap=DEFAULT_WORD_CAP):
    lam = np.asarray(lam, dtype=float)
    _check_cap(len(lam), l, cap, "typical sequence enumeration")
    mask = kernels.typical_mask(lam, l, delta)
    words = kernels.all_words(len(lam), l)[mask]
    weights = kernels.word_weights(words, lam)
    return TypicalSet(float(delta), int(l), words, weights, float(weights.sum()))


def empirical_distribution(word, m):
    word = np.asarray(word, dtype=np.int64)
    if np.any(word < 0) or np.any(word >= m):
        raise ValueError("letter out of range")
    return np.bincount(word, minlength=m) / len(word)


def _product_mass(mask, bases_values, l):
    """sum over selected basis words of prod_k values[k][t_k]."""
    d = len(bases_values[0])
    words = kernels.all_words(d, l)[mask]
    acc = np.ones(len(words))
    for k in range(l):
        acc = acc * np.asarray(bases_values[k])[words[:, k]]
    return float(acc.sum())


def verify_projector_bounds(rho, hats, l, delta, words=None, word_cap=DEFAULT_WORD_CAP):
    """Exact typical-projector weights against the Chebyshev-type bounds.

    ``hats`` is the canonical ensemble attached to ``rho``. Returns a dict
    with the exact quantities and pass flags; ``log_trace_ratio`` records
    (log2 Tr Pi - l H(rho)) / sqrt(l) without a verdict.
    """
    spec = eig_hermitian(rho)
    r = spectrum_probs(spec.values)
    d = len(r)
    m = len(hats)
    P = typical_projector(rho, l, delta, spectrum=spec)
    mass = _product_mass(P.mask, [r] * l, l)
    H = float(-np.sum(r[r > 0] * np.log2(r[r > 0])))
    spectra = [eig_hermitian(s) for s in hats.states]
    if words is None:
        _check_cap(m, l, word_cap, "conditional bound word enumeration")
        words = kernels.all_words(m, l)
    words = np.asarray(words, dtype=np.int64)
    masks = conditional_masks(spectra, words, delta)
    cond_mass = np.array(
        [
            _product_mass(masks[i], [spectrum_probs(spectra[j].values) for j in w], l)
            for i, w in enumerate(words)
        ]
    )
    state_mass_bound = 1.0 - d / delta**2
    conditional_mass_bound = 1.0 - m * d / delta**2
    return {
        "l": int(l),
        "delta": float(delta),
        "trace_pi": P.rank,
        "mass": mass,
        "state_mass_bound": state_mass_bound,
        "state_mass_pass": bool(mass >= state_mass_bound - 1e-12),
        "conditional_mass_min": float(cond_mass.min()),
        "conditional_mass_bound": conditional_mass_bound,
        "conditional_mass_pass": bool(np.all(cond_mass >= conditional_mass_bound - 1e-12)),
        "log_trace_ratio": (np.log2(P.rank) - l * H) / np.sqrt(l) if P.rank else float("-inf"),
    }


class DeletionCheck(NamedTuple):
    applicable: bool
    holds: Optional[bool]
    reason: str


def _insert_identity(P_short, d, l, k):
    """(P_short on l-1 factors) ⊗ I placed at position k."""
    full = np.kron(P_short, np.eye(d))
    # factor order after kron: [0..l-2 short positions, new]; move 'new' to k
    order = list(range(l - 1))
    order.insert(k, l - 1)
    return permute_factors(full, [d] * l, order)


def verify_deletion_monotonicity(rho, l, delta, k, hats=None, word=None, tol=1e-9):
    """Check Pi^l_delta >= Pi^{[l]-k}_{delta'} ⊗ I with delta' = delta - 1/r.

    Without ``hats``/``word`` this is the unconditional projector of ``rho``
    (on its support). With them, the conditional projector of the word.
    """
    if not 0 <= k < l:
        raise ValueError("position out of range")
    if hats is None:
        V = support(rho)
        rho_s = V.conj().T @ rho @ V
        spec = eig_hermitian(rho_s)
        r = float(spec.values.min())
    else:
        spectra = [eig_hermitian(s) for s in hats.states]
        r = float(min(s.values.min() for s in spectra))
    if r <= 0 or delta < 2.0 / r:
        return DeletionCheck(False, None, f"precondition delta >= 2/r fails (r = {r:.3g})")
    delta_p = delta - 1.0 / r
    if hats is None:
        d = len(spec.values)
        big = typical_projector(rho_s, l, delta, spectrum=spec).dense()
        short = typical_projector(rho_s, l - 1, delta_p, spectrum=spec).dense() if l > 1 else np.eye(1)
    else:
        word = np.asarray(word, dtype=np.int64)
        d = len(spectra[0].values)
        big = conditional_typical_projector(spectra, word, delta).dense()
        rest = np.delete(word, k)
        short = conditional_typical_projector(spectra, rest, delta_p).dense() if l > 1 else np.eye(1)
    small = _insert_identity(short, d, l, k)
    return DeletionCheck(True, bool(loewner_leq(small, big, tol)), "")


class LemmaCheck(NamedTuple):
    premise: bool
    holds: Optional[bool]


def partial_trace_projection_lemma_check(C, Pi, Pi0, dims, tol=1e-9):
    """Tr_2(Pi C Pi) >= Tr_2((I⊗Pi0) C (I⊗Pi0)) given Pi >= I⊗Pi0."""
    d1, d2 = dims
    Q = np.kron(np.eye(d1), Pi0)
    if not loewner_leq(Q, Pi, tol):
        return LemmaCheck(False, None)
    lhs = partial_trace(Pi @ C @ Pi, dims, [1])
    rhs = partial_trace(Q @ C @ Q, dims, [1])
    return LemmaCheck(True, bool(loewner_leq(rhs, lhs, tol)))
