"""States, ensembles, POVMs and entropies.

All logarithms are base 2.
"""
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    as_hermitian,
    eig_hermitian,
    is_psd,
    min_eig,
    op_inv_sqrt_on_support,
    op_sqrt,
    operator_norm,
)

PROB_TOL = 1e-10
POVM_TOL = 1e-9
PSD_TOL = 1e-10
WEIGHT_TOL = 1e-12


class InvalidStateError(ValueError):
    pass


class InvalidPovmError(ValueError):
    pass


def shannon_entropy(p):
    """Shannon entropy in bits, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def check_density(rho, tol=PROB_TOL):
    """Validate a density matrix and return it as a Hermitian array."""
    rho = as_hermitian(rho)
    if abs(np.trace(rho).real - 1.0) > tol:
        raise InvalidStateError(f"trace {np.trace(rho).real:.12g} differs from 1")
    if not is_psd(rho, PSD_TOL):
        raise InvalidStateError("state is not positive semidefinite")
    return rho


def von_neumann_entropy(rho):
    rho = check_density(rho)
    w = np.clip(np.linalg.eigvalsh(rho), 0.0, None)
    return shannon_entropy(w)


def _entropy_unchecked(rho):
    w = np.clip(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)), 0.0, None)
    return shannon_entropy(w)


@dataclass(frozen=True)
class Ensemble:
    """States ``states[i]`` occurring with probability ``probs[i]``."""

    states: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.complex128)
        probs = np.asarray(self.probs, dtype=float)
        if states.ndim != 3 or states.shape[1] != states.shape[2]:
            raise InvalidStateError("states must have shape (n, d, d)")
        if len(states) != len(probs):
            raise InvalidStateError("number of states and probabilities differ")
        if np.any(probs < -PROB_TOL):
            raise InvalidStateError("negative probability")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise InvalidStateError(f"probabilities sum to {probs.sum():.12g}")
        for s in states:
            check_density(s)
        states = 0.5 * (states + states.conj().transpose(0, 2, 1))
        states.setflags(write=False)
        probs = np.clip(probs, 0.0, None)
        probs.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "probs", probs)

    @property
    def dim(self):
        return self.states.shape[1]

    def __len__(self):
        return len(self.probs)


@dataclass(frozen=True)
class CanonicalEnsemble(Ensemble):
    """Canonical ensemble of (rho, a); ``kept[i]`` is the POVM index of state ``i``."""

    kept: tuple = ()
    dropped: tuple = ()


@dataclass(frozen=True)
class SubPovm:
    """PSD operators whose sum is at most the identity."""

    elements: np.ndarray

    def __post_init__(self):
        el = np.asarray(self.elements, dtype=np.complex128)
        if el.ndim != 3 or el.shape[1] != el.shape[2]:
            raise InvalidPovmError("elements must have shape (m, d, d)")
        el = 0.5 * (el + el.conj().transpose(0, 2, 1))
        for j, e in enumerate(el):
            if min_eig(e) < -PSD_TOL:
                raise InvalidPovmError(f"element {j} is not positive semidefinite")
        self._check_sum(el.sum(axis=0))
        el.setflags(write=False)
        object.__setattr__(self, "elements", el)

    def _check_sum(self, total):
        d = total.shape[0]
        if min_eig(np.eye(d) - total) < -POVM_TOL:
            raise InvalidPovmError("sum of elements exceeds the identity")

    @property
    def dim(self):
        return self.elements.shape[1]

    def __len__(self):
        return len(self.elements)

    def __getitem__(self, j):
        return self.elements[j]


@dataclass(frozen=True)
class Povm(SubPovm):
    """PSD operators summing to the identity."""

    def _check_sum(self, total):
        d = total.shape[0]
        if operator_norm(total - np.eye(d)) > POVM_TOL:
            raise InvalidPovmError(
                f"completeness violated: |sum - I| = {operator_norm(total - np.eye(d)):.3g}"
            )


def check_fidelity_matrix(F, shape=None):
    F = np.asarray(F, dtype=float)
    if F.ndim != 2:
        raise ValueError("fidelity matrix must be two-dimensional")
    if np.any(np.abs(F) > 1.0 + 1e-12):
        raise ValueError("fidelity entries must satisfy |F_ij| <= 1")
    if shape is not None and F.shape != tuple(shape):
        raise ValueError(f"fidelity matrix shape {F.shape} != {tuple(shape)}")
    return F


@dataclass(frozen=True)
class KrausInstrument:
    """Per outcome ``j`` a list of Kraus operators ``V_{j nu}``."""

    kraus: tuple = field(default_factory=tuple)

    def __post_init__(self):
        ops = tuple(tuple(np.asarray(V, dtype=np.complex128) for V in row) for row in self.kraus)
        object.__setattr__(self, "kraus", ops)
        # the associated POVM must be valid
        Povm(self.povm_elements())

    def povm_elements(self):
        return np.array([sum(V.conj().T @ V for V in row) for row in self.kraus])

    def povm(self):
        return Povm(self.povm_elements())

    @classmethod
    def luders(cls, povm):
        """Single-Kraus instrument with ``V_j = sqrt(a_j)``."""
        return cls(tuple((op_sqrt(a),) for a in povm.elements))


def ensemble_average(e: Ensemble):
    return np.einsum("i,ijk->jk", e.probs, e.states)


def canonical_ensemble(rho, a: Povm, weight_tol=WEIGHT_TOL):
    """States sqrt(rho) a_j sqrt(rho) / lambda_j with weights lambda_j = Tr(rho a_j).

    Outcomes with weight at most ``weight_tol`` are dropped and listed in
    ``dropped``.
    """
    rho = check_density(rho)
    if a.dim != rho.shape[0]:
        raise ValueError("state and POVM dimensions differ")
    s = op_sqrt(rho)
    lam = np.einsum("ij,mji->m", rho, a.elements).real
    kept = tuple(int(j) for j in np.flatnonzero(lam > weight_tol))
    dropped = tuple(int(j) for j in np.flatnonzero(lam <= weight_tol))
    if not kept:
        raise ValueError("all outcomes have weight below weight_tol")
    states = np.array([s @ a.elements[j] @ s / lam[j] for j in kept])
    probs = lam[list(kept)]
    probs = probs / probs.sum()
    return CanonicalEnsemble(states, probs, kept=kept, dropped=dropped)


def pretty_good_measurement(e: Ensemble, rank_tol=None):
    """Square-root measurement S_i = rho^{-1/2} p_i rho_i rho^{-1/2}.

    For rank-deficient averages the result is a POVM on the support of the
    average state (it sums to the support projector).
    """
    rho = ensemble_average(e)
    r = op_inv_sqrt_on_support(rho, rank_tol)
    elements = np.array([r @ (p * s) @ r for p, s in zip(e.probs, e.states)])
    total = elements.sum(axis=0)
    if operator_norm(total - np.eye(len(total))) <= POVM_TOL:
        return Povm(elements)
    return SubPovm(elements)


def entropy_defect(e: Ensemble):
    """H(average) - sum_j p_j H(rho_j) in bits."""
    return _entropy_unchecked(ensemble_average(e)) - conditional_entropy(e)


def conditional_entropy(e: Ensemble):
    return float(sum(p * _entropy_unchecked(s) for p, s in zip(e.probs, e.states)))


def single_letter_fidelity(e: Ensemble, F, a: SubPovm):
    """sum_ij p_i Tr(rho_i a_j) F_ij."""
    F = check_fidelity_matrix(F, (len(e), len(a)))
    probs = np.einsum("ijk,mkj->im", e.states, a.elements).real
    return float(np.sum(e.probs[:, None] * probs * F))


def post_measurement_state(ins: KrausInstrument, rho_in, j, weight_tol=WEIGHT_TOL):
    """Normalised output state of outcome ``j`` and its probability."""
    rho_in = check_density(rho_in)
    a_j = sum(V.conj().T @ V for V in ins.kraus[j])
    prob = float(np.trace(rho_in @ a_j).real)
    if prob <= weight_tol:
        raise ValueError(f"outcome {j} is unreachable (probability {prob:.3g})")
    out = sum(V @ rho_in @ V.conj().T for V in ins.kraus[j]) / prob
    return 0.5 * (out + out.conj().T), prob


def spectrum_conjugacy_check(rho, a_j):
    """Spectra of sqrt(rho) a sqrt(rho) and sqrt(a) rho sqrt(a) and their largest gap."""
    sr = op_sqrt(rho)
    sa = op_sqrt(a_j)
    s1 = eig_hermitian(sr @ a_j @ sr).values
    s2 = eig_hermitian(sa @ rho @ sa).values
    return s1, s2, float(np.max(np.abs(s1 - s2)))


def random_povm(d, m, rng):
    """Random full-rank POVM with ``m`` elements: G_j normalised by (sum G)^{-1/2}."""
    G = []
    for _ in range(m):
        X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        G.append(X @ X.conj().T)
    G = np.array(G)
    r = op_inv_sqrt_on_support(G.sum(axis=0))
    return Povm(np.array([r @ g @ r for g in G]))


def random_ensemble(d, n, rng, pure=False):
    from .linalg import random_density

    states = np.array([random_density(d, rng, rank=1 if pure else None) for _ in range(n)])
    p = rng.dirichlet(np.ones(n))
    return Ensemble(states, p)
