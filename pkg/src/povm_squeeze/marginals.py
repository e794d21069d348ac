"""Word-labelled POVMs on H^{⊗l}, their single-site and K-subset marginals,
and the closeness conditions C0-C5 against a single-letter POVM.
"""
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import kernels
from .linalg import (
    op_inv_sqrt_on_support,
    op_sqrt,
    operator_norm,
    partial_trace,
    tensor_power,
    tensor_product,
    trace_norm,
)
from .quantum import Ensemble, Povm, check_fidelity_matrix


@dataclass(frozen=True)
class WordPovm:
    """Elements ``elements[i]`` labelled by guess words ``words[i]``.

    ``counts[i]`` is the number of identical outcomes merged into element
    ``i`` (used only for bookkeeping of the draw count; the element itself
    already carries the merged weight).
    """

    words: np.ndarray
    elements: np.ndarray
    m: int
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        words = np.asarray(self.words, dtype=np.int64)
        if words.ndim != 2:
            raise ValueError("words must be a (n, l) array")
        if len(words) != len(self.elements):
            raise ValueError("one word per element required")
        if np.any(words < 0) or np.any(words >= self.m):
            raise ValueError("letter out of range")
        object.__setattr__(self, "words", words)
        counts = np.ones(len(words), dtype=np.int64) if self.counts is None else np.asarray(self.counts)
        object.__setattr__(self, "counts", counts)

    @property
    def l(self):
        return self.words.shape[1]

    @property
    def outcomes(self):
        return len(self.words)

    def total(self):
        return self.elements.sum(axis=0)


def product_povm_element(a, word):
    """a_{j_1} ⊗ ... ⊗ a_{j_l}."""
    el = a.elements if hasattr(a, "elements") else np.asarray(a)
    return tensor_product([el[j] for j in word])


def product_povm(a, l):
    el = a.elements if hasattr(a, "elements") else np.asarray(a)
    m = len(el)
    words = kernels.all_words(m, l)
    return WordPovm(words, np.array([product_povm_element(el, w) for w in words]), m)


def site_reductions(Y, d, l):
    """Tr_{≠k} of each operator in the stack ``Y``; shape (n, l, d, d)."""
    Y = np.asarray(Y)
    n = len(Y)
    out = np.empty((n, l, d, d), dtype=np.complex128)
    for k in range(l):
        a, b = d**k, d ** (l - k - 1)
        T = Y.reshape(n, a, d, b, a, d, b)
        out[:, k] = np.einsum("nxiyxjy->nij", T)
    return out


def letter_sums(words, values, m):
    """sum over rows with words[:, k] == j of values[:, k]; shape (l, m, ...)."""
    n, l = words.shape
    out = np.zeros((l, m) + values.shape[2:], dtype=values.dtype)
    for k in range(l):
        onehot = (words[:, k][:, None] == np.arange(m)[None, :]).astype(float)
        out[k] = np.tensordot(onehot.T, values[:, k], axes=(1, 0))
    return out


def weighted_marginals(words, weighted, m, d):
    """sqrt(rho) A^(k)_j sqrt(rho) for all k, j from the weighted stack
    sqrt(rho)^{⊗l} A_w sqrt(rho)^{⊗l}; shape (l, m, d, d)."""
    red = site_reductions(weighted, d, words.shape[1])
    M = letter_sums(words, red, m)
    return 0.5 * (M + M.conj().swapaxes(-1, -2))


def marginals(A: WordPovm, rho):
    """All single-site marginals A^(k)_j; shape (l, m, d, d)."""
    rho = np.asarray(rho)
    d = rho.shape[0]
    s = op_sqrt(rho)
    S = tensor_power(s, A.l)
    weighted = S @ A.elements @ S
    Y = weighted_marginals(A.words, weighted, A.m, d)
    r = op_inv_sqrt_on_support(rho)
    out = r @ Y @ r
    return 0.5 * (out + out.conj().swapaxes(-1, -2))


def marginal_povm(A: WordPovm, k, rho):
    """A^(k)_j = rho^{-1/2} Tr_{≠k}(sqrt(rho)^{⊗l} sum_{μ: j_μk = j} A_μ sqrt(rho)^{⊗l}) rho^{-1/2}."""
    if not 0 <= k < A.l:
        raise ValueError("position out of range")
    return Povm(marginals(A, rho)[k])


def k_subset_marginal(A: WordPovm, K, rho, nu=None):
    """Restriction of A to the factors in K, weighted by rho on the others.

    Returns ``(patterns, elements)``: ``patterns`` are the words j^K in
    lexicographic order, ``elements[i]`` acts on H^{⊗|K|} (factors in
    increasing position order).
    """
    K = sorted(set(int(k) for k in K))
    if nu is not None and len(K) > nu:
        raise ValueError(f"|K| = {len(K)} exceeds the maximum subset size {nu}")
    rho = np.asarray(rho)
    d = rho.shape[0]
    l = A.l
    W = tensor_product([np.eye(d) if k in K else rho for k in range(l)])
    rest = [k for k in range(l) if k not in K]
    patterns = kernels.all_words(A.m, len(K))
    out = np.zeros((len(patterns), d ** len(K), d ** len(K)), dtype=np.complex128)
    codes = np.zeros(len(A.words), dtype=np.int64)
    for k in K:
        codes = codes * A.m + A.words[:, k]
    for p in range(len(patterns)):
        sel = codes == p
        if not np.any(sel):
            continue
        Ssum = A.elements[sel].sum(axis=0)
        X = partial_trace(W @ Ssum, [d] * l, rest)
        out[p] = 0.5 * (X + X.conj().T)
    return patterns, out


def _elements(a):
    return a.elements if hasattr(a, "elements") else np.asarray(a)


def marginal_deviation_table(marg, a):
    """Per position k: sum_j ||A^(k)_j - a_j|| (operator norm)."""
    el = _elements(a)
    l, m = marg.shape[:2]
    return np.array([sum(operator_norm(marg[k, j] - el[j]) for j in range(m)) for k in range(l)])


def block_fidelity(A: WordPovm, ensemble: Ensemble, F, rho, marg=None):
    """(1/l) sum_k sum_ij p_i Tr(rho_i A^(k)_j) F_ij via the marginals."""
    F = check_fidelity_matrix(F, (len(ensemble), A.m))
    marg = marginals(A, rho) if marg is None else marg
    probs = np.einsum("ixy,kjyx->kij", ensemble.states, marg).real
    return float(np.mean(np.sum(ensemble.probs[None, :, None] * probs * F[None], axis=(1, 2))))


def condition_values(A: WordPovm, a, rho, ensemble=None, F=None, nu=1, marg=None):
    """Left-hand sides of the closeness conditions.

    C0-C2 appear only when an ensemble is given (C0 also needs F); C5 sums
    over all subsets 1 <= |K| <= nu.
    """
    el = _elements(a)
    marg = marginals(A, rho) if marg is None else marg
    dev = marginal_deviation_table(marg, el)
    l = A.l
    out = {
        "C2.5": float(dev.mean()),
        "C3": float(dev.max()),
        "C4": float(dev.sum()),
    }
    total = 0.0
    for size in range(1, min(nu, l) + 1):
        for K in combinations(range(l), size):
            patterns, elems = k_subset_marginal(A, K, rho)
            for p, X in zip(patterns, elems):
                total += operator_norm(X - tensor_product([el[j] for j in p]))
    out["C5"] = float(total)
    if ensemble is not None:
        p = ensemble.probs
        pa = np.einsum("ixy,jyx->ij", ensemble.states, el).real  # Tr(rho_i a_j)
        pA = np.einsum("ixy,kjyx->kij", ensemble.states, marg).real  # Tr(rho_i A^(k)_j)
        out["C1"] = float(np.sum(np.abs(p[:, None] * (pA.mean(axis=0) - pa))))
        out["C2"] = float(np.max(np.sum(np.abs(pA - pa[None]), axis=2)))
        if F is not None:
            from .quantum import single_letter_fidelity, SubPovm

            out["C0"] = abs(
                block_fidelity(A, ensemble, F, rho, marg=marg)
                - single_letter_fidelity(ensemble, F, SubPovm(el))
            )
    return out


CONDITIONS = ("C0", "C1", "C2", "C2.5", "C3", "C4", "C5")


def check_condition(cond, A: WordPovm, a, rho, ensemble=None, F=None, nu=1):
    """Value of one condition's left-hand side."""
    if cond not in CONDITIONS:
        raise ValueError(f"unknown condition {cond!r}")
    if cond in ("C0", "C1", "C2") and ensemble is None:
        raise ValueError(f"{cond} needs an ensemble")
    if cond == "C0" and F is None:
        raise ValueError("C0 needs a fidelity matrix")
    return condition_values(A, a, rho, ensemble, F, nu=nu)[cond]


def weighted_trace_norm_table(marg_w, ref_w):
    """Per position k: sum_j ||X^(k)_j - Y^(k)_j||_1 for weighted marginals."""
    l, m = marg_w.shape[:2]
    ref = ref_w if ref_w.ndim == 4 else np.broadcast_to(ref_w, marg_w.shape)
    return np.array([sum(trace_norm(marg_w[k, j] - ref[k, j]) for j in range(m)) for k in range(l)])
