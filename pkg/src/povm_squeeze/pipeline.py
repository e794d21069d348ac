"""Staged compression of a product POVM a^{⊗l}.

The construction runs a^{⊗l} -> B -> C -> D -> E, draws outcome words at
random from the typical set and distributes the remainder so that the final
word-labelled family A is a POVM whose single-site marginals stay close to a.

Every stage keeps its operators X_w together with the weighted form
sqrt(rho)^{⊗l} X_w sqrt(rho)^{⊗l}, which is what all marginal computations
consume. Sums over words always run in lexicographic word order.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .linalg import (
    eig_hermitian,
    loewner_leq,
    min_eig,
    op_inv_sqrt_on_support,
    op_sqrt,
    operator_norm,
    support,
    tensor_power,
    tensor_product,
    trace_norm,
)
from .marginals import (
    WordPovm,
    condition_values,
    marginals,
    weighted_marginals,
)
from .quantum import (
    Povm,
    canonical_ensemble,
    check_density,
    entropy_defect,
    von_neumann_entropy,
)
from .typicality import (
    DEFAULT_DIM_CAP,
    DEFAULT_WORD_CAP,
    CapExceeded,
    conditional_masks,
    typical_projector,
    typical_sequences,
)

LOEWNER_TOL = 1e-9
POVM_TOL = 1e-9
NORM_TOL = 1e-10
# words with lambda^l below this are left out of the sampling support
UNDERFLOW_WEIGHT = 1e-300
# relative slack on the cutoff threshold c * alpha
CUTOFF_RTOL = 1e-9
MAX_ATTEMPTS = 32
# above this many draws the counts are sampled in one multinomial step
SEQUENTIAL_DRAW_LIMIT = 1 << 24
_DRAW_CHUNK = 1 << 20


@dataclass(frozen=True)
class CompressionConfig:
    l: int
    delta: float
    eta: Optional[float] = None
    M_override: Optional[int] = None
    seed: int = 0
    nu: int = 1
    max_attempts: int = MAX_ATTEMPTS
    loewner_tol: float = LOEWNER_TOL
    povm_tol: float = POVM_TOL
    cap_dim: int = DEFAULT_DIM_CAP
    cap_words: int = DEFAULT_WORD_CAP
    check_props: bool = True

    def __post_init__(self):
        if int(self.l) != self.l or self.l < 1:
            raise ValueError("l must be a positive integer")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        eta = min(1.0, self.delta**-2) if self.eta is None else float(self.eta)
        if not 0 < eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "l", int(self.l))
        object.__setattr__(self, "delta", float(self.delta))
        if self.M_override is not None and int(self.M_override) < 1:
            raise ValueError("M_override must be at least 1")
        if self.nu < 0:
            raise ValueError("nu must be nonnegative")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")


@dataclass
class ProductContext:
    """Everything about (rho, a) at block length l, restricted to supp(rho).

    ``a`` holds only the outcomes with nonzero weight; ``kept`` maps their
    positions back to the caller's labels.
    """

    rho: np.ndarray
    a: np.ndarray
    l: int
    basis: np.ndarray
    kept: tuple
    dropped: tuple
    canon: object
    rho_spectrum: object
    spectra: list
    sqrt_rho: np.ndarray
    inv_sqrt_rho: np.ndarray
    S: np.ndarray
    Sinv: np.ndarray
    lam: np.ndarray

    @property
    def d(self):
        return self.rho.shape[0]

    @property
    def m(self):
        return len(self.a)

    @property
    def r(self):
        return float(self.rho_spectrum.values.min())

    @property
    def targets(self):
        """sqrt(rho) a_j sqrt(rho) for each kept letter."""
        s = self.sqrt_rho
        return np.array([s @ aj @ s for aj in self.a])


def product_context(rho, a, l, cap_dim=DEFAULT_DIM_CAP):
    rho = check_density(rho)
    el = a.elements if hasattr(a, "elements") else np.asarray(a)
    Povm(el)
    V = support(rho)
    rs = V.conj().T @ rho @ V
    rs = 0.5 * (rs + rs.conj().T)
    rs = rs / np.trace(rs).real
    a_s = np.array([V.conj().T @ x @ V for x in el])
    d = rs.shape[0]
    if d**l > cap_dim:
        raise CapExceeded(f"operator dimension {d}^{l} = {d**l} exceeds cap {cap_dim}")
    canon = canonical_ensemble(rs, Povm(a_s))
    s = op_sqrt(rs)
    si = op_inv_sqrt_on_support(rs)
    lam = np.einsum("ij,mji->m", rs, a_s).real[list(canon.kept)]
    return ProductContext(
        rho=rs,
        a=a_s[list(canon.kept)],
        l=int(l),
        basis=V,
        kept=canon.kept,
        dropped=canon.dropped,
        canon=canon,
        rho_spectrum=eig_hermitian(rs),
        spectra=[eig_hermitian(x) for x in canon.states],
        sqrt_rho=s,
        inv_sqrt_rho=si,
        S=tensor_power(s, l),
        Sinv=tensor_power(si, l),
        lam=lam,
    )


@dataclass
class WordIndexedSubPovm:
    """Stage operators ``ops[i]`` for words ``words[i]`` plus their weighted form."""

    stage: str
    words: np.ndarray
    ops: np.ndarray
    weighted: np.ndarray

    def __len__(self):
        return len(self.words)

    def weighted_marginals(self, m, d):
        if len(self.words) == 0:
            return np.zeros((self.words.shape[1], m, d, d), dtype=complex)
        return weighted_marginals(self.words, self.weighted, m, d)


def _herm(X):
    return 0.5 * (X + X.conj().swapaxes(-1, -2))


def _sandwich(L, X, R):
    return _herm(L @ X @ R)


def _make_stage(name, words, ops, ctx):
    ops = _herm(ops)
    return WordIndexedSubPovm(name, words, ops, _sandwich(ctx.S, ops, ctx.S))


def word_codes(words, m):
    codes = np.zeros(len(words), dtype=np.int64)
    for k in range(words.shape[1]):
        codes = codes * m + words[:, k]
    return codes


def product_povm_weighted(ctx, words):
    """sqrt(rho)^{⊗l} a_w sqrt(rho)^{⊗l} = ⊗_k sqrt(rho) a_{w_k} sqrt(rho)."""
    t = ctx.targets
    return np.array([tensor_product([t[j] for j in w]) for w in words])


def stage_B(ctx: ProductContext, delta, cap_words=DEFAULT_WORD_CAP):
    """Confine each a_w to its conditional typical subspace."""
    m, l = ctx.m, ctx.l
    if m**l > cap_words:
        raise CapExceeded(f"word enumeration {m}^{l} exceeds cap {cap_words}")
    words = kernels.all_words(m, l)
    masks = conditional_masks(ctx.spectra, words, delta)
    K = product_povm_weighted(ctx, words)
    ops = np.empty_like(K)
    for i, w in enumerate(words):
        U = tensor_product([ctx.spectra[j].vectors for j in w])[:, masks[i]]
        P = U @ U.conj().T
        ops[i] = ctx.Sinv @ P @ K[i] @ P @ ctx.Sinv
    return _make_stage("B", words, ops, ctx)


def stage_C(B: WordIndexedSubPovm, Pi_typ, ctx):
    ops = Pi_typ @ B.ops @ Pi_typ
    return _make_stage("C", B.words, ops, ctx)


def stage_D(C: WordIndexedSubPovm, T, m):
    keep = np.isin(word_codes(C.words, m), word_codes(T.words, m))
    return WordIndexedSubPovm("D", C.words[keep], C.ops[keep], C.weighted[keep])


@dataclass
class Cutoff:
    omega: np.ndarray
    Pi: np.ndarray
    alpha: float
    c: float
    rank: int
    pi_weight: float

    @property
    def pi_weight_bound(self):
        return 1.0 - 2.0 * self.c


def cutoff_projector(D: WordIndexedSubPovm, ctx: ProductContext, delta, typ=None):
    """Eigenprojector of omega = sum_T weighted D for eigenvalues >= c * alpha.

    alpha is the smallest nonzero eigenvalue of Pi_typ rho^{⊗l} Pi_typ,
    i.e. the smallest eigenvalue product over typical basis words.
    """
    typ = typical_projector(ctx.rho, ctx.l, delta, spectrum=ctx.rho_spectrum) if typ is None else typ
    D_dim = ctx.d**ctx.l
    omega = D.weighted.sum(axis=0) if len(D) else np.zeros((D_dim, D_dim), dtype=complex)
    omega = _herm(omega)
    c = (ctx.m + 1) * (ctx.d + 1) / delta**2
    if typ.rank:
        alpha = float(kernels.word_weights(typ.words, np.clip(ctx.rho_spectrum.values, 0, None)).min())
    else:
        alpha = 0.0
    w, V = np.linalg.eigh(omega)
    keep = w >= c * alpha * (1.0 - CUTOFF_RTOL) if alpha > 0 else np.zeros(len(w), bool)
    keep &= w > 0
    U = V[:, keep]
    Pi = U @ U.conj().T
    pi_weight = float(np.trace(omega @ Pi).real)
    return Cutoff(omega, Pi, alpha, c, int(keep.sum()), pi_weight)


def stage_E(D: WordIndexedSubPovm, Pi, ctx):
    inner = Pi @ D.weighted @ Pi
    ops = _sandwich(ctx.Sinv, inner, ctx.Sinv)
    return _make_stage("E", D.words, ops, ctx)


def choose_M(alpha, beta, c, eta):
    """Smallest integer M > 2 ln2 (1 - log2 alpha) / (eta^2 c) * beta / alpha."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not (c > 0 and eta > 0):
        raise ValueError("c and eta must be positive")
    val = 2 * math.log(2) * (1 - math.log2(alpha)) / (eta**2 * c) * beta / alpha
    if not math.isfinite(val) or val >= 2**62:
        raise OverflowError(f"required outcome count {val:.3g} is not representable")
    return int(math.floor(val)) + 1


def c_tilde(m, d, delta, c):
    return 2 * c + m / delta**2 + (m**2 * d + 4 * m * d) / delta**2 + m * d / delta**2


def c3_budget(m, eta, ct, delta, l, n_draws):
    return (m + 1) * (eta + ct + delta * math.sqrt(l) / math.sqrt(n_draws))


@dataclass
class Attempt:
    index: int
    below_typical: bool
    marginals_close: bool
    typical_gap_min_eig: float
    marginal_deviation_max: float

    @property
    def cause(self):
        if self.below_typical and self.marginals_close:
            return ""
        return " and ".join(n for n, ok in (("below_typical", self.below_typical), ("marginals_close", self.marginals_close)) if not ok)


@dataclass
class Selection:
    success: bool
    attempts: list
    n_draws: int
    words: Optional[np.ndarray] = None
    counts: Optional[np.ndarray] = None
    sub: Optional[np.ndarray] = None  # merged A-tilde elements


def attempt_rng(seed, attempt):
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(attempt),)))


def draw_counts(rng, probs, M):
    """Occurrence counts of M i.i.d. draws from ``probs``."""
    n = len(probs)
    if M > SEQUENTIAL_DRAW_LIMIT:
        return rng.multinomial(M, probs).astype(np.int64)
    counts = np.zeros(n, dtype=np.int64)
    left = M
    while left:
        k = min(left, _DRAW_CHUNK)
        counts += np.bincount(rng.choice(n, size=k, p=probs), minlength=n)
        left -= k
    return counts


def random_select(E: WordIndexedSubPovm, ctx, Lam_weights, S, M, eta, seed, delta, Pi_typ,
                  ct=None, max_attempts=MAX_ATTEMPTS, tol=LOEWNER_TOL):
    """Draw M words from Lambda, form A-tilde and test the two success events.

    ``Lam_weights`` are the lambda^l of the words of E (same order). Drawn
    duplicates are merged: the element of a word drawn n times is n copies
    of its A-tilde summed.
    """
    m, d, l = ctx.m, ctx.d, ctx.l
    ct = c_tilde(m, d, delta, (m + 1) * (d + 1) / delta**2) if ct is None else ct
    support_ok = Lam_weights >= UNDERFLOW_WEIGHT
    probs = np.where(support_ok, Lam_weights, 0.0)
    probs = probs / probs.sum()
    scaled = (S / np.where(support_ok, Lam_weights, 1.0))[:, None, None]
    X = E.weighted * scaled  # X_w = (S / lambda_w) weighted E_w
    Xops = E.ops * scaled
    red = None
    targets = ctx.targets
    thresh = ct + delta * math.sqrt(l) / math.sqrt(M)
    attempts = []
    for att in range(max_attempts):
        counts = draw_counts(attempt_rng(seed, att), probs, M)
        sel = np.flatnonzero(counts)
        cw = counts[sel].astype(float)
        sub = Xops[sel] * (cw / ((1 + eta) * M))[:, None, None]
        total = sub.sum(axis=0)
        lo = min_eig(_herm(Pi_typ - total))
        below_typical = lo >= -tol
        # marginal closeness of (1/M) sum_mu Tr_{≠k} X_mu
        Y = weighted_marginals(E.words[sel], X[sel] * (cw / M)[:, None, None], m, d)
        dev = max(trace_norm(Y[k, j] - targets[j]) for k in range(l) for j in range(m))
        marginals_close = dev <= thresh + NORM_TOL
        attempts.append(Attempt(att, bool(below_typical), bool(marginals_close), float(lo), float(dev)))
        if below_typical and marginals_close:
            return Selection(True, attempts, int(M), E.words[sel], counts[sel], _herm(sub))
    return Selection(False, attempts, int(M))


def distribute_remainder(sub, counts, tol=POVM_TOL):
    """A = A-tilde + (n_w / M) R with R = I - sum A-tilde, M = sum of counts."""
    sub = np.asarray(sub)
    counts = np.asarray(counts, dtype=float)
    D = sub.shape[1]
    R = np.eye(D) - sub.sum(axis=0)
    R = _herm(R)
    if min_eig(R) < -tol:
        raise ValueError("sub-POVM sums to more than the identity")
    share = counts / counts.sum()
    A = sub + share[:, None, None] * R[None]
    A = _herm(A)
    # put the rounding residue of sum A - I on the largest element
    resid = np.eye(D) - A.sum(axis=0)
    A[int(np.argmax(share))] += _herm(resid)
    return A


@dataclass
class StageBundle:
    """Stages and deterministic diagnostics at one (l, delta); seed independent."""

    ctx: ProductContext
    delta: float
    typ: object
    T: object
    B: WordIndexedSubPovm
    C: WordIndexedSubPovm
    D: WordIndexedSubPovm
    cut: Cutoff
    E: WordIndexedSubPovm
    alpha: float
    beta: float
    lam_words: np.ndarray
    excluded_words: int
    props: dict = field(default_factory=dict)
    stage_gaps: dict = field(default_factory=dict)


def build_stages(rho, a, l, delta, cap_dim=DEFAULT_DIM_CAP, cap_words=DEFAULT_WORD_CAP,
                 check_props=True, tol=LOEWNER_TOL):
    ctx = product_context(rho, a, l, cap_dim)
    typ = typical_projector(ctx.rho, l, delta, cap=cap_dim, spectrum=ctx.rho_spectrum)
    Pi_typ = typ.dense(cap_dim)
    T = typical_sequences(ctx.lam, l, delta, cap=cap_words)
    B = stage_B(ctx, delta, cap_words)
    C = stage_C(B, Pi_typ, ctx)
    D = stage_D(C, T, ctx.m)
    cut = cutoff_projector(D, ctx, delta, typ)
    E = stage_E(D, cut.Pi, ctx)
    lam_words = kernels.word_weights(E.words, ctx.lam)
    excluded = int(np.sum(lam_words < UNDERFLOW_WEIGHT))
    beta = 0.0
    for i in range(len(E)):
        if lam_words[i] >= UNDERFLOW_WEIGHT:
            beta = max(beta, operator_norm(E.weighted[i]) / lam_words[i])
    beta *= T.mass
    bundle = StageBundle(ctx, float(delta), typ, T, B, C, D, cut, E, cut.alpha, beta,
                         lam_words, excluded)
    bundle.stage_gaps = stage_gaps(bundle)
    if check_props:
        bundle.props = prop_checks(bundle, Pi_typ, tol)
    bundle.Pi_typ = Pi_typ
    return bundle


def stage_gaps(bundle):
    """Per position: sum_j trace norm of consecutive weighted-marginal differences."""
    ctx = bundle.ctx
    m, d = ctx.m, ctx.d
    ref = np.broadcast_to(ctx.targets, (ctx.l, m, d, d))
    seq = [("a", ref)] + [(s.stage, s.weighted_marginals(m, d)) for s in (bundle.B, bundle.C, bundle.D, bundle.E)]
    out = {}
    for (n0, X0), (n1, X1) in zip(seq, seq[1:]):
        out[f"{n0}->{n1}"] = [float(sum(trace_norm(X1[k, j] - X0[k, j]) for j in range(m))) for k in range(ctx.l)]
    return out


def _check(value, bound, direction="le", tol=0.0):
    ok = value <= bound + tol if direction == "le" else value >= bound - tol
    return {"value": float(value), "bound": float(bound), "pass": bool(ok)}


def prop_checks(bundle, Pi_typ, tol=LOEWNER_TOL):
    """Operator inequalities and budgets for the four compression stages."""
    ctx = bundle.ctx
    m, d, l, r = ctx.m, ctx.d, ctx.l, ctx.r
    delta = bundle.delta
    B, C, D, E = bundle.B, bundle.C, bundle.D, bundle.E
    words = B.words
    lam_all = kernels.word_weights(words, ctx.lam)
    out = {}
    el = ctx.a
    # 0 <= B_w <= a_w
    worst = np.inf
    for i, w in enumerate(words):
        aw = tensor_product([el[j] for j in w])
        worst = min(worst, min_eig(B.ops[i]), min_eig(_herm(aw - B.ops[i])))
    out["B.sandwich"] = _check(worst, -tol, "ge")
    trB = np.einsum("nii->n", B.weighted).real
    trC = np.einsum("nii->n", C.weighted).real
    out["B.trace"] = _check(np.min(trB - (1 - m * d / delta**2) * lam_all), 0.0, "ge", 1e-12)
    tg = ctx.targets
    Bm = B.weighted_marginals(m, d)
    Cm = C.weighted_marginals(m, d)
    Dm = D.weighted_marginals(m, d)
    Em = E.weighted_marginals(m, d)
    # sandwich with Delta^1_j = target_j - weighted B^(k)_j >= 0
    lo, excess = np.inf, -np.inf
    for k in range(l):
        for j in range(m):
            D1 = _herm(tg[j] - Bm[k, j])
            lo = min(lo, min_eig(D1))
            excess = max(excess, np.trace(D1).real - ctx.lam[j] * m * d / delta**2)
    out["B.marginal_lower"] = {"value": float(lo), "bound": -tol, "pass": bool(lo >= -tol and excess <= 1e-12),
                   "trace_excess": float(excess)}
    ref = np.broadcast_to(tg, Bm.shape)
    out["B.marginal_trace_norm"] = _check(_max_sum_trace(Bm, ref), m * d / delta**2, tol=NORM_TOL)
    opm = lambda X: _unweight(X, ctx)
    out["B.marginal_op_norm"] = _check(_max_sum_op(opm(Bm), np.broadcast_to(el, Bm.shape)), m * d / (r * delta**2), tol=NORM_TOL)
    out["C.trace"] = _check(np.max(trC - trB), 0.0, tol=1e-12)
    # negative part of (weighted C^(k)_j - target_j) has trace <= lambda_j (md + 4d) / delta^2
    neg = -np.inf
    for k in range(l):
        for j in range(m):
            w_ = np.linalg.eigvalsh(_herm(Cm[k, j] - tg[j]))
            neg = max(neg, -np.sum(w_[w_ < 0]) - ctx.lam[j] * (m * d + 4 * d) / delta**2)
    out["C.marginal_negative_part"] = _check(neg, 0.0, tol=1e-12)
    out["C.marginal_trace_norm"] = _check(_max_sum_trace(Cm, Bm), (m**2 + 4 * m * d) / delta**2, tol=NORM_TOL)
    out["C.marginal_op_norm"] = _check(_max_sum_op(opm(Cm), opm(Bm)), (m**2 * d + 4 * m * d) / (r * delta**2), tol=NORM_TOL)
    out["D.set_mass"] = _check(bundle.T.mass, 1 - m / delta**2, "ge", 1e-12)
    keep = np.isin(word_codes(words, m), word_codes(D.words, m))
    trD = trC[keep]
    out["D.trace"] = _check(np.min(trD - (1 - 2 * m**3 * d / (r**2 * delta**2)) * lam_all[keep]) if keep.any() else 0.0,
                         0.0, "ge", 1e-12)
    lo3 = np.inf
    tr3 = np.zeros(l)
    for k in range(l):
        for j in range(m):
            D3 = _herm(Cm[k, j] - Dm[k, j])
            lo3 = min(lo3, min_eig(D3))
            tr3[k] += np.trace(D3).real
    out["D.marginal_lower"] = {"value": float(tr3.max()), "bound": m / delta**2,
                   "pass": bool(lo3 >= -tol and tr3.max() <= m / delta**2 + NORM_TOL), "min_eig": float(lo3)}
    out["D.marginal_trace_norm"] = _check(_max_sum_trace(Dm, Cm), m / delta**2, tol=NORM_TOL)
    out["D.marginal_op_norm"] = _check(_max_sum_op(opm(Dm), opm(Cm)), m / (r * delta**2), tol=NORM_TOL)
    trE = np.einsum("nii->n", E.weighted).real
    out["E.trace"] = _check(np.max(trE - trD) if len(trE) else 0.0, 0.0, tol=1e-12)
    c = bundle.cut.c
    out["E.marginal_trace_norm"] = _check(_max_sum_trace(Em, Dm), 2 * m * c, tol=NORM_TOL)
    out["E.marginal_unweighted"] = _check(_max_sum_trace(opm(Em), opm(Dm)), 2 * m * c / r, tol=NORM_TOL)
    out["pi_weight"] = _check(bundle.cut.pi_weight, bundle.cut.pi_weight_bound, "ge", 1e-12)
    out["delta4_trace"] = _check(1.0 - np.trace(bundle.cut.omega).real, c, tol=1e-12)
    return out


def _unweight(X, ctx):
    ri = ctx.inv_sqrt_rho
    return _herm(ri @ X @ ri)


def _max_sum_trace(X, Y):
    l, m = X.shape[:2]
    return max(sum(trace_norm(X[k, j] - Y[k, j]) for j in range(m)) for k in range(l))


def _max_sum_op(X, Y):
    l, m = X.shape[:2]
    return max(sum(operator_norm(X[k, j] - Y[k, j]) for j in range(m)) for k in range(l))


@dataclass
class CompressionResult:
    config: CompressionConfig
    success: bool
    words: Optional[np.ndarray]  # distinct selected words, caller's letter labels
    counts: Optional[np.ndarray]
    A: Optional[WordPovm]  # on supp(rho)^{⊗l}, letters relabelled to kept outcomes
    M: int  # number of distinct outcomes
    n_draws: int
    rate: float
    entropy_defect: float
    H_rho: float
    S: float
    alpha: float
    beta: float
    c: float
    c_tilde: float
    c3_budget: float
    conditions: dict
    c3_weighted: float
    converse_raw: Optional[float]
    converse_lower: Optional[float]
    converse_applicable: bool
    attempts: list
    props: dict
    stage_gaps: dict
    pi_weight: float
    pi_rank: int
    typical_rank: int
    typical_words: int
    excluded_words: int
    support_dim: int
    dropped_outcomes: tuple
    lambda_min: float

    @property
    def c3(self):
        return self.conditions.get("C3", float("nan"))

    @property
    def props_pass(self):
        return all(v["pass"] for v in self.props.values())

    def summary(self):
        """JSON-friendly record."""
        return {
            "l": self.config.l,
            "delta": self.config.delta,
            "eta": self.config.eta,
            "seed": self.config.seed,
            "success": self.success,
            "M": self.M,
            "n_draws": self.n_draws,
            "rate_bits": self.rate,
            "entropy_defect_bits": self.entropy_defect,
            "H_rho_bits": self.H_rho,
            "S": self.S,
            "alpha": self.alpha,
            "beta": self.beta,
            "c": self.c,
            "c_tilde": self.c_tilde,
            "c3_budget": self.c3_budget,
            "conditions": self.conditions,
            "c3_weighted_trace": self.c3_weighted,
            "converse_raw_bits": self.converse_raw,
            "thm3_lower_bits": self.converse_lower,
            "converse_applicable": self.converse_applicable,
            "attempts": [
                {"attempt": a.index, "below_typical": a.below_typical, "marginals_close": a.marginals_close,
                 "typical_gap_min_eig": a.typical_gap_min_eig, "marginal_deviation_max": a.marginal_deviation_max, "cause": a.cause}
                for a in self.attempts
            ],
            "props": self.props,
            "stage_gaps": self.stage_gaps,
            "pi_weight": self.pi_weight,
            "pi_rank": self.pi_rank,
            "typical_rank": self.typical_rank,
            "typical_words": self.typical_words,
            "excluded_words": self.excluded_words,
            "support_dim": self.support_dim,
            "dropped_outcomes": list(self.dropped_outcomes),
            "selected_words": None if self.words is None else ["".join(map(str, w)) for w in self.words],
            "selected_counts": None if self.counts is None else [int(x) for x in self.counts],
        }


def select_and_finish(bundle: StageBundle, config: CompressionConfig, ensemble=None, F=None):
    """Random selection, remainder distribution and condition table for one seed."""
    from .bounds import InapplicableBound, thm3_lower_bound

    ctx = bundle.ctx
    m, d, l = ctx.m, ctx.d, ctx.l
    delta, eta = config.delta, config.eta
    cut = bundle.cut
    ct = c_tilde(m, d, delta, cut.c)
    if config.M_override is not None:
        n_draws = int(config.M_override)
    else:
        n_draws = choose_M(bundle.alpha, bundle.beta, cut.c, eta)
    lam_w = bundle.lam_words
    sel = random_select(bundle.E, ctx, lam_w, bundle.T.mass, n_draws, eta, config.seed, delta,
                        bundle.Pi_typ, ct, config.max_attempts, config.loewner_tol)
    budget = c3_budget(m, eta, ct, delta, l, n_draws)
    defect = entropy_defect(ctx.canon)
    H = von_neumann_entropy(ctx.rho)
    A = None
    conds = {}
    c3w = float("nan")
    converse_raw = converse_low = None
    applicable = False
    M = 0
    words = counts = None
    if sel.success:
        elems = distribute_remainder(sel.sub, sel.counts, config.povm_tol)
        A = WordPovm(sel.words, elems, m, sel.counts)
        M = A.outcomes
        words = np.asarray(ctx.kept)[sel.words]
        counts = sel.counts
        ens = F_ = None
        if ensemble is not None:
            ens = _restrict_ensemble(ensemble, ctx)
            F_ = None if F is None else np.asarray(F)[:, list(ctx.kept)]
        marg = marginals(A, ctx.rho)
        conds = condition_values(A, ctx.a, ctx.rho, ens, F_, nu=config.nu, marg=marg)
        Y = ctx.sqrt_rho @ marg @ ctx.sqrt_rho
        c3w = _max_sum_trace(Y, np.broadcast_to(ctx.targets, Y.shape))
        eps = conds["C3"]
        try:
            converse_raw = thm3_lower_bound(ctx.lam, ctx.canon.states, eps, d, l)
            converse_low = max(0.0, converse_raw)
            applicable = True
        except InapplicableBound:
            pass
    return CompressionResult(
        config=config,
        success=sel.success,
        words=words,
        counts=counts,
        A=A,
        M=M,
        n_draws=n_draws,
        rate=math.log2(M) / l if M else float("nan"),
        entropy_defect=defect,
        H_rho=H,
        S=bundle.T.mass,
        alpha=bundle.alpha,
        beta=bundle.beta,
        c=cut.c,
        c_tilde=ct,
        c3_budget=budget,
        conditions=conds,
        c3_weighted=c3w,
        converse_raw=converse_raw,
        converse_lower=converse_low,
        converse_applicable=applicable,
        attempts=sel.attempts,
        props=bundle.props,
        stage_gaps=bundle.stage_gaps,
        pi_weight=cut.pi_weight,
        pi_rank=cut.rank,
        typical_rank=bundle.typ.rank,
        typical_words=len(bundle.T.words),
        excluded_words=bundle.excluded_words,
        support_dim=d,
        dropped_outcomes=ctx.dropped,
        lambda_min=float(ctx.lam.min()),
    )


def _restrict_ensemble(ensemble, ctx):
    from .quantum import Ensemble

    V = ctx.basis
    states = np.array([V.conj().T @ s @ V for s in ensemble.states])
    states = np.array([s / np.trace(s).real for s in states])
    return Ensemble(states, ensemble.probs)


def compress(rho, a, config: CompressionConfig, ensemble=None, F=None):
    """Full pipeline for one (l, delta, seed)."""
    bundle = build_stages(rho, a, config.l, config.delta, config.cap_dim, config.cap_words,
                          config.check_props, config.loewner_tol)
    return select_and_finish(bundle, config, ensemble, F)
