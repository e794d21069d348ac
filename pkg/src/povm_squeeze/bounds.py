"""Information inequalities around compressed measurements: entropy lemmas,
the converse bound on the outcome count, an operator large-deviation Monte
Carlo, and Holevo-type bounds through a pair of dual triples.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .linalg import (
    loewner_leq,
    min_eig,
    op_inv_sqrt_on_support,
    operator_norm,
    partial_trace,
    random_density,
    random_psd,
    tensor_product,
    trace_norm,
)
from .quantum import (
    Ensemble,
    InvalidStateError,
    Povm,
    _entropy_unchecked,
    canonical_ensemble,
    ensemble_average,
    entropy_defect,
    pretty_good_measurement,
    random_povm,
    shannon_entropy,
)

DUALITY_TOL = 1e-10
JOINT_TOL = 1e-10


class InapplicableBound(ValueError):
    """The requested bound's hypothesis does not hold."""


class DualityError(RuntimeError):
    pass


@dataclass(frozen=True)
class Triple:
    ensemble: Ensemble
    povm: Povm

    def __post_init__(self):
        if self.ensemble.dim != self.povm.dim:
            raise ValueError("ensemble and POVM dimensions differ")

    @property
    def average(self):
        return ensemble_average(self.ensemble)


@dataclass(frozen=True)
class JointDistribution:
    P: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.ndim != 2:
            raise ValueError("joint distribution must be a matrix")
        if np.any(P < -JOINT_TOL):
            raise ValueError("negative probability in joint distribution")
        if abs(P.sum() - 1.0) > JOINT_TOL:
            raise ValueError(f"joint distribution sums to {P.sum():.12g}")
        P = np.clip(P, 0.0, None)
        P.setflags(write=False)
        object.__setattr__(self, "P", P)

    @property
    def row_marginal(self):
        return self.P.sum(axis=1)

    @property
    def column_marginal(self):
        return self.P.sum(axis=0)


def joint_distribution(t: Triple):
    """P(i, j) = mu_i Tr(sigma_i a_j)."""
    e = t.ensemble
    P = e.probs[:, None] * np.einsum("ixy,jyx->ij", e.states, t.povm.elements).real
    return JointDistribution(P)


def mutual_information(P):
    P = P.P if isinstance(P, JointDistribution) else np.asarray(P, dtype=float)
    px = P.sum(axis=1, keepdims=True)
    py = P.sum(axis=0, keepdims=True)
    nz = P > 0
    return float(np.sum(P[nz] * np.log2(P[nz] / (px @ py)[nz])))


class HolevoReport(NamedTuple):
    I_XY: float
    chi_ensemble: float
    chi_measurement: float
    slack_ensemble: float
    slack_measurement: float


def holevo_check(t: Triple):
    I = mutual_information(joint_distribution(t))
    chi_e = entropy_defect(t.ensemble)
    canon = canonical_ensemble(t.average, t.povm)
    chi_m = entropy_defect(canon)
    return HolevoReport(I, chi_e, chi_m, chi_e - I, chi_m - I)


def dual_triple(t: Triple, tol=DUALITY_TOL):
    """Canonical ensemble of (rho, a) measured by the square-root measurement
    of the original ensemble.

    Outcomes of ``a`` with zero weight carry no state and are dropped; the
    returned triple's states are indexed by the remaining outcomes.
    """
    rho = t.average
    if min_eig(rho) <= 1e-12 * max(1.0, operator_norm(rho)):
        raise InvalidStateError("average state is rank deficient; the dual triple needs full rank")
    canon = canonical_ensemble(rho, t.povm)
    pgm = pretty_good_measurement(t.ensemble)
    if not isinstance(pgm, Povm):
        raise DualityError("square-root measurement is incomplete")
    dual = Triple(Ensemble(canon.states, canon.probs), Povm(pgm.elements))
    P = joint_distribution(t).P[:, list(canon.kept)]
    Q = joint_distribution(dual).P
    gap = float(np.max(np.abs(P - Q.T))) if P.size else 0.0
    if gap > tol:
        raise DualityError(f"joint distributions differ by {gap:.3g}")
    return dual


def thm3_lower_bound(lam, hats, eps, d, l):
    """Lower bound on log2 M for block POVMs whose marginals are eps-close.

    l * (H(rho) - sum_j lam_j H(hat_j) + (3 eps / lam0^2) log2(2 eps / (lam0^2 d)))
    with rho = sum_j lam_j hat_j; requires 0 <= eps <= (lam0 / 2)^2 (eps = 0
    is the limit, the correction vanishing).
    """
    lam = np.asarray(lam, dtype=float)
    lam0 = float(lam.min())
    if not lam0 > 0:
        raise InapplicableBound("smallest outcome weight must be positive")
    if not 0 <= eps <= (lam0 / 2) ** 2:
        raise InapplicableBound(f"eps = {eps:.3g} outside [0, (lam0/2)^2 = {(lam0 / 2) ** 2:.3g}]")
    hats = np.asarray(hats)
    rho = np.einsum("j,jxy->xy", lam, hats)
    defect = _entropy_unchecked(rho) - float(sum(p * _entropy_unchecked(h) for p, h in zip(lam, hats)))
    corr = 0.0 if eps == 0 else 3 * eps / lam0**2 * math.log2(2 * eps / (lam0**2 * d))
    return l * (defect + corr)


# entropy lemmas

def holevo_quantity(s, states):
    s = np.asarray(s, dtype=float)
    avg = np.einsum("i,ixy->xy", s, states)
    return _entropy_unchecked(avg) - float(sum(p * _entropy_unchecked(x) for p, x in zip(s, states)))


class LemmaResult(NamedTuple):
    lemma: str
    lhs: float
    rhs: float
    slack: float
    premise: bool


def mixing_entropy_check(lam, states):
    """H(sum lam_j sigma_j) <= H(lam) + sum lam_j H(sigma_j)."""
    lam = np.asarray(lam, dtype=float)
    lhs = _entropy_unchecked(np.einsum("j,jxy->xy", lam, states))
    rhs = shannon_entropy(lam) + float(sum(p * _entropy_unchecked(x) for p, x in zip(lam, states)))
    return LemmaResult("entropy_mixing", lhs, rhs, rhs - lhs, True)


def superadditivity_check(s, states, dims, tol=1e-9):
    """I(s; sigma) >= I(s; Tr_2 sigma) + I(s; Tr_1 sigma) when the average is a product."""
    d1, d2 = dims
    avg = np.einsum("i,ixy->xy", s, states)
    prod = np.kron(partial_trace(avg, dims, [1]), partial_trace(avg, dims, [0]))
    premise = trace_norm(avg - prod) <= tol
    lhs = holevo_quantity(s, states)
    r1 = holevo_quantity(s, np.array([partial_trace(x, dims, [1]) for x in states]))
    r2 = holevo_quantity(s, np.array([partial_trace(x, dims, [0]) for x in states]))
    return LemmaResult("holevo_superadditivity", lhs, r1 + r2, lhs - r1 - r2, bool(premise))


def grouping_check(s, states, partition):
    """I(s; sigma) >= I(s~; sigma~) for a grouping of the indices."""
    s = np.asarray(s, dtype=float)
    flat = sorted(i for g in partition for i in g)
    if flat != list(range(len(s))):
        raise ValueError("not a partition of the index set")
    st = np.array([s[list(g)].sum() for g in partition])
    grouped = np.array([np.einsum("i,ixy->xy", s[list(g)], states[list(g)]) / w for g, w in zip(partition, st)])
    lhs = holevo_quantity(s, states)
    rhs = holevo_quantity(st, grouped)
    return LemmaResult("holevo_grouping", lhs, rhs, lhs - rhs, True)


def continuity_check(rho, sigma, alpha=None):
    """|H(rho) - H(sigma)| <= -alpha log2(alpha / d) for ||rho - sigma||_1 <= alpha <= 1/2."""
    dist = trace_norm(rho - sigma)
    alpha = dist if alpha is None else alpha
    d = rho.shape[0]
    premise = dist <= alpha + 1e-15 and alpha <= 0.5
    lhs = abs(_entropy_unchecked(rho) - _entropy_unchecked(sigma))
    rhs = 0.0 if alpha == 0 else -alpha * math.log2(alpha / d)
    return LemmaResult("entropy_continuity", lhs, rhs, rhs - lhs, bool(premise))


def product_average_instance(d1, d2, n, rng):
    """States on H1⊗H2 whose weighted average is exactly a product state.

    sigma_i = P + e (tau_i - tau_avg) with P the product of the marginals of
    tau_avg and e the largest value in (0, 1] keeping every sigma_i PSD.
    Returns None when e would be negligible.
    """
    dims = (d1, d2)
    tau = np.array([random_density(d1 * d2, rng) for _ in range(n)])
    s = rng.dirichlet(np.ones(n))
    avg = np.einsum("i,ixy->xy", s, tau)
    P = np.kron(partial_trace(avg, dims, [1]), partial_trace(avg, dims, [0]))
    low = min_eig(P)
    devs = [tau_i - avg for tau_i in tau]
    worst = max(max(0.0, -min_eig(x)) for x in devs)
    e = 1.0 if worst == 0 else min(1.0, 0.999 * low / worst)
    if e < 1e-6:
        return None
    states = np.array([P + e * x for x in devs])
    return s, states, dims


def entropy_lemma_checks(n=200, seed=0, dmax=6):
    """Run each lemma on ``n`` random instances; returns per-lemma summaries."""
    rng = np.random.default_rng(seed)
    out = {}
    res = []
    for _ in range(n):
        d = int(rng.integers(2, dmax + 1))
        k = int(rng.integers(2, 6))
        lam = rng.dirichlet(np.ones(k))
        res.append(mixing_entropy_check(lam, np.array([random_density(d, rng, rank=int(rng.integers(1, d + 1))) for _ in range(k)])))
    out["entropy_mixing"] = res
    res = []
    while len(res) < n:
        d1, d2 = (int(x) for x in rng.integers(2, 4, size=2))
        inst = product_average_instance(d1, d2, int(rng.integers(2, 5)), rng)
        if inst is None:
            continue
        res.append(superadditivity_check(*inst))
    out["holevo_superadditivity"] = res
    res = []
    for _ in range(n):
        d = int(rng.integers(2, dmax + 1))
        k = int(rng.integers(2, 7))
        s = rng.dirichlet(np.ones(k))
        states = np.array([random_density(d, rng) for _ in range(k)])
        labels = rng.integers(0, int(rng.integers(1, k + 1)), size=k)
        partition = [list(np.flatnonzero(labels == g)) for g in np.unique(labels)]
        res.append(grouping_check(s, states, partition))
    out["holevo_grouping"] = res
    res = []
    for _ in range(n):
        d = int(rng.integers(2, dmax + 1))
        rho = random_density(d, rng)
        tau = random_density(d, rng)
        dist = trace_norm(rho - tau)
        t = rng.uniform(0, 1) * min(1.0, 0.5 / dist) if dist > 0 else 0.0
        sigma = (1 - t) * rho + t * tau
        res.append(continuity_check(rho, sigma))
    out["entropy_continuity"] = res
    return {
        name: {
            "instances": len(r),
            "min_slack": float(min(x.slack for x in r)),
            "premise_failures": int(sum(not x.premise for x in r)),
            "pass": bool(all(x.premise and x.slack >= -1e-9 for x in r)),
        }
        for name, r in out.items()
    }


# operator large deviations

def chernoff_bound(dimK, s, eta, M):
    return dimK * math.exp(-M * eta**2 * s / (2 * math.log(2)))


def chernoff_family(dimK, s, rng, size=6):
    """Operators in [0, I] whose uniform average sigma has smallest eigenvalue exactly s."""
    Y = []
    for _ in range(size):
        X = random_psd(dimK, rng)
        Y.append(X / operator_norm(X))
    Y = np.array(Y)
    lo = min_eig(Y.mean(axis=0))
    if s >= lo:
        w = (s - lo) / (1 - lo)
        X = (1 - w) * Y + w * np.eye(dimK)[None]
    else:
        X = Y * (s / lo)
    return X


class ChernoffResult(NamedTuple):
    dimK: int
    s: float
    eta: float
    M: int
    trials: int
    empirical_tail: float
    bound: float
    stderr: float

    @property
    def passes(self):
        return self.empirical_tail <= self.bound + 3 * self.stderr


def operator_chernoff_mc(dimK, s, eta, M, trials, seed, family_size=6):
    if not 0 < s <= 1:
        raise ValueError("s must lie in (0, 1]")
    root = np.random.SeedSequence(seed)
    fam_seq, *trial_seqs = root.spawn(trials + 1)
    X = chernoff_family(dimK, s, np.random.default_rng(fam_seq), family_size)
    n = len(X)
    sigma = X.mean(axis=0)
    w = op_inv_sqrt_on_support(sigma)
    Xw = w @ X @ w
    counts = np.array([np.random.default_rng(q).multinomial(M, np.full(n, 1.0 / n)) for q in trial_seqs])
    avg = np.einsum("tn,nab->tab", counts / M, Xw)
    top = np.linalg.eigvalsh(0.5 * (avg + avg.conj().swapaxes(-1, -2)))[:, -1]
    fails = int(np.sum(top > 1 + eta + 1e-12))
    bound = chernoff_bound(dimK, s, eta, M)
    p = min(max(bound, 0.0), 1.0)
    stderr = math.sqrt(p * (1 - p) / trials)
    return ChernoffResult(int(dimK), float(s), float(eta), int(M), int(trials), fails / trials, bound, stderr)


DEFAULT_CHERNOFF_GRID = (
    (1, 0.5, 0.5, 32),
    (2, 0.25, 0.5, 64),
    (2, 0.5, 1.0, 16),
    (3, 0.3, 0.5, 128),
    (4, 0.25, 1.0, 64),
    # cells with a visible empirical tail
    (2, 0.25, 0.3, 64),
    (2, 0.5, 0.2, 32),
)


# Holevo bound through compression

def random_triple(d, n, m, rng):
    from .quantum import random_ensemble

    return Triple(random_ensemble(d, n, rng), random_povm(d, m, rng))


def block_joint_distribution(e: Ensemble, A):
    """P(i^l, mu) = mu_{i^l} Tr(sigma_{i^l} A_mu) over all source words."""
    from . import kernels

    n = len(e)
    l = A.l
    src = kernels.all_words(n, l)
    P = np.empty((len(src), A.outcomes))
    for r, w in enumerate(src):
        sig = tensor_product([e.states[i] for i in w])
        p = float(np.prod(e.probs[w]))
        P[r] = p * np.einsum("xy,myx->m", sig, A.elements).real
    return src, P


def holevo_via_compression_chain(t: Triple, l, config=None, result=None):
    """Evaluate each link of the classical chain on a compressed POVM of (rho, a).

    The fidelity of a POVM is the mutual information between the ensemble
    labels and its outcomes. ``eps`` is chosen as the smallest value making
    the two outer links hold, so the substantive content is in the inner
    links.
    """
    from .pipeline import CompressionConfig, compress

    rho = t.average
    if result is None:
        config = CompressionConfig(l=l, delta=3.0) if config is None else config
        result = compress(rho, t.povm, config)
    if not result.success:
        return {"success": False, "links": None, "pass": False}
    A = result.A
    canon = canonical_ensemble(rho, t.povm)
    chi = entropy_defect(canon)
    # the compressed POVM lives on supp(rho); states restricted the same way
    V = result_basis(rho)
    st = np.array([V.conj().T @ s @ V for s in t.ensemble.states])
    e = Ensemble(np.array([x / np.trace(x).real for x in st]), t.ensemble.probs)
    src, P = block_joint_distribution(e, A)
    n = len(e)
    I_block = mutual_information(P)
    per_k = []
    per_k_f = []
    for k in range(l):
        Pk = np.zeros((n, A.outcomes))
        np.add.at(Pk, src[:, k], P)
        per_k.append(mutual_information(Pk))
        Pf = np.zeros((n, A.m))
        for j in range(A.m):
            Pf[:, j] = Pk[:, A.words[:, k] == j].sum(axis=1)
        per_k_f.append(mutual_information(Pf))
    from .marginals import marginals

    marg = marginals(A, result_rho(rho))
    F_A = float(np.mean([mutual_information(e.probs[:, None] * np.einsum("ixy,jyx->ij", e.states, marg[k]).real)
                         for k in range(l)]))
    F_a = mutual_information(joint_distribution(t))
    logM = math.log2(A.outcomes) / l
    eps = max(0.0, logM - chi, F_a - F_A)
    values = [
        ("chi+eps", chi + eps),
        ("log2(M)/l", logM),
        ("I(X^l;Y)/l", I_block / l),
        ("sum_k I(X_k;Y)/l", sum(per_k) / l),
        ("sum_k I(X_k;f_k(Y))/l", sum(per_k_f) / l),
    ]
    links = [{"upper": a[0], "lower": b[0], "slack": a[1] - b[1]} for a, b in zip(values, values[1:])]
    links.append({"upper": values[-1][0], "lower": "F(A)", "slack": -abs(values[-1][1] - F_A), "kind": "equality"})
    links.append({"upper": "F(A)", "lower": "F(a)-eps", "slack": F_A - (F_a - eps)})
    return {
        "success": True,
        "eps": eps,
        "chi": chi,
        "F_A": F_A,
        "F_a": F_a,
        "values": dict(values),
        "links": links,
        "pass": bool(all(x["slack"] >= -1e-8 for x in links)),
    }


def result_basis(rho):
    from .linalg import support

    return support(rho)


def result_rho(rho):
    V = result_basis(rho)
    r = V.conj().T @ rho @ V
    return 0.5 * (r + r.conj().T) / np.trace(r).real
