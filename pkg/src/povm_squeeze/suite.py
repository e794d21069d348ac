"""Invariant suite: every named check returns a pass flag and a short detail."""
import numpy as np

from .bounds import (
    DEFAULT_CHERNOFF_GRID,
    Triple,
    dual_triple,
    entropy_lemma_checks,
    holevo_check,
    holevo_via_compression_chain,
    joint_distribution,
    operator_chernoff_mc,
    random_triple,
)
from .linalg import random_density, random_psd, support
from .pipeline import CompressionConfig, build_stages, select_and_finish
from .problems import REFERENCE_PROBLEMS, classical_triple
from .quantum import (
    KrausInstrument,
    Povm,
    _entropy_unchecked,
    canonical_ensemble,
    post_measurement_state,
    random_povm,
    spectrum_conjugacy_check,
)
from .typicality import (
    partial_trace_projection_lemma_check,
    verify_deletion_monotonicity,
    verify_projector_bounds,
)


def _entry(ok, **detail):
    return {"pass": bool(ok), **detail}


def check_problem(rho, a):
    try:
        Povm(a)
    except ValueError as exc:
        return _entry(False, error=str(exc))
    return _entry(True)


def check_props_grid(problems, ls, deltas, seed):
    worst = []
    ok = True
    povm_ok = True
    for name, (rho, a) in problems.items():
        for l in ls:
            for d in deltas:
                b = build_stages(rho, a, l, d)
                failed = [k for k, v in b.props.items() if not v["pass"]]
                if failed:
                    ok = False
                    worst.append(f"{name} l={l} delta={d}: {','.join(failed)}")
                res = select_and_finish(b, CompressionConfig(l=l, delta=d, seed=seed))
                if res.success:
                    tot = res.A.elements.sum(axis=0)
                    if np.max(np.abs(tot - np.eye(len(tot)))) > 1e-9:
                        povm_ok = False
    return _entry(ok, failures=worst), _entry(povm_ok)


def check_typicality(problems, ls, deltas):
    fails = []
    for name, (rho, a) in problems.items():
        canon = canonical_ensemble(rho, Povm(a))
        for l in ls:
            for d in deltas:
                rep = verify_projector_bounds(rho, canon, l, d)
                if not (rep["state_mass_pass"] and rep["conditional_mass_pass"]):
                    fails.append(f"{name} l={l} delta={d}")
    return _entry(not fails, failures=fails)


def check_deletion(problems, ls):
    fails = []
    checked = 0
    for name, (rho, a) in problems.items():
        canon = canonical_ensemble(rho, Povm(a))
        V = support(rho)
        r = float(np.linalg.eigvalsh(V.conj().T @ rho @ V).min())
        delta = 2.0 / r + 0.5
        for l in ls:
            for k in range(l):
                c = verify_deletion_monotonicity(rho, l, delta, k)
                if c.applicable:
                    checked += 1
                    if not c.holds:
                        fails.append(f"{name} l={l} k={k}")
            rc = min(float(np.linalg.eigvalsh(s).min()) for s in canon.states)
            if rc > 1e-9:
                word = np.arange(l) % len(canon)
                c = verify_deletion_monotonicity(rho, l, 2.0 / rc + 0.5, k=0, hats=canon, word=word)
                if c.applicable:
                    checked += 1
                    if not c.holds:
                        fails.append(f"{name} conditional l={l}")
    return _entry(not fails, failures=fails, checked=checked)


def check_partial_trace_projection(rng, n=50):
    fails = 0
    for _ in range(n):
        d1, d2 = 2, 3
        k = int(rng.integers(1, d2))
        Q, _ = np.linalg.qr(rng.standard_normal((d2, d2)) + 1j * rng.standard_normal((d2, d2)))
        Pi0 = Q[:, :k] @ Q[:, :k].conj().T
        base = np.kron(np.eye(d1), Pi0)
        comp = np.eye(d1 * d2) - base
        extra = comp @ (rng.standard_normal((d1 * d2, 2)) + 1j * rng.standard_normal((d1 * d2, 2)))
        U, _ = np.linalg.qr(extra)
        Pi = base + U @ U.conj().T
        C = random_psd(d1 * d2, rng)
        res = partial_trace_projection_lemma_check(C, Pi, Pi0, (d1, d2))
        if not (res.premise and res.holds):
            fails += 1
    return _entry(fails == 0, failures=fails, instances=n)


def check_holevo(rng, n=100):
    worst = np.inf
    dual_gap = 0.0
    for _ in range(n):
        d = int(rng.integers(2, 5))
        t = random_triple(d, int(rng.integers(2, 6)), int(rng.integers(2, 6)), rng)
        rep = holevo_check(t)
        worst = min(worst, rep.slack_ensemble, rep.slack_measurement)
        dual = dual_triple(t)
        P = joint_distribution(t).P
        Q = joint_distribution(dual).P
        dual_gap = max(dual_gap, float(np.max(np.abs(P - Q.T))))
    e, a = classical_triple()
    rep = holevo_check(Triple(e, Povm(a)))
    classical = abs(rep.slack_ensemble)
    ok = worst >= -1e-9 and dual_gap <= 1e-10 and classical <= 1e-8
    return _entry(ok, min_slack=worst, duality_gap=dual_gap, classical_gap=classical)


def check_conjugacy(rng, n=100):
    gap = 0.0
    ent_gap = 0.0
    for _ in range(n):
        d = int(rng.integers(2, 5))
        rho = random_density(d, rng)
        a = random_povm(d, int(rng.integers(2, 4)), rng)
        for aj in a.elements:
            gap = max(gap, spectrum_conjugacy_check(rho, aj)[2])
        ins = KrausInstrument.luders(a)
        canon = canonical_ensemble(rho, a)
        for idx, j in enumerate(canon.kept):
            sig, _ = post_measurement_state(ins, rho, j)
            ent_gap = max(ent_gap, abs(_entropy_unchecked(sig) - _entropy_unchecked(canon.states[idx])))
    return _entry(gap <= 1e-9 and ent_gap <= 1e-8, spectrum_gap=gap, entropy_gap=ent_gap)


def check_chernoff(seed, trials):
    rows = [operator_chernoff_mc(*g, trials=trials, seed=seed) for g in DEFAULT_CHERNOFF_GRID]
    return _entry(all(r.passes for r in rows), tails=[r.empirical_tail for r in rows])


def check_chain(rng, l=3):
    fails = []
    e, a = classical_triple()
    rep = holevo_via_compression_chain(Triple(e, Povm(a)), l, CompressionConfig(l=l, delta=3.0, seed=0))
    if not rep["pass"]:
        fails.append("classical")
    t = random_triple(2, 3, 2, rng)
    rep = holevo_via_compression_chain(t, l, CompressionConfig(l=l, delta=3.0, seed=int(rng.integers(2**31))))
    if not rep["pass"]:
        fails.append("random")
    return _entry(not fails, failures=fails)


def run_suite(seed=0, problem=None, chernoff_trials=2000, ls=(2, 3, 4), deltas=(2.0, 3.0)):
    """Ordered mapping name -> {"pass": bool, ...}.

    ``problem`` (rho, a) replaces the reference problems when given; an
    invalid POVM there fails the ``problem_povm`` check and skips the
    pipeline checks.
    """
    out = {}
    if problem is not None:
        out["problem_povm"] = check_problem(*problem)
        problems = {"config": problem} if out["problem_povm"]["pass"] else {}
    else:
        problems = {k: f() for k, f in REFERENCE_PROBLEMS.items()}
    if problems:
        out["stage_inequalities"], out["povm_validity"] = check_props_grid(problems, ls, deltas, seed)
        out["typical_projector_weights"] = check_typicality(problems, ls, deltas)
        out["deletion_monotonicity"] = check_deletion(problems, ls)
    # instance streams derive from the global seed
    stream = lambda k: np.random.default_rng([int(seed), k])
    out["partial_trace_projection"] = check_partial_trace_projection(stream(1))
    lem = entropy_lemma_checks(200, seed=[int(seed), 2])
    for name, r in lem.items():
        out[name] = _entry(r["pass"], min_slack=r["min_slack"])
    out["operator_chernoff"] = check_chernoff([int(seed), 3], chernoff_trials)
    out["holevo"] = check_holevo(stream(4))
    out["conjugacy"] = check_conjugacy(stream(5))
    out["holevo_chain"] = check_chain(stream(6))
    return out
