"""Acceptance gate: one test per criterion, each recording a pass/fail line.

Run with ``pytest tests/test_acceptance.py``; the summary section lists all
twelve criteria. Every check is evaluated at its stated tolerance.
"""
import itertools
import json
import time

import numpy as np
import pytest

from povm_squeeze import cli
from povm_squeeze.bounds import (
    DEFAULT_CHERNOFF_GRID,
    Triple,
    dual_triple,
    entropy_lemma_checks,
    holevo_check,
    joint_distribution,
    operator_chernoff_mc,
    random_triple,
    thm3_lower_bound,
)
from povm_squeeze.io import problem_to_json
from povm_squeeze.kernels import all_words
from povm_squeeze.linalg import operator_norm, random_density
from povm_squeeze.marginals import marginals, product_povm
from povm_squeeze.pipeline import CompressionConfig, build_stages, select_and_finish
from povm_squeeze.problems import REFERENCE_PROBLEMS, rank2_qubit, trivial_qubit
from povm_squeeze.quantum import (
    Ensemble,
    KrausInstrument,
    Povm,
    canonical_ensemble,
    post_measurement_state,
    random_povm,
    spectrum_conjugacy_check,
    von_neumann_entropy,
)
from povm_squeeze.typicality import verify_deletion_monotonicity, verify_projector_bounds

from conftest import record

LS = (2, 3, 4, 5, 6)
DELTAS = (2.0, 3.0)
SEEDS = (0, 1, 2)


def dual_gap(t):
    """Entrywise gap between the joint of t and the transposed joint of its dual."""
    dual = dual_triple(t, tol=np.inf)
    kept = list(canonical_ensemble(t.average, t.povm).kept)
    return float(np.max(np.abs(joint_distribution(t).P[:, kept] - joint_distribution(dual).P.T)))


@pytest.fixture(scope="module")
def grid():
    """(problem, l, delta) -> (bundle, [result per seed]) plus wall time."""
    t0 = time.perf_counter()
    out = {}
    for name, f in REFERENCE_PROBLEMS.items():
        rho, a = f()
        for l, delta in itertools.product(LS, DELTAS):
            b = build_stages(rho, a, l, delta)
            out[name, l, delta] = (b, [select_and_finish(b, CompressionConfig(l=l, delta=delta, seed=s))
                                       for s in SEEDS])
    return out, time.perf_counter() - t0


def test_c01_povm_validity(grid):
    cells, wall = grid
    worst_sum, worst_eig, failed = 0.0, 0.0, 0
    for (b, results) in cells.values():
        for r in results:
            if not r.success:
                failed += 1
                continue
            E = r.A.elements
            worst_sum = max(worst_sum, float(np.max(np.abs(E.sum(axis=0) - np.eye(E.shape[1])))))
            worst_eig = min(worst_eig, min(float(np.linalg.eigvalsh(x).min()) for x in E))
    ok = failed == 0 and worst_sum <= 1e-9 and worst_eig >= -1e-10 and wall <= 300
    record(1, ok, f"max|sum A - I| = {worst_sum:.2e}, min eig = {worst_eig:.2e}, "
                  f"{failed} failed runs, {wall:.1f}s")
    assert ok


def test_c02_marginal_identity():
    worst = 0.0
    for name, f in REFERENCE_PROBLEMS.items():
        rho, a = f()
        for l in LS:
            marg = marginals(product_povm(a, l), rho)
            worst = max(worst, max(operator_norm(marg[k, j] - a[j]) for k in range(l) for j in range(len(a))))
    ok = worst <= 1e-10
    record(2, ok, f"max operator-norm gap = {worst:.2e}")
    assert ok


def test_c03_c3_budget(grid):
    cells, _ = grid
    worst, runs = -np.inf, 0
    for (b, results) in cells.values():
        for r in results:
            if r.success:
                runs += 1
                worst = max(worst, r.c3 - r.c3_budget)
    ok = runs > 0 and worst <= 1e-9
    record(3, ok, f"max(C3 - budget) = {worst:.3g} over {runs} runs")
    assert ok


def test_c04_stage_props(grid):
    cells, _ = grid
    failures = [f"{key}: {k}" for key, (b, _) in cells.items() for k, v in b.props.items() if not v["pass"]]
    n = len(next(iter(cells.values()))[0].props)
    ok = not failures
    record(4, ok, f"{n} checks x {len(cells)} cells, {len(failures)} failures")
    assert ok, failures[:5]


def test_c05_typicality(grid):
    cells, _ = grid
    fails = []
    for name, f in REFERENCE_PROBLEMS.items():
        rho, a = f()
        canon = canonical_ensemble(rho, Povm(a))
        for l, delta in itertools.product(LS, DELTAS):
            v = verify_projector_bounds(rho, canon, l, delta)
            if not (v["state_mass_pass"] and v["conditional_mass_pass"]):
                fails.append(f"{name} l={l} d={delta} projector weights")
            b = cells[name, l, delta][0]
            if b.T.mass < 1 - b.ctx.m / delta**2 - 1e-12:
                fails.append(f"{name} l={l} d={delta} S")
    # deletion monotonicity: every grid cell where delta >= 2/r, unconditional and per word
    applied = skipped = 0
    for name, f in REFERENCE_PROBLEMS.items():
        rho, a = f()
        canon = canonical_ensemble(rho, Povm(a))
        for l, delta in itertools.product(LS, DELTAS):
            for k in range(l):
                checks = [verify_deletion_monotonicity(rho, l, delta, k)]
                checks += [verify_deletion_monotonicity(rho, l, delta, k, hats=canon, word=w)
                           for w in all_words(len(canon.kept), l)]
                for c in checks:
                    if not c.applicable:
                        skipped += 1
                    elif c.holds:
                        applied += 1
                    else:
                        applied += 1
                        fails.append(f"{name} l={l} d={delta} k={k} deletion")
    # the grid deltas never reach 2/r here, so also test just above the threshold
    extra = 0
    for name, f in REFERENCE_PROBLEMS.items():
        rho, a = f()
        canon = canonical_ensemble(rho, Povm(a))
        r = float(np.linalg.eigvalsh(rho).min())
        rc = min(float(np.linalg.eigvalsh(x).min()) for x in canon.states)
        for l in (2, 3, 4):
            for k in range(l):
                checks = [verify_deletion_monotonicity(rho, l, 2 / r + 0.5, k)]
                if rc > 1e-9:
                    checks += [verify_deletion_monotonicity(rho, l, 2 / rc + 0.5, k, hats=canon, word=w)
                               for w in all_words(len(canon.kept), l)]
                for c in checks:
                    extra += 1
                    if not (c.applicable and c.holds):
                        fails.append(f"{name} l={l} k={k} deletion above threshold")
    ok = not fails
    record(5, ok, f"projector weights and S on {len(cells)} cells; deletion on grid {applied} applicable, "
                  f"{skipped} skipped (delta < 2/r), {extra} above threshold; {len(fails)} failures")
    assert ok, fails[:5]


def test_c06_converse_bound(grid):
    cells, _ = grid
    # the trivial POVM is the only desk-scale case with eps inside the bound's range
    extra = []
    rho, a = trivial_qubit()
    for l, delta in itertools.product(LS, DELTAS):
        b = build_stages(rho, a, l, delta)
        extra.append((b, [select_and_finish(b, CompressionConfig(l=l, delta=delta, seed=s)) for s in SEEDS]))
    applicable = violations = total = 0
    for (b, results) in list(cells.values()) + extra:
        for r in results:
            if not r.success:
                continue
            total += 1
            lam0 = r.lambda_min
            if r.c3 <= (lam0 / 2) ** 2:
                applicable += 1
                bound = max(0.0, thm3_lower_bound(b.ctx.lam, b.ctx.canon.states, r.c3, b.ctx.d, r.config.l))
                if np.log2(r.M) < bound - 1e-12:
                    violations += 1
    ok = violations == 0
    record(6, ok, f"{applicable} of {total} runs in range, {violations} violations")
    assert ok


def test_c07_holevo():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst_slack, worst_dual = np.inf, 0.0
    for _ in range(100):
        d = int(rng.integers(2, 5))
        t = random_triple(d, int(rng.integers(2, 5)), int(rng.integers(2, 5)), rng)
        rep = holevo_check(t)
        worst_slack = min(worst_slack, rep.slack_ensemble, rep.slack_measurement)
        worst_dual = max(worst_dual, dual_gap(t))
    worst_classical = 0.0
    for _ in range(20):
        d = int(rng.integers(2, 5))
        n = int(rng.integers(2, 5))
        states = np.array([np.diag(rng.dirichlet(np.ones(d))) for _ in range(n)]).astype(complex)
        e = Ensemble(states, rng.dirichlet(np.ones(n)))
        rep = holevo_check(Triple(e, Povm(np.array([np.diag(np.eye(d)[i]) for i in range(d)]).astype(complex))))
        worst_classical = max(worst_classical, abs(rep.slack_ensemble))
    wall = time.perf_counter() - t0
    ok = worst_slack >= -1e-9 and worst_dual <= 1e-10 and worst_classical <= 1e-8 and wall <= 60
    record(7, ok, f"min slack = {worst_slack:.2e}, duality gap = {worst_dual:.2e}, "
                  f"classical gap = {worst_classical:.2e}, {wall:.1f}s")
    assert ok


def test_c08_spectrum_conjugacy():
    rng = np.random.default_rng(8)
    worst_spec, worst_ent = 0.0, 0.0
    for _ in range(100):
        d = int(rng.integers(2, 5))
        rho = random_density(d, rng)
        a = random_povm(d, int(rng.integers(2, 4)), rng)
        for aj in a.elements:
            worst_spec = max(worst_spec, spectrum_conjugacy_check(rho, aj)[2])
        canon = canonical_ensemble(rho, a)
        ins = KrausInstrument.luders(a)
        for idx, j in enumerate(canon.kept):
            sig, _ = post_measurement_state(ins, rho, j)
            worst_ent = max(worst_ent, abs(von_neumann_entropy(sig) - von_neumann_entropy(canon.states[idx])))
    ok = worst_spec <= 1e-9 and worst_ent <= 1e-8
    record(8, ok, f"spectrum gap = {worst_spec:.2e}, entropy gap = {worst_ent:.2e}")
    assert ok


def test_c09_chernoff_mc():
    t0 = time.perf_counter()
    rows = [operator_chernoff_mc(*cell, trials=10_000, seed=9) for cell in DEFAULT_CHERNOFF_GRID]
    wall = time.perf_counter() - t0
    bad = [r for r in rows if not r.passes]
    ok = not bad and wall <= 120
    tails = ", ".join(f"{r.empirical_tail:.4f}<={r.bound:.3g}" for r in rows)
    record(9, ok, f"{len(rows)} cells: {tails}; {wall:.1f}s")
    assert ok


def test_c10_rate_trend(grid):
    cells, _ = grid
    rho, _ = rank2_qubit()
    H = von_neumann_entropy(rho)
    below, trend = [], []
    for delta in DELTAS:
        for s in range(len(SEEDS)):
            rates = [cells["rank2", l, delta][1][s].rate for l in LS]
            trend.append(all(r1 <= r0 for r0, r1 in zip(rates, rates[1:])))
            below += [(l, delta, r) for l, r in zip(LS, rates) if l >= 4 and not r < H]
    ok = not below and all(trend)
    detail = f"H(rho) = {H:.4f}; "
    detail += "all rates below H" if not below else (
        f"{len(below)} cells with rate >= H, e.g. l={below[0][0]} delta={below[0][1]} rate={below[0][2]:.4f}")
    detail += "; non-increasing" if all(trend) else "; trend violated"
    record(10, ok, detail)
    assert ok, detail


def test_c11_entropy_lemmas():
    out = entropy_lemma_checks(n=200, seed=11)
    ok = all(v["pass"] and v["instances"] == 200 for v in out.values())
    record(11, ok, ", ".join(f"{k} min slack {v['min_slack']:.2e}" for k, v in out.items()))
    assert ok


def test_c12_determinism(tmp_path):
    rho, a = rank2_qubit()
    cfg = {"problem": problem_to_json(a, rho=rho), "grid": {"l": list(LS), "delta": list(DELTAS), "seeds": list(SEEDS)}}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    for out in ("a", "b"):
        assert cli.main(["compress", "--config", str(path), "--out", str(tmp_path / out)]) == 0
    same = (tmp_path / "a" / "compress.csv").read_bytes() == (tmp_path / "b" / "compress.csv").read_bytes()
    record(12, same, "compress.csv identical across two runs" if same else "CSV differs")
    assert same
