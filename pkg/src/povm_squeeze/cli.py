"""Command-line front end.

Exit codes: 0 ok, 1 runtime error, 2 validation failure, 3 suite failure.
"""
import argparse
import datetime
import json
import os
import platform
import sys

import numpy as np

from . import __version__, kernels
from .bounds import (
    DEFAULT_CHERNOFF_GRID,
    Triple,
    dual_triple,
    holevo_check,
    holevo_via_compression_chain,
    joint_distribution,
    operator_chernoff_mc,
)
from .io import ConfigError, load_config, to_jsonable
from .pipeline import CompressionConfig
from .quantum import Ensemble, Povm
from .runner import fmt, rows_to_csv, run_grid, summaries_to_rows
from .suite import run_suite

EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, EXIT_SUITE = 0, 1, 2, 3
SEED_ENV = "POVM_SQUEEZE_SEED"


def _seeds(cfg, args):
    env = os.environ.get(SEED_ENV)
    if env is not None:
        return [int(env)]
    if args.seed is not None:
        return [int(args.seed)]
    return list(cfg.seeds)


def _stamp(seeds):
    return {
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "seeds": seeds,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }


def _write(out_dir, name, text):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _dump(obj):
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=False) + "\n"


def _require_config(args):
    if not args.config:
        raise ConfigError("--config is required")
    return load_config(args.config)


def cmd_validate(args):
    cfg = _require_config(args)
    if cfg.problem is None:
        raise ConfigError("problem: missing")
    p = cfg.problem
    print(f"ok: dimension {p.povm.shape[1]}, {len(p.povm)} outcomes"
          + (f", {len(p.ensemble)} ensemble states" if p.ensemble is not None else ""))
    return EXIT_OK


def cmd_compress(args):
    cfg = _require_config(args)
    if cfg.problem is None:
        raise ConfigError("problem: missing")
    seeds = _seeds(cfg, args)
    cap_dim = args.cap_dim if args.cap_dim is not None else cfg.cap_dim
    p = cfg.problem
    summaries = run_grid(p.state, p.povm, cfg.l, cfg.delta, seeds, workers=args.workers,
                         ensemble=p.ensemble, F=p.fidelity, eta=cfg.eta, M_override=cfg.M_override,
                         nu=cfg.nu, cap_dim=cap_dim, cap_words=cfg.cap_words,
                         loewner_tol=cfg.loewner_tol, povm_tol=cfg.povm_tol)
    out_dir = args.out or cfg.out
    csv_path = _write(out_dir, "compress.csv", rows_to_csv(summaries_to_rows(summaries)))
    report = {"environment": _stamp(seeds), "grid": {"l": cfg.l, "delta": cfg.delta, "seeds": seeds},
              "cells": summaries}
    json_path = _write(out_dir, "compress.json", _dump(report))
    errors = [s for s in summaries if "error" in s]
    print(f"{len(summaries)} cells, {len(errors)} errors; wrote {csv_path} and {json_path}")
    for s in errors:
        print(f"  l={s['l']} delta={s['delta']} seed={s['seed']}: {s['error']}", file=sys.stderr)
    return EXIT_OK


def cmd_suite(args):
    problem = None
    trials = 2000
    seeds = [0]
    if args.config:
        cfg = load_config(args.config, validate=False)
        if cfg.problem is not None:
            problem = (cfg.problem.state if cfg.problem.rho is not None else None, cfg.problem.povm)
            if problem[0] is None:
                st, pr = cfg.problem.ensemble
                problem = (np.einsum("i,ixy->xy", pr, st), cfg.problem.povm)
        trials = int(cfg.suite.get("chernoff_trials", trials))
        seeds = cfg.seeds
    env = os.environ.get(SEED_ENV)
    seed = int(env) if env is not None else (int(args.seed) if args.seed is not None else int(seeds[0]))
    res = run_suite(seed=seed, problem=problem, chernoff_trials=trials)
    width = max(len(k) for k in res)
    for name, r in res.items():
        print(f"{name:<{width}}  {'PASS' if r['pass'] else 'FAIL'}")
    if args.out:
        _write(args.out, "suite.json", _dump({"environment": _stamp([seed]), "results": res}))
    return EXIT_OK if all(r["pass"] for r in res.values()) else EXIT_SUITE


def cmd_holevo(args):
    cfg = _require_config(args)
    p = cfg.problem
    if p is None or p.ensemble is None:
        raise ConfigError("problem.ensemble: the holevo command needs an ensemble")
    t = Triple(p.ensemble, Povm(p.povm))
    rep = holevo_check(t)
    out = {"holevo": rep._asdict(), "joint": joint_distribution(t).P}
    try:
        dual = dual_triple(t)
        out["dual"] = {"ok": True, "joint": joint_distribution(dual).P}
    except Exception as exc:
        out["dual"] = {"ok": False, "error": str(exc)}
    h = cfg.holevo
    env = os.environ.get(SEED_ENV)
    seed = int(env) if env is not None else (args.seed if args.seed is not None else int(h.get("seed", cfg.seeds[0])))
    l = int(h.get("l", cfg.l[0]))
    conf = CompressionConfig(l=l, delta=float(h.get("delta", cfg.delta[0])), seed=int(seed))
    out["chain"] = holevo_via_compression_chain(t, l, conf)
    out["environment"] = _stamp([int(seed)])
    print(f"I(X;Y) = {rep.I_XY:.6f}  chi_ensemble = {rep.chi_ensemble:.6f}  chi_measurement = {rep.chi_measurement:.6f}")
    print(f"dual triple: {'ok' if out['dual']['ok'] else out['dual']['error']}")
    print(f"chain: {'holds' if out['chain']['pass'] else 'violated'}")
    if args.out or cfg.out:
        _write(args.out or cfg.out, "holevo.json", _dump(out))
    return EXIT_OK


def cmd_chernoff(args):
    grid = DEFAULT_CHERNOFF_GRID
    trials = 10000
    seed = 0
    out_dir = args.out
    if args.config:
        cfg = load_config(args.config, validate=False)
        c = cfg.chernoff
        grid = tuple(tuple(g) for g in c.get("grid", grid))
        trials = int(c.get("trials", trials))
        seed = int(c.get("seed", seed))
        out_dir = out_dir or cfg.out
    env = os.environ.get(SEED_ENV)
    if env is not None:
        seed = int(env)
    elif args.seed is not None:
        seed = int(args.seed)
    rows = [operator_chernoff_mc(int(g[0]), float(g[1]), float(g[2]), int(g[3]), trials, seed) for g in grid]
    cols = ("dimK", "s", "eta", "M", "trials", "empirical_tail", "bound")
    lines = [",".join(cols)] + [",".join(fmt(getattr(r, c)) for c in cols) for r in rows]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if out_dir:
        _write(out_dir, "chernoff.csv", text)
    return EXIT_OK if all(r.passes for r in rows) else EXIT_SUITE


def build_parser():
    p = argparse.ArgumentParser(prog="povm-squeeze", description="Compression of product measurements.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, hlp in (
        ("validate", cmd_validate, "check a configuration"),
        ("compress", cmd_compress, "run the compression grid"),
        ("suite", cmd_suite, "run the invariant suite"),
        ("holevo", cmd_holevo, "Holevo bounds, dual triple and chain"),
        ("chernoff-mc", cmd_chernoff, "operator large-deviation Monte Carlo"),
    ):
        sp = sub.add_parser(name, help=hlp)
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--workers", type=int, default=1, metavar="N")
        sp.add_argument("--seed", type=int, metavar="U64")
        sp.add_argument("--cap-dim", type=int, metavar="N")
        sp.set_defaults(func=fn)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, RuntimeError, ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
