"""JSON interchange for matrices and experiment configurations.

A matrix is ``{"dim": d, "entries": [[re, im], ...]}`` with ``d * d``
entries in row-major order.
"""
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .quantum import Ensemble, InvalidPovmError, InvalidStateError, Povm, check_density, ensemble_average


class ConfigError(ValueError):
    """Schema or content violation, with a location prefix."""


def matrix_to_json(M):
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    return {"dim": int(M.shape[0]), "entries": [[float(z.real), float(z.imag)] for z in M.ravel()]}


def matrix_from_json(obj, where="matrix"):
    if not isinstance(obj, dict) or "dim" not in obj or "entries" not in obj:
        raise ConfigError(f"{where}: expected an object with 'dim' and 'entries'")
    d = obj["dim"]
    if not isinstance(d, int) or d < 1:
        raise ConfigError(f"{where}.dim: expected a positive integer")
    ent = obj["entries"]
    if not isinstance(ent, list) or len(ent) != d * d:
        raise ConfigError(f"{where}.entries: expected {d * d} [re, im] pairs")
    out = np.empty(d * d, dtype=complex)
    for i, e in enumerate(ent):
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(x, (int, float)) for x in e)):
            raise ConfigError(f"{where}.entries[{i}]: expected [re, im]")
        out[i] = complex(e[0], e[1])
    return out.reshape(d, d)


@dataclass
class Problem:
    povm: np.ndarray
    rho: Optional[np.ndarray] = None
    ensemble: Optional[Ensemble] = None
    fidelity: Optional[np.ndarray] = None

    @property
    def state(self):
        return self.rho if self.rho is not None else ensemble_average(self.ensemble)


@dataclass
class ExperimentConfig:
    problem: Optional[Problem]
    l: list = field(default_factory=lambda: [2])
    delta: list = field(default_factory=lambda: [3.0])
    seeds: list = field(default_factory=lambda: [0])
    eta: Optional[float] = None
    nu: int = 1
    M_override: Optional[int] = None
    cap_dim: int = 4096
    cap_words: int = 65536
    loewner_tol: float = 1e-9
    povm_tol: float = 1e-9
    out: str = "out"
    chernoff: dict = field(default_factory=dict)
    holevo: dict = field(default_factory=dict)
    suite: dict = field(default_factory=dict)
    name: str = ""


def _list_of(obj, kind, where):
    if not isinstance(obj, list) or not obj:
        raise ConfigError(f"{where}: expected a nonempty list")
    for i, x in enumerate(obj):
        if not isinstance(x, kind) or isinstance(x, bool):
            raise ConfigError(f"{where}[{i}]: expected {getattr(kind, '__name__', 'number')}")
    return obj


def parse_problem(obj, where="problem", validate=True):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    if "povm" not in obj:
        raise ConfigError(f"{where}.povm: missing")
    povm = np.array([matrix_from_json(m, f"{where}.povm[{i}]") for i, m in enumerate(_list_of(obj["povm"], dict, f"{where}.povm"))])
    rho = ens = F = None
    if "rho" in obj:
        rho = matrix_from_json(obj["rho"], f"{where}.rho")
    if "ensemble" in obj:
        e = obj["ensemble"]
        if not isinstance(e, dict) or "states" not in e or "probs" not in e:
            raise ConfigError(f"{where}.ensemble: expected 'states' and 'probs'")
        states = np.array([matrix_from_json(m, f"{where}.ensemble.states[{i}]")
                           for i, m in enumerate(_list_of(e["states"], dict, f"{where}.ensemble.states"))])
        probs = _list_of(e["probs"], (int, float), f"{where}.ensemble.probs")
        ens = (states, np.array(probs, dtype=float))
    if rho is None and ens is None:
        raise ConfigError(f"{where}: needs 'rho' or 'ensemble'")
    if "fidelity" in obj:
        F = np.array(obj["fidelity"], dtype=float)
    prob = Problem(povm=povm, rho=rho, ensemble=None, fidelity=F)
    if not validate:
        prob.ensemble = ens
        return prob
    dims = {m.shape[0] for m in povm}
    if len(dims) != 1:
        raise ConfigError(f"{where}.povm: elements have different dimensions")
    if ens is not None:
        states, probs = ens
        if len(states) != len(probs):
            raise ConfigError(f"{where}.ensemble: {len(states)} states but {len(probs)} probabilities")
        for i, p in enumerate(probs):
            if p < -1e-10:
                raise ConfigError(f"{where}.ensemble.probs[{i}]: negative probability {p:g}")
        try:
            prob.ensemble = Ensemble(states, probs)
        except InvalidStateError as exc:
            raise ConfigError(f"{where}.ensemble: {exc}") from None
    if rho is not None:
        try:
            prob.rho = check_density(rho)
        except (InvalidStateError, ValueError) as exc:
            raise ConfigError(f"{where}.rho: {exc}") from None
        if prob.ensemble is not None and np.max(np.abs(ensemble_average(prob.ensemble) - prob.rho)) > 1e-9:
            raise ConfigError(f"{where}.rho: differs from the ensemble average")
    try:
        prob.povm = Povm(povm).elements
    except InvalidPovmError as exc:
        raise ConfigError(f"{where}.povm: {exc}") from None
    if prob.state.shape[0] != prob.povm.shape[1]:
        raise ConfigError(f"{where}: state and POVM dimensions differ")
    if F is not None:
        n = len(prob.ensemble) if prob.ensemble is not None else None
        if F.ndim != 2 or (n is not None and F.shape != (n, len(povm))):
            raise ConfigError(f"{where}.fidelity: shape {F.shape} does not match (states, outcomes)")
        if np.any(np.abs(F) > 1 + 1e-12):
            raise ConfigError(f"{where}.fidelity: entries must satisfy |F_ij| <= 1")
    return prob


def parse_config(obj, validate=True):
    if not isinstance(obj, dict):
        raise ConfigError("config: expected a JSON object")
    problem = parse_problem(obj["problem"], validate=validate) if "problem" in obj else None
    grid = obj.get("grid", {})
    if not isinstance(grid, dict):
        raise ConfigError("grid: expected an object")
    cfg = ExperimentConfig(problem=problem, name=str(obj.get("name", "")))
    if "l" in grid:
        cfg.l = [int(x) for x in _list_of(grid["l"], int, "grid.l")]
        if any(x < 1 for x in cfg.l):
            raise ConfigError("grid.l: block lengths must be positive")
    if "delta" in grid:
        cfg.delta = [float(x) for x in _list_of(grid["delta"], (int, float), "grid.delta")]
        if any(x <= 0 for x in cfg.delta):
            raise ConfigError("grid.delta: values must be positive")
    if "seeds" in grid:
        cfg.seeds = [int(x) for x in _list_of(grid["seeds"], int, "grid.seeds")]
        if len(set(cfg.seeds)) != len(cfg.seeds):
            raise ConfigError("grid.seeds: seeds must be distinct")
        if any(s < 0 or s >= 2**64 for s in cfg.seeds):
            raise ConfigError("grid.seeds: seeds must be unsigned 64-bit integers")
    for key in ("eta", "M_override"):
        if obj.get(key) is not None:
            setattr(cfg, key, obj[key])
    if "nu" in obj:
        cfg.nu = int(obj["nu"])
    caps = obj.get("caps", {})
    cfg.cap_dim = int(caps.get("dim", cfg.cap_dim))
    cfg.cap_words = int(caps.get("words", cfg.cap_words))
    tol = obj.get("tolerances", {})
    cfg.loewner_tol = float(tol.get("loewner", cfg.loewner_tol))
    cfg.povm_tol = float(tol.get("povm", cfg.povm_tol))
    cfg.out = str(obj.get("out", cfg.out))
    for key in ("chernoff", "holevo", "suite"):
        v = obj.get(key, {})
        if not isinstance(v, dict):
            raise ConfigError(f"{key}: expected an object")
        setattr(cfg, key, v)
    return cfg


def load_config(path, validate=True):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(obj, validate=validate)


def problem_to_json(povm, rho=None, ensemble=None, fidelity=None):
    out = {"povm": [matrix_to_json(a) for a in povm]}
    if rho is not None:
        out["rho"] = matrix_to_json(rho)
    if ensemble is not None:
        out["ensemble"] = {"states": [matrix_to_json(s) for s in ensemble.states],
                           "probs": [float(p) for p in ensemble.probs]}
    if fidelity is not None:
        out["fidelity"] = np.asarray(fidelity, dtype=float).tolist()
    return out


def to_jsonable(x):
    """Recursively turn numpy scalars/arrays into plain JSON values."""
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return to_jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if np.isfinite(v) else str(v)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x
