"""Reference single-letter problems used by the suite, configs and tests."""
import numpy as np

from .quantum import Ensemble


def projective_qubit():
    """Maximally mixed qubit measured in the computational basis."""
    rho = np.eye(2) / 2
    a = np.array([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]).astype(complex)
    return rho.astype(complex), a


def rank2_qubit():
    """Maximally mixed qubit, unsharp diagonal POVM with rank-2 elements."""
    rho = np.eye(2) / 2
    a0 = np.diag([0.7, 0.3])
    return rho.astype(complex), np.array([a0, np.eye(2) - a0]).astype(complex)


def generic_qubit():
    """Non-commuting state and unsharp POVM."""
    rho = np.array([[0.6, 0.2], [0.2, 0.4]], dtype=complex)
    a0 = np.array([[0.7, 0.2j], [-0.2j, 0.4]], dtype=complex)
    return rho, np.array([a0, np.eye(2) - a0])


def trivial_qubit():
    rho = np.array([[0.6, 0.2], [0.2, 0.4]], dtype=complex)
    return rho, np.eye(2, dtype=complex)[None]


def classical_triple():
    """Diagonal states measured in their common eigenbasis."""
    states = np.array([np.diag([0.9, 0.1]), np.diag([0.2, 0.8])]).astype(complex)
    e = Ensemble(states, np.array([0.5, 0.5]))
    a = np.array([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]).astype(complex)
    return e, a


REFERENCE_PROBLEMS = {
    "projective": projective_qubit,
    "rank2": rank2_qubit,
    "generic": generic_qubit,
}
