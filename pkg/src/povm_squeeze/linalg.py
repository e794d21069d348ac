"""Dense complex-matrix substrate.

Operators are plain ``numpy`` arrays of shape ``(d, d)``. Composite systems
use the Kronecker convention: the first tensor factor is the most
significant digit of the composite index.
"""
from functools import reduce
from typing import NamedTuple, Sequence

import numpy as np

HERMITIAN_RTOL = 1e-12
CLUSTER_GAP = 1e-10
PSD_CLAMP = 1e-10
PSD_ERROR = 1e-8
# Gram-Schmidt acceptance threshold for projected standard basis vectors
_GS_ACCEPT = 1e-6


class Spectrum(NamedTuple):
    values: np.ndarray  # real, descending
    vectors: np.ndarray  # orthonormal columns


class NotPositiveError(ValueError):
    pass


def as_square(H):
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    return H.astype(np.complex128, copy=False)


def hermitian_defect(H):
    """Largest entrywise deviation from self-adjointness."""
    H = as_square(H)
    return float(np.max(np.abs(H - H.conj().T))) if H.size else 0.0


def as_hermitian(H, rtol=HERMITIAN_RTOL):
    """Validate ``H`` as Hermitian and return its exactly symmetrised copy."""
    H = as_square(H)
    scale = float(np.max(np.abs(H))) if H.size else 0.0
    if hermitian_defect(H) > rtol * max(scale, 1.0) * max(1, H.shape[0]):
        raise ValueError("matrix is not Hermitian within tolerance")
    return 0.5 * (H + H.conj().T)


def _canonical_cluster_basis(V):
    """Deterministic orthonormal basis of span(V).

    Projects the standard basis vectors e_0, e_1, ... onto the span in index
    order and Gram-Schmidt orthonormalises them, so the result does not
    depend on the basis LAPACK happened to return.
    """
    d, k = V.shape
    P = V @ V.conj().T
    basis = []
    for i in range(d):
        v = P[:, i].copy()
        for b in basis:
            v -= b * (b.conj() @ v)
        nrm = np.linalg.norm(v)
        if nrm > _GS_ACCEPT:
            basis.append(v / nrm)
            if len(basis) == k:
                break
    if len(basis) < k:  # pathological span, fall back to LAPACK's vectors
        return V
    return np.column_stack(basis)


def eig_hermitian(H) -> Spectrum:
    """Eigendecomposition with eigenvalues sorted descending.

    Eigenvalues closer than ``CLUSTER_GAP`` form a cluster whose basis is
    fixed by the canonical Gram-Schmidt rule; this also fixes phases.
    """
    H = as_hermitian(H)
    w, V = np.linalg.eigh(H)
    w = w[::-1].copy()
    V = V[:, ::-1].copy()
    start = 0
    d = len(w)
    while start < d:
        stop = start + 1
        while stop < d and w[stop - 1] - w[stop] < CLUSTER_GAP:
            stop += 1
        V[:, start:stop] = _canonical_cluster_basis(V[:, start:stop])
        start = stop
    return Spectrum(w, V)


def _clamped_eigs(H):
    H = as_hermitian(H)
    w, V = np.linalg.eigh(H)
    if w.size and w[0] < -PSD_ERROR:
        raise NotPositiveError(f"operator has eigenvalue {w[0]:.3g} < -{PSD_ERROR:g}")
    w = np.where(w < 0, 0.0, w)
    return w, V


def op_sqrt(H):
    """Positive square root of a PSD operator."""
    w, V = _clamped_eigs(H)
    return (V * np.sqrt(w)) @ V.conj().T


def op_inv_sqrt_on_support(H, rank_tol=None):
    """Inverse square root on the support, zero on the kernel."""
    w, V = _clamped_eigs(H)
    if rank_tol is None:
        rank_tol = 1e-12 * (float(np.max(w)) if w.size else 0.0)
    inv = np.zeros_like(w)
    keep = w > rank_tol
    inv[keep] = 1.0 / np.sqrt(w[keep])
    return (V * inv) @ V.conj().T


def op_function(H, f):
    """Apply a scalar function to the spectrum of a Hermitian operator."""
    H = as_hermitian(H)
    w, V = np.linalg.eigh(H)
    return (V * f(w)) @ V.conj().T


def support(H, rank_tol=None):
    """Orthonormal basis (columns) of the support of a PSD operator."""
    w, V = _clamped_eigs(H)
    if rank_tol is None:
        rank_tol = 1e-12 * (float(np.max(w)) if w.size else 0.0)
    return V[:, w > rank_tol][:, ::-1]


def tensor_product(*ops):
    """Kronecker product; the first argument is the most significant factor."""
    if len(ops) == 1 and not isinstance(ops[0], np.ndarray):
        ops = tuple(ops[0])
    return reduce(np.kron, ops)


def tensor_power(A, l):
    A = np.asarray(A)
    out = np.ones((1, 1), dtype=A.dtype)
    for _ in range(l):
        out = np.kron(out, A)
    return out


def partial_trace(C, factor_dims: Sequence[int], traced):
    """Trace out the factors listed in ``traced``; kept factors stay in order."""
    C = as_square(C)
    dims = [int(x) for x in factor_dims]
    n = len(dims)
    if int(np.prod(dims)) != C.shape[0]:
        raise ValueError(f"factor dims {dims} do not match operator dimension {C.shape[0]}")
    traced = sorted(set(int(t) for t in traced))
    if any(t < 0 or t >= n for t in traced):
        raise ValueError("traced factor index out of range")
    kept = [i for i in range(n) if i not in traced]
    T = C.reshape(dims + dims)
    # einsum subscripts: row indices 0..n-1, column indices n..2n-1
    row = list(range(n))
    col = [n + i for i in range(n)]
    for t in traced:
        col[t] = row[t]
    out_idx = [row[i] for i in kept] + [col[i] for i in kept]
    res = np.einsum(T, row + col, out_idx)
    dk = int(np.prod([dims[i] for i in kept])) if kept else 1
    return res.reshape(dk, dk)


def permute_factors(C, factor_dims, perm):
    """Reorder tensor factors: new factor ``i`` is old factor ``perm[i]``."""
    C = np.asarray(C)
    dims = list(factor_dims)
    n = len(dims)
    T = C.reshape(dims + dims)
    T = T.transpose(list(perm) + [n + p for p in perm])
    D = C.shape[0]
    return T.reshape(D, D)


def embed(op, position, factor_dims):
    """``I ⊗ ... ⊗ op ⊗ ... ⊗ I`` with ``op`` at ``position``."""
    ops = [np.eye(d) for d in factor_dims]
    ops[position] = op
    return tensor_product(ops)


class Norms(NamedTuple):
    operator_norm: float
    trace_norm: float
    trace: complex


def norms(H) -> Norms:
    H = as_square(H)
    if hermitian_defect(H) <= 1e-12 * max(1.0, float(np.max(np.abs(H))) if H.size else 1.0):
        w = np.linalg.eigvalsh(0.5 * (H + H.conj().T))
        return Norms(float(np.max(np.abs(w))), float(np.sum(np.abs(w))), complex(np.trace(H)))
    s = np.linalg.svd(H, compute_uv=False)
    return Norms(float(s[0]), float(s.sum()), complex(np.trace(H)))


def operator_norm(H):
    return norms(H).operator_norm


def trace_norm(H):
    return norms(H).trace_norm


def min_eig(H):
    return float(np.linalg.eigvalsh(as_hermitian(H))[0])


def loewner_leq(A, B, tol=1e-10):
    """True iff ``A <= B`` in Loewner order, up to ``tol`` on the smallest eigenvalue."""
    A = as_square(A)
    B = as_square(B)
    if A.shape != B.shape:
        raise ValueError("dimension mismatch")
    D = B - A
    return min_eig(0.5 * (D + D.conj().T)) >= -tol


def is_psd(H, tol=PSD_CLAMP):
    return min_eig(H) >= -tol


def random_unitary(d, rng):
    Z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph


def random_density(d, rng, rank=None):
    """Random state: Ginibre ensemble of the given rank (full rank by default)."""
    rank = d if rank is None else rank
    G = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def random_hermitian(d, rng):
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (G + G.conj().T)


def random_psd(d, rng):
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return G @ G.conj().T
