"""Kernel selection: the compiled extension when it imports, numpy otherwise.

Set ``POVM_SQUEEZE_PURE=1`` to force the numpy path.
"""
import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("POVM_SQUEEZE_PURE"):
        raise ImportError("pure-Python kernels requested")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

# absolute slack on the frequency-typicality comparison; counts are integers
# and centres are l*p, so exact ties occur for rational spectra
TYPICAL_SLACK = 1e-9


def _bounds(probs, n, delta):
    p = np.asarray(probs, dtype=np.float64)
    center = n * p
    radius = delta * np.sqrt(n) * np.sqrt(p * (1.0 - p)) + TYPICAL_SLACK
    return center, radius


def all_words(q, l, backend=None):
    """All ``q**l`` words in lexicographic order (position 0 most significant)."""
    impl = _pick(backend)
    return np.asarray(impl.all_words(int(q), int(l)))


def typical_mask(probs, l, delta, backend=None):
    """Boolean mask over ``all_words(len(probs), l)`` of frequency-typical words."""
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    center, radius = _bounds(probs, l, delta)
    impl = _pick(backend)
    return np.asarray(impl.typical_mask(len(probs), int(l), center, radius))


def conditional_typical_masks(words, letter_probs, delta, backend=None):
    """Per outcome word, mask over product-basis words of the conditional typical projector.

    ``letter_probs[j]`` is the eigenvalue list of the state attached to
    outcome ``j``; block sizes range over ``0..l``.
    """
    words = np.ascontiguousarray(words, dtype=np.int64)
    letter_probs = np.ascontiguousarray(letter_probs, dtype=np.float64)
    m, d = letter_probs.shape
    l = words.shape[1]
    center = np.zeros((m, l + 1, d))
    radius = np.zeros((m, l + 1, d))
    for n in range(l + 1):
        center[:, n, :], radius[:, n, :] = _bounds(letter_probs, n, delta)
    impl = _pick(backend)
    return np.asarray(impl.conditional_typical_masks(words, int(d), center, radius))


def word_weights(words, probs, backend=None):
    """Product probability of each word."""
    words = np.ascontiguousarray(words, dtype=np.int64)
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    impl = _pick(backend)
    return np.asarray(impl.word_weights(words, probs))


def _pick(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _pykernels
    if backend == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {backend!r}")
