"""Pure-numpy versions of the word-enumeration kernels."""
import numpy as np


def all_words(q, l):
    if l == 0:
        return np.zeros((1, 0), dtype=np.int64)
    idx = np.arange(q**l, dtype=np.int64)
    out = np.empty((q**l, l), dtype=np.int64)
    for k in range(l - 1, -1, -1):
        out[:, k] = idx % q
        idx //= q
    return out


def typical_mask(q, l, center, radius):
    words = all_words(q, l)
    ok = np.ones(len(words), dtype=bool)
    for t in range(q):
        counts = (words == t).sum(axis=1).astype(np.float64)
        ok &= ~(np.abs(counts - center[t]) > radius[t])
    return ok


def conditional_typical_masks(words, d, center, radius):
    words = np.ascontiguousarray(words, dtype=np.int64)
    nw, l = words.shape
    m = center.shape[0]
    basis = all_words(d, l)
    out = np.ones((nw, len(basis)), dtype=bool)
    for w in range(nw):
        for j in range(m):
            block = words[w] == j
            n = int(block.sum())
            if n == 0:
                continue
            for t in range(d):
                counts = ((basis == t) & block).sum(axis=1).astype(np.float64)
                out[w] &= ~(np.abs(counts - center[j, n, t]) > radius[j, n, t])
    return out


def word_weights(words, probs):
    words = np.asarray(words, dtype=np.int64)
    acc = np.ones(len(words), dtype=np.float64)
    for k in range(words.shape[1]):
        acc = acc * probs[words[:, k]]
    return acc
