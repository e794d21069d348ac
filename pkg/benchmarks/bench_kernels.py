"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Prints the best-of-N wall time per kernel and backend, and checks that
both backends return identical arrays.
"""
import argparse
import timeit

import numpy as np

from povm_squeeze import kernels


def cases():
    rng = np.random.default_rng(0)
    p2 = np.array([0.7, 0.3])
    p3 = rng.dirichlet(np.ones(3))
    lp = rng.dirichlet(np.ones(2), size=2)
    w10 = kernels.all_words(2, 10)
    w12 = kernels.all_words(2, 12)
    return [
        ("all_words q=2 l=16", lambda b: kernels.all_words(2, 16, backend=b)),
        ("typical_mask q=2 l=16", lambda b: kernels.typical_mask(p2, 16, 2.0, backend=b)),
        ("typical_mask q=3 l=10", lambda b: kernels.typical_mask(p3, 10, 2.0, backend=b)),
        ("word_weights q=2 l=12", lambda b: kernels.word_weights(w12, p2, backend=b)),
        ("conditional masks m=d=2 l=10", lambda b: kernels.conditional_typical_masks(w10, lp, 2.0, backend=b)),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    if len(backends) == 1:
        print("compiled extension not available; timing the numpy backend only")
    print(f"{'kernel':<32}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name, fn in cases():
        times = [min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat)) for b in backends]
        if len(backends) == 2:
            assert np.array_equal(fn("python"), fn("cython")), name
        row = f"{name:<32}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
        if len(backends) == 2:
            row += f"{times[0] / times[1]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
