"""Benchmark the compiled Jacobi eigensolver against the pure-python
fallback.

The two paths run the same rotation sequence, so this measures the cost
of the extension being unavailable (STARWPT_NO_EXT=1), not a numerical
difference.  Run:

    python bench/bench_jacobi.py [--sizes 8 16 32 64] [--repeats 5]
"""

import argparse
import time
import timeit

import numpy as np

from starwpt.kernel import eig


def random_hermitian(n, rng):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (A + A.conj().T)


def best_of(fn, repeats):
    return min(timeit.repeat(fn, number=1, repeat=repeats))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+",
                    default=[8, 16, 32, 64])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    from starwpt.kernel import _jacobi_ext
    if _jacobi_ext is None:
        print("compiled extension unavailable (STARWPT_NO_EXT set or "
              "build missing); benchmarking the python path only")

    rng = np.random.default_rng(args.seed)
    print(f"{'n':>4} {'compiled (ms)':>14} {'python (ms)':>12} "
          f"{'speedup':>8} {'max |dw|':>10}")
    for n in args.sizes:
        H = random_hermitian(n, rng)

        def compiled():
            return eig.jacobi_eigh(H)

        def python():
            A = eig._check_hermitian(H).astype(complex, copy=True)
            w, V = eig._jacobi_python(A, 1e-13, 60)
            order = np.argsort(w)
            return w[order], V[:, order]

        t_py = best_of(python, args.repeats)
        w_py, _ = python()
        if _jacobi_ext is not None:
            t_ext = best_of(compiled, args.repeats)
            w_ext, _ = compiled()
            dw = np.abs(w_ext - w_py).max()
            print(f"{n:>4} {t_ext * 1e3:>14.3f} {t_py * 1e3:>12.3f} "
                  f"{t_py / t_ext:>7.1f}x {dw:>10.2e}")
        else:
            print(f"{n:>4} {'-':>14} {t_py * 1e3:>12.3f} {'-':>8} {'-':>10}")


if __name__ == "__main__":
    main()
