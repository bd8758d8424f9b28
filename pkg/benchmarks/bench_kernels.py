"""Compiled vs numpy kernels, per call.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints microseconds per call for each kernel on each available backend and
the speed-up of the compiled one. Shapes match the engine defaults (d=5, h=8,
window of 50 ticks).
"""
import argparse
import timeit

import numpy as np

from causalstream import kernels


def cases(rng):
    d, h, n = 5, 8, 43
    lam = 0.95 * np.exp(1j * rng.uniform(0, np.pi, 2 * d))
    phi0 = rng.standard_normal(2 * d) + 1j * rng.standard_normal(2 * d)
    owner = np.repeat(np.arange(d), 2).astype(np.int64)
    winv = rng.standard_normal((d, d))
    score = np.log(np.abs(rng.standard_normal((d, d))))
    b = rng.standard_normal((d, d))
    np.fill_diagonal(b, 0)
    base = rng.standard_normal((h, h))
    a0, p0 = rng.standard_normal((h, h)), np.linalg.inv(base @ base.T + np.eye(h))
    prev, new = rng.standard_normal(h), rng.standard_normal(h)
    w0, e0, x = np.linalg.qr(rng.standard_normal((d, d)))[0], rng.uniform(1, 5, d), rng.standard_normal(d)

    def rls(k):
        a, p = a0.copy(), p0.copy()
        k.rls_update(a, p, prev, new, 0.98)

    def demix(k):
        k.demix_update(w0.copy(), e0.copy(), x, 0.98)

    return {
        "mode_design": lambda k: k.mode_design(winv, phi0, lam, owner, n),
        "best_diag_permutation": lambda k: k.best_diag_permutation(score),
        "best_causal_order": lambda k: k.best_causal_order(b),
        "rls_update": rls,
        "demix_update": demix,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=2000)
    args = ap.parse_args()
    impls = kernels.backends()
    names = sorted(impls)
    print(f"{'kernel':<24}" + "".join(f"{n + ' us':>14}" for n in names) + ("    speed-up" if len(names) > 1 else ""))
    for name, fn in cases(np.random.default_rng(0)).items():
        us = {}
        for backend in names:
            k = impls[backend]
            us[backend] = min(timeit.repeat(lambda: fn(k), number=args.repeat, repeat=3)) / args.repeat * 1e6
        row = f"{name:<24}" + "".join(f"{us[n]:>14.2f}" for n in names)
        if "cython" in us:
            row += f"{us['python'] / us['cython']:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
