#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the pure-numpy fallback.

Times the three loop-heavy kernels on representative inputs:
full-pivot LU on dense blocks, ILUT factorization of a 3D Poisson matrix,
and the CSR triangular solves applied by the ILUT preconditioner.

Usage: python3 benchmarks/bench_kernels.py [--grid N] [--repeat K]
"""

import argparse
import time

import numpy as np
import scipy.sparse as sp

from mfhodlr._kernels import _pure

try:
    from mfhodlr._kernels import _core
except ImportError:
    _core = None

from mfhodlr.problems import gen_poisson7


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_full_pivot_lu(impl, repeat):
    rng = np.random.default_rng(0)
    blocks = [
        rng.standard_normal((m, 8)) @ rng.standard_normal((8, m))
        + 1e-9 * rng.standard_normal((m, m))
        for m in (32, 64, 128)
    ]

    def work():
        for B in blocks:
            impl.full_pivot_lu(B, 1e-10, min(B.shape))

    return timeit(work, repeat)


def bench_ilut(impl, grid, repeat):
    A, _ = gen_poisson7(grid, grid, grid)
    csr = A.to_csr()
    csr.sort_indices()
    cap = int(A.nnz // A.n_rows) + 1
    args = (
        A.n_rows, csr.indptr.astype(np.int64), csr.indices.astype(np.int64),
        csr.data, cap, 1e-4,
    )
    return timeit(lambda: impl.ilut_factor(*args), repeat), args


def bench_trisolve(impl, factors, n, repeat):
    lp, li, lv, up, ui, uv = factors
    b = np.linspace(-1.0, 1.0, n)

    def work():
        y = impl.solve_lower_unit_csr(lp, li, lv, b)
        impl.solve_upper_csr(up, ui, uv, y)

    return timeit(work, repeat)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--grid", type=int, default=20, help="Poisson grid edge")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    backends = [("pure", _pure)]
    if _core is not None:
        backends.append(("compiled", _core))
    else:
        print("note: compiled core not available, timing the fallback only")

    results = {}
    for name, impl in backends:
        t_lu = bench_full_pivot_lu(impl, args.repeat)
        t_ilut, ilut_args = bench_ilut(impl, args.grid, args.repeat)
        factors = impl.ilut_factor(*ilut_args)
        t_tri = bench_trisolve(impl, factors, ilut_args[0], args.repeat)
        results[name] = (t_lu, t_ilut, t_tri)

    n = args.grid ** 3
    print(f"\nkernel timings (best of {args.repeat}, Poisson {args.grid}^3, n={n}):")
    header = f"{'kernel':<22}" + "".join(f"{name:>12}" for name, _ in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for idx, label in enumerate(("full_pivot_lu", "ilut_factor", "csr_trisolve x2")):
        row = f"{label:<22}"
        for name, _ in backends:
            row += f"{results[name][idx] * 1e3:>10.2f}ms"
        if len(backends) == 2:
            row += f"{results['pure'][idx] / results['compiled'][idx]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
