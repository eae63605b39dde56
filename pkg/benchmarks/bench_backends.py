"""Numba vs numpy for the triangular field sums and for whole verifications.

    python3 benchmarks/bench_backends.py [--sizes 256 1024 4096] [--repeat 3]

Each timing is the best of ``--repeat`` runs after one warm-up call, so numba
compile time is reported separately.
"""

import argparse
import time

import numpy as np

from itowentzell import _backend, _kernels
from itowentzell.catalog import _mix_grad_D, _mix_Q, catalog
from itowentzell.wentzell import verify_path


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_contract(N, backend, repeat):
    rng = np.random.default_rng(0)
    t = np.arange(N) / N
    counts = np.arange(N)
    fracs = np.zeros(N)
    x = rng.normal(size=(N, 2))
    args = np.array([0.3, 0.4, 0.2, 0.3, 0.5, 2.0])
    dW = rng.normal(size=(N, 2)) / np.sqrt(N)

    def run():
        _kernels.contract(_mix_Q, t, np.full(N, 1 / N), counts, fracs, x, args, backend=backend)
        _kernels.contract(_mix_grad_D, t, dW, counts, fracs, x, args, contract_axis=True, backend=backend)

    t0 = time.perf_counter()
    run()
    first = time.perf_counter() - t0
    return first, best_of(run, repeat)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 1024, 4096])
    ap.add_argument("--repeat", type=int, default=3)
    ns = ap.parse_args()
    if not _backend.HAVE_NUMBA:
        raise SystemExit("numba backend disabled (ITOWENTZELL_BACKEND=numpy or NUMBA_DISABLE_JIT set)")

    print("kernel: Q and grad D sums over N(N-1)/2 (row, query) pairs, full-mix coefficients")
    print(f"{'N':>6} {'numpy s':>10} {'numba s':>10} {'speedup':>8} {'first numba call s':>20}")
    for N in ns.sizes:
        _, t_np = bench_contract(N, "numpy", ns.repeat)
        first, t_nb = bench_contract(N, "numba", ns.repeat)
        print(f"{N:>6} {t_np:>10.4f} {t_nb:>10.4f} {t_np / t_nb:>8.1f} {first:>20.3f}")

    print()
    print("verify_path on full-mix (one path, all terms)")
    print(f"{'N':>6} {'numpy s':>10} {'numba s':>10} {'speedup':>8}")
    spec = catalog("full-mix")
    for N in ns.sizes:
        out = {}
        for backend in ("numpy", "numba"):
            verify_path(spec, N, 0, backend=backend)
            out[backend] = best_of(lambda: verify_path(spec, N, 1, backend=backend), ns.repeat)
        print(f"{N:>6} {out['numpy']:>10.4f} {out['numba']:>10.4f} {out['numpy'] / out['numba']:>8.1f}")


if __name__ == "__main__":
    main()
