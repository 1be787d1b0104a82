"""Compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Prints one line per kernel and workload with the best-of-N wall time of each
backend, the speedup and the maximum difference between the two outputs.
"""

import argparse
import time

import numpy as np

from bulkadiabatic._kernels import _pykernels

try:
    from bulkadiabatic._kernels import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def workloads():
    rng = np.random.default_rng(0)
    # kernel values of the inverse Liouvillian: energy differences x Gauss-Legendre cosine sums
    for nx, nc in ((2048, 4000), (8192, 4000)):
        x = rng.uniform(-60, 60, nx)
        c = rng.normal(size=nc)
        yield f"cosine_sum nx={nx} nc={nc}", "cosine_sum", (x, c, 0.01)
    # conditional expectation tables for every Fock basis state
    for n_modes in (12, 16):
        states = np.arange(1 << n_modes, dtype=np.int64)
        pos = np.arange(2, n_modes - 2, 2, dtype=np.int64)
        yield f"split_modes modes={n_modes} positions={pos.size}", "split_modes", (states, n_modes, pos)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled kernels unavailable; nothing to compare")
        return
    print(f"{'workload':44s} {'numpy [s]':>10s} {'cython [s]':>11s} {'speedup':>8s} {'max diff':>9s}")
    for label, name, argv in workloads():
        tp, outp = best_of(lambda: getattr(_pykernels, name)(*argv), args.repeat)
        tc, outc = best_of(lambda: getattr(_ckernels, name)(*argv), args.repeat)
        if isinstance(outp, tuple):
            diff = max(float(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)).max())
                       for a, b in zip(outp, outc))
        else:
            diff = float(np.abs(outp - np.asarray(outc)).max())
        print(f"{label:44s} {tp:10.4f} {tc:11.4f} {tp / tc:8.2f} {diff:9.2e}")


if __name__ == "__main__":
    main()
