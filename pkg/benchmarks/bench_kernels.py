"""Benchmark the conv kernels: compiled extension vs numpy fallback.

Times the 3x3 convolution forward and backward passes at the shapes the
trainer actually uses, for both backends, and prints a small table with
the speedup.  Run from the repo root:

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import importlib
import os
import time

import numpy as np


def _load_backend(name):
    os.environ["SARD_BACKEND"] = name
    import sard.nn.kernels as kernels

    importlib.reload(kernels)
    if kernels.backend_name() != name:
        return None
    return kernels


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(kernels, shape, repeats):
    bsz, cin, h, w = shape
    cout = 64
    rng = np.random.default_rng(0)
    x = rng.standard_normal((bsz, cin, h, w), dtype=np.float32)
    wgt = rng.standard_normal((cout, cin, 3, 3), dtype=np.float32) * 0.05
    b = rng.standard_normal(cout, dtype=np.float32)
    y = kernels.conv2d_forward(x, wgt, b)
    gy = rng.standard_normal(y.shape, dtype=np.float32)

    fwd = _time(lambda: kernels.conv2d_forward(x, wgt, b), repeats)
    bwd = _time(lambda: kernels.conv2d_backward(x, wgt, gy), repeats)
    flops_fwd = 2.0 * bsz * cout * cin * 9 * h * w
    return fwd, bwd, flops_fwd


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    shapes = [
        (16, 1, 96, 96),    # first layer, training batch
        (16, 64, 96, 96),   # body layers, training batch
        (1, 64, 256, 256),  # body layers, inference tile-ish
    ]

    results = {}
    for name in ("numpy", "cython"):
        kernels = _load_backend(name)
        if kernels is None:
            print(f"backend {name!r} unavailable, skipping")
            continue
        results[name] = [bench(kernels, s, args.repeats) for s in shapes]

    hdr = f"{'shape':>18} {'pass':>8} {'numpy':>10} {'cython':>10} {'speedup':>8}"
    print(hdr)
    print("-" * len(hdr))
    for i, shape in enumerate(shapes):
        tag = "x".join(str(d) for d in shape)
        for j, pname in enumerate(("forward", "backward")):
            row = [tag if j == 0 else "", pname]
            tn = results["numpy"][i][j] if "numpy" in results else None
            tc = results["cython"][i][j] if "cython" in results else None
            for t in (tn, tc):
                row.append(f"{t * 1e3:8.1f}ms" if t is not None else "      --")
            if tn and tc:
                row.append(f"{tn / tc:7.2f}x")
            print(f"{row[0]:>18} {row[1]:>8} {row[2]:>10} {row[3]:>10} "
                  f"{row[4] if len(row) > 4 else '':>8}")
        if "cython" in results:
            gflops = results["cython"][i][2] / results["cython"][i][0] / 1e9
            print(f"{'':>18} {'':>8} {'':>10} {'':>10}   fwd {gflops:.1f} GFLOP/s")


if __name__ == "__main__":
    main()
