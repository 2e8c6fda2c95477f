"""Benchmark the histogram hot kernels: compiled extension vs numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--sizes 65536,262144,1048576]

Times the raw-mass and gradient kernels for both kernel shapes on each
backend, plus an end-to-end tile_translate run, and prints a small table.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from tilegraft import _np_kernels
from tilegraft.image import ImageF
from tilegraft.tiler import IdentityColorize, tile_translate

try:
    from tilegraft import _fastk
except ImportError:
    _fastk = None

B, TAU = 64, 0.02


def _best_of(fn, repeats: int = 5) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_backend(impl, name: str, samples: np.ndarray) -> None:
    mass = impl.mass_logistic(samples, B, TAU)
    s = float(mass.sum())
    cdf = np.cumsum(mass / s)
    sgn = np.sign(cdf - np.linspace(0.0, 1.0, B))
    tail = np.ascontiguousarray(np.cumsum(sgn[::-1])[::-1])
    csum = float(np.dot(sgn, cdf))
    rows = [
        ("mass_logistic", lambda: impl.mass_logistic(samples, B, TAU)),
        ("mass_triangular", lambda: impl.mass_triangular(samples, B, TAU)),
        ("grad_logistic", lambda: impl.grad_logistic(samples, B, TAU, tail, csum, s)),
        ("grad_triangular", lambda: impl.grad_triangular(samples, B, TAU, tail, csum, s)),
    ]
    for label, fn in rows:
        dt = _best_of(fn)
        rate = samples.size / dt / 1e6
        print(f"  {name:8s} {label:16s} {dt * 1e3:9.2f} ms   {rate:8.1f} Msamples/s")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="65536,262144,1048576",
                    help="comma-separated sample counts")
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    rng = np.random.default_rng(0)
    for n in sizes:
        samples = rng.random(n)
        print(f"\nN = {n} samples, B = {B}, tau = {TAU}")
        bench_backend(_np_kernels, "numpy", samples)
        if _fastk is not None:
            bench_backend(_fastk, "cython", samples)
        else:
            print("  cython backend not built (pip install -e . && "
                  "python3 setup.py build_ext --inplace)")

    rng = np.random.default_rng(1)
    img = ImageF(rng.random((1024, 1024)), "Gray")
    dt = _best_of(lambda: tile_translate(img, IdentityColorize()), repeats=3)
    print(f"\ntile_translate identity 1024x1024 (P=256, S=240): {dt * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
