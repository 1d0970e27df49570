"""Throughput comparison of the numba and numpy flow kernels.

Runs the coupled harmonic-spin advance and the field-gradient advance
on identical ensembles with both backends and reports point-steps per
second.  The numba path is JIT-warmed before timing.

Usage: python benchmarks/bench_kernels.py [--points N] [--steps K]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from egorov_spin.kernels import HAS_NUMBA, _impl_numpy

if HAS_NUMBA:
    from egorov_spin.kernels import _impl_numba
else:
    _impl_numba = None


def _ensemble(n: int, seed: int = 11):
    rng = np.random.default_rng(seed)
    q = rng.uniform(-2.0, 2.0, n)
    p = rng.uniform(-2.0, 2.0, n)
    v = rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    return q, p, np.ascontiguousarray(v[:, 0]), np.ascontiguousarray(
        v[:, 1]), np.ascontiguousarray(v[:, 2])


def _time_advance(impl, name: str, n_points: int, n_steps: int) -> float:
    eps = 2.0**-6
    h_c = np.array([0.0, 0.0, 0.5])
    h_q = np.array([0.5, 0.0, 0.0])
    h_p = np.zeros(3)
    if name == "coupled":
        args = (n_steps, 1e-2, eps, 1.0, h_c, h_q, h_p, 0.0, 0.0)
        fn = impl.advance_coupled
    else:
        args = (n_steps, 1e-2, eps, 1, 1.0, 1.2, 2.0)
        fn = impl.advance_sg
    state = _ensemble(n_points)
    fn(*state, *args)  # warm-up (JIT compile on the numba path)
    state = _ensemble(n_points)
    tic = time.perf_counter()
    fn(*state, *args)
    return time.perf_counter() - tic


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--steps", type=int, default=50)
    args = ap.parse_args()

    impls = [("numpy", _impl_numpy)]
    if _impl_numba is not None:
        impls.append(("numba", _impl_numba))
    else:
        print("numba not importable; timing the numpy path only")

    rate = {}
    for kernel in ("coupled", "field-gradient"):
        print(f"\n{kernel} advance, {args.points} points x {args.steps} steps")
        for label, impl in impls:
            dt = _time_advance(impl, "coupled" if kernel == "coupled" else "sg",
                               args.points, args.steps)
            rate[label] = args.points * args.steps / dt
            print(f"  {label:<6} {dt:8.3f} s   {rate[label]:.3e} point-steps/s")
        if len(rate) == 2:
            print(f"  speedup numba/numpy = {rate['numba'] / rate['numpy']:.1f}x")


if __name__ == "__main__":
    main()
