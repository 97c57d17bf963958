"""Compiled vs numpy kernels on the linearization of a GM center-case pulse.

    python3 benchmarks/bench_kernels.py [--eps 0.04] [--repeat 5]

Prints the best wall time per kernel for each backend, the speed-up, and
the maximum relative difference between the two results.
"""
import argparse
import time

import numpy as np

from pulsespec import _rk, gierer_meinhardt, kernels, shoot_periodic_orbit, singular_orbit
from pulsespec.evans import StabilityProblem


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        res = fn()
        best = min(best, time.perf_counter() - t0)
    return best, res


def rel_diff(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), 1e-300))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--eps", type=float, default=0.04)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--every", type=int, default=20)
    args = ap.parse_args()

    model = gierer_meinhardt(variant="minus_mu", mu=1.0)
    prof = shoot_periodic_orbit(model, args.eps, singular_orbit(model, 1.0))
    sp = StabilityProblem(model, prof)
    A = sp.A(0.5 + 0.25j)
    h = sp.h
    F = np.ones(A.shape[:3] + (1,), complex)
    starts = sp.starts(args.every)
    R = kernels.step_maps(A, h, _rk.A, _rk.B)
    Rr, r = kernels.step_affine(A, F, h, _rk.A, _rk.B)
    y = np.ones((len(h), A.shape[-1], 1), complex)
    Y0 = np.eye(A.shape[-1], 2, dtype=complex)
    cases = {
        "step_maps": lambda impl: kernels.step_maps(A, h, _rk.A, _rk.B, impl=impl),
        "step_affine": lambda impl: kernels.step_affine(A, F, h, _rk.A, _rk.B, impl=impl),
        "stage_values": lambda impl: kernels.stage_values(A, F, h, _rk.A, _rk.B, y, impl=impl),
        "chain": lambda impl: kernels.chain(R, starts, impl=impl),
        "chain_affine": lambda impl: kernels.chain_affine(Rr, r, starts, impl=impl),
        "frame_sweep": lambda impl: kernels.frame_sweep(R, Y0, args.every, impl=impl),
    }
    try:
        compiled = kernels.backend("cython")
    except ImportError:
        compiled = None
        print("compiled kernels not built; timing the numpy fallback only")
    numpy_impl = kernels.backend("numpy")
    print(f"eps = {args.eps}  grid steps = {len(h)}  state dim = {A.shape[-1]}  stages = {A.shape[1]}")
    print(f"{'kernel':<14}{'numpy [s]':>12}{'cython [s]':>12}{'speed-up':>10}{'rel diff':>11}")
    for name, fn in cases.items():
        tn, rn = best_of(lambda: fn(numpy_impl), args.repeat)
        if compiled is None:
            print(f"{name:<14}{tn:>12.4f}")
            continue
        tc, rc = best_of(lambda: fn(compiled), args.repeat)
        rn = rn if isinstance(rn, tuple) else (rn,)
        rc = rc if isinstance(rc, tuple) else (rc,)
        d = max(rel_diff(a, b) for a, b in zip(rn, rc))
        print(f"{name:<14}{tn:>12.4f}{tc:>12.4f}{tn / tc:>10.1f}{d:>11.1e}")


if __name__ == "__main__":
    main()
