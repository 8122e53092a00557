"""Compare the numba kernels with the pure-numpy fallback.

Usage: python3 benchmarks/bench_backends.py [--batch 2000] [--steps 200] [--repeat 3]

Both implementations live side by side in ``sigsde.kernels``; the env flag
SIGSDE_BACKEND only picks which one the dispatchers call, so this script
times them directly.
"""
import argparse
import time

import numpy as np

from sigsde import _backend
from sigsde.config import bundled_config
from sigsde.driving_moments import driver_increments
from sigsde.kernels import (
    lifted_simulate_numba,
    lifted_simulate_numpy,
    sig_fold_numba,
    sig_fold_numpy,
)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--batch", type=int, default=2000)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    if not _backend.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    inc = driver_increments(2, args.steps, 0.001, seed=0, indices=range(args.batch))
    cfg = bundled_config(1)
    mat = cfg.theta.bind(cfg.true_params)
    dx = driver_increments(1, args.steps, 0.001, seed=1, indices=range(args.batch))

    cases = [
        (f"sig_fold (width 3, level 4, {args.batch} paths x {args.steps} steps)",
         lambda: sig_fold_numpy(inc, 4), lambda: sig_fold_numba(inc, 4)),
        (f"lifted_simulate (experiment 1 field, {args.batch} paths x {args.steps} steps)",
         lambda: lifted_simulate_numpy(mat, dx, 3), lambda: lifted_simulate_numba(mat, dx, 3)),
    ]
    print(f"{'kernel':<64} {'numpy s':>9} {'numba s':>9} {'speedup':>8} {'max diff':>9}")
    for name, f_np, f_nb in cases:
        f_nb()  # compile outside the timed region
        t_np, out_np = best_of(f_np, args.repeat)
        t_nb, out_nb = best_of(f_nb, args.repeat)
        a = out_np[0] if isinstance(out_np, tuple) else out_np
        b = out_nb[0] if isinstance(out_nb, tuple) else out_nb
        diff = float(np.abs(np.asarray(a) - np.asarray(b)).max())
        print(f"{name:<64} {t_np:9.3f} {t_nb:9.3f} {t_np / t_nb:7.1f}x {diff:9.1e}")


if __name__ == "__main__":
    main()
