"""Time the jitted kernels against their pure-numpy twins.

Run: python benchmarks/bench_kernels.py [--size 49152] [--repeat 200]
(49152 = 128*128*3). The first jitted call pays compilation; it is excluded
by a warmup pass.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from trirl import _kernels


def time_fn(fn, args, repeat: int) -> float:
    fn(*args)  # warmup (and numba compile)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=128 * 128 * 3)
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    x = rng.random(args.size)
    b = rng.random(args.size)
    d1 = rng.standard_normal(args.size)
    d1 /= np.linalg.norm(d1)
    d2 = rng.standard_normal(args.size)

    cases = [
        ("l2_diff", (x, b)),
        ("clip01", (x * 3.0 - 1.0,)),
        ("place_candidate", (x, d1, d2 / np.linalg.norm(d2), 0.3, 0.7, 1.0)),
        ("project_normalize", (d2.copy(), d1)),
    ]

    print(f"size={args.size} repeat={args.repeat} numba_available={_kernels.HAS_NUMBA}")
    print(f"{'kernel':<20} {'numpy (us)':>12} {'numba (us)':>12} {'speedup':>9}")
    for name, fn_args in cases:
        np_fn = getattr(_kernels, f"_np_{name}")
        t_np = time_fn(np_fn, [np.array(a, copy=True) if isinstance(a, np.ndarray) else a for a in fn_args], args.repeat)
        if _kernels.HAS_NUMBA:
            nb_fn = getattr(_kernels, f"_nb_{name}")
            t_nb = time_fn(nb_fn, [np.array(a, copy=True) if isinstance(a, np.ndarray) else a for a in fn_args], args.repeat)
            print(f"{name:<20} {t_np * 1e6:>12.2f} {t_nb * 1e6:>12.2f} {t_np / t_nb:>8.2f}x")
        else:
            print(f"{name:<20} {t_np * 1e6:>12.2f} {'n/a':>12} {'n/a':>9}")


if __name__ == "__main__":
    main()
