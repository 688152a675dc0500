"""Benchmark the numba-compiled kernels against the pure-numpy fallbacks.

Run:  python benchmarks/bench_kernels.py  [--repeats N]

The active production backend is chosen at import time (see
SECULAR3BP_NUMBA); this script times both implementations side by side
regardless, and reports the speedup of the compiled path.
"""

import argparse
import time

from secular3bp import kernels


def _time(fn, args, repeats, budget_s=2.0):
    fn(*args)  # warmup / trigger compilation
    best = float("inf")
    t_total = 0.0
    done = 0
    while done < repeats and t_total < budget_s:
        t0 = time.perf_counter()
        fn(*args)
        dt = time.perf_counter() - t0
        best = min(best, dt)
        t_total += dt
        done += 1
    return best


CASES = [
    ("quarter_sums n=64", "quarter_sums", (0.4, 0.17, 0.3, 64, 64)),
    ("quarter_sums n=256", "quarter_sums", (0.4, 0.17, 0.3, 256, 256)),
    ("quarter_sums n=1024", "quarter_sums", (0.4, 0.17, 0.3, 1024, 1024)),
    ("bbar_mean n=256", "bbar_mean", (0.4, 0.17, 0.3, 256, 256)),
    ("rbar_rotated n=256", "rbar_rotated_mean", (0.4, 0.17, 0.3, 1.0, 0.0, 256, 256)),
    ("vbar_mean n=256", "vbar_mean",
     (0.4, 0.17, 0.3, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 256, 256)),
    ("min_sep_scan n=720", "min_sep_scan", (0.4, 0.17, 0.3, 720)),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=25)
    args = parser.parse_args()

    print(f"active backend: {kernels.BACKEND}")
    header = f"{'kernel':<22s} {'numpy':>12s} {'numba':>12s} {'speedup':>9s}"
    print(header)
    print("-" * len(header))
    for label, name, call_args in CASES:
        t_np = _time(getattr(kernels, name + "_numpy"), call_args, args.repeats)
        if kernels.NUMBA_ENABLED:
            t_nb = _time(getattr(kernels, name + "_numba"), call_args, args.repeats)
            print(f"{label:<22s} {t_np * 1e3:>9.3f} ms {t_nb * 1e3:>9.3f} ms "
                  f"{t_np / t_nb:>8.1f}x")
        else:
            print(f"{label:<22s} {t_np * 1e3:>9.3f} ms {'n/a':>12s} {'':>9s}")


if __name__ == "__main__":
    main()
