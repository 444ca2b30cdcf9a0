"""Time the numba and numpy kernels side by side.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported from the same module (the env flag only decides
which one the public names point at), so one process can compare them.  The
sampler outputs are also checked for equality.
"""
import argparse
import time

import numpy as np

from pnrcount import kernels as K
from pnrcount.estimation import _sufficient
from pnrcount.model import EmitterModel, sample_histogram


def best_of(fn, repeat):
    fn()  # warm-up (numba compiles or loads its cache here)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not K.HAS_NUMBA:
        print("numba is not installed; only the numpy backend is available")
        return

    key = K.stream_key(1)
    cases = [("sample inversion (40, 0.2), nu=1e6", 40, 0.2, 10**6),
             ("sample BTRS (1000, 0.3), nu=1e6", 1000, 0.3, 10**6)]
    print(f"{'kernel':44s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speed-up':>9s}")
    for label, n, p, nu in cases:
        plan = K.sampler_plan(n, p)
        t_nb = best_of(lambda: K.sample_counts_numba(key, 0, nu, n, *plan), args.repeat)
        t_np = best_of(lambda: K.sample_counts_numpy(key, 0, nu, n, *plan), args.repeat)
        same = np.array_equal(K.sample_counts_numba(key, 0, nu, n, *plan), K.sample_counts_numpy(key, 0, nu, n, *plan))
        print(f"{label:44s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f}x  identical={same}")

    hist = sample_histogram(EmitterModel(40, 0.2), 10**5, 3)
    tail, _ = _sufficient(hist)
    args_scan = (tail, float(hist.total_photons), float(hist.nu), hist.max_count, 10_000)
    t_nb = best_of(lambda: K.profile_scan_numba(*args_scan), args.repeat)
    t_np = best_of(lambda: K.profile_scan_numpy(*args_scan), args.repeat)
    diff = np.max(np.abs(K.profile_scan_numba(*args_scan) - K.profile_scan_numpy(*args_scan)))
    print(f"{'profile scan M <= 1e4 (40, 0.2), nu=1e5':44s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f}x  "
          f"max|diff|={diff:.1e}")


if __name__ == "__main__":
    main()
