"""Time the mixture log-density kernel under both backends.

    python3 benchmarks/bench_kernels.py [--points 100000] [--kernels 8 64 512] [--repeat 5]

Also times a full ``suggest`` call with each backend, each in a fresh
interpreter so the env flag takes effect at import.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from hypertpe import _kernels

SUGGEST = """
import time, numpy as np, hypertpe as h
sp = h.SearchSpace(tuple(h.ParameterSpec(f"x{i}", "uniform", 0, 1) for i in range(4)))
rng = np.random.default_rng(0)
hist = [h.Observation(h.sample_prior(sp, rng), float(rng.random())) for _ in range(200)]
p = h.TpeParams(n_candidates=1024)
h.suggest(hist, sp, p, np.random.default_rng(0))
t = time.perf_counter()
for s in range(20):
    h.suggest(hist, sp, p, np.random.default_rng(s))
print(h.BACKEND, (time.perf_counter() - t) / 20)
"""


def bench_kernel(points, kernels, repeat):
    rng = np.random.default_rng(0)
    x = rng.random(points)
    print(f"{'kernels':>8} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'max |diff|':>11}")
    for k in kernels:
        c, s, w = rng.random(k), rng.uniform(0.01, 0.5, k), np.full(k, 1.0 / k)
        t_np = min(timeit.repeat(lambda: _kernels.mixture_logpdf_numpy(x, c, s, w), number=1, repeat=repeat))
        if _kernels.mixture_logpdf_numba is None:
            print(f"{k:>8} {t_np * 1e3:>10.2f} {'n/a':>10}")
            continue
        _kernels.mixture_logpdf_numba(x[:10], c, s, w)
        t_nb = min(timeit.repeat(lambda: _kernels.mixture_logpdf_numba(x, c, s, w), number=1, repeat=repeat))
        diff = np.max(np.abs(_kernels.mixture_logpdf_numba(x, c, s, w) - _kernels.mixture_logpdf_numpy(x, c, s, w)))
        print(f"{k:>8} {t_np * 1e3:>10.2f} {t_nb * 1e3:>10.2f} {t_np / t_nb:>8.1f} {diff:>11.1e}")


def bench_suggest():
    for flag in ("1", "0"):
        env = dict(os.environ, HYPERTPE_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", SUGGEST], env=env, capture_output=True, text=True, check=True)
        backend, seconds = res.stdout.split()
        print(f"suggest (4-D, 200 obs, 1024 candidates) {backend:>5}: {float(seconds) * 1e3:.2f} ms")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=100_000)
    ap.add_argument("--kernels", type=int, nargs="+", default=[8, 64, 512])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"backend in this process: {_kernels.BACKEND}")
    bench_kernel(args.points, args.kernels, args.repeat)
    bench_suggest()


if __name__ == "__main__":
    main()
