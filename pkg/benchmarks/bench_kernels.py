"""Compare the numba kernels with the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--paths 1 64 1024] [--steps 20000] [--repeat 3]

Both backends are imported directly, so the ``SLIDINGDISK_DISABLE_NUMBA``
flag does not matter here.  Each row reports the best of ``--repeat`` wall
times after one warm-up call.  ``max diff`` is the largest absolute
difference between the two backends over the first 200 steps; over long
horizons the dynamics amplify last-bit rounding differences (``sin`` and
operation order differ), so long-run outputs agree only in distribution.
"""
import argparse
import time

import numpy as np

from slidingdisk.disk import DiskParams, Potential
from slidingdisk.kernels import _numba, _numpy


def best_time(fn, repeat):
    fn()  # compile / warm caches
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n_paths, n_steps, p):
    gen = np.random.default_rng(0)
    h = 0.01
    args = p.kernel_args
    s0 = gen.normal(size=(n_paths, 4))
    xi = gen.standard_normal((n_paths, n_steps))
    dw = np.sqrt(h) * gen.standard_normal((n_paths, n_steps, 2))
    stride = max(1, n_steps // 100)
    rec = n_steps // stride

    def baoab(mod):
        st, out = s0.copy(), np.empty((n_paths, rec, 4))
        mod.baoab_chunk(st, xi, h, *args, stride, out)
        return st

    def em(mod):
        st, out = s0.copy(), np.empty((n_paths, rec, 4))
        mod.em_chunk(st, dw, h, *args, stride, out)
        return st

    def reduced(mod):
        st, out = s0.copy(), np.empty((n_paths, rec, 4))
        sig, c, _, kind, amp, k = args
        mod.reduced_em_chunk(st, xi, h, sig, c, kind, amp, k, 10.0, stride, out)
        return st

    yield "baoab_chunk", baoab
    yield "em_chunk", em
    yield "reduced_em_chunk", reduced


def controlled_case(n_steps, p):
    slopes = np.random.default_rng(1).normal(size=40)
    spi = max(1, n_steps // 40)
    sig, c, _, kind, amp, k = p.kernel_args

    def run(mod):
        traj = np.empty((0, 4))
        return np.asarray(mod.controlled_rk4(np.zeros(4), 0.01, spi, slopes, sig, c, kind, amp, k, 10.0, traj))

    return run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, nargs="+", default=[1, 64, 1024])
    ap.add_argument("--steps", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    p = DiskParams(1.0, 0.1, 5.0, Potential.cosine())

    print(f"{'kernel':<18}{'paths':>7}{'steps':>8}{'numba s':>11}{'numpy s':>11}{'speedup':>9}{'max diff':>11}")
    short = min(200, args.steps)
    rows = [
        (name, n, fn, check)
        for n in args.paths
        for (name, fn), (_, check) in zip(cases(n, args.steps, p), cases(n, short, p))
    ]
    rows.append(("controlled_rk4", 1, controlled_case(args.steps, p), controlled_case(short, p)))
    for name, n, fn, check in rows:
        t_nb = best_time(lambda: fn(_numba), args.repeat)
        t_np = best_time(lambda: fn(_numpy), args.repeat)
        diff = float(np.max(np.abs(check(_numba) - check(_numpy))))
        print(f"{name:<18}{n:>7}{args.steps:>8}{t_nb:>11.4f}{t_np:>11.4f}{t_np / t_nb:>9.1f}{diff:>11.2e}")


if __name__ == "__main__":
    main()
