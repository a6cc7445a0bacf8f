"""Compare the compiled and pure-Python kernels.

Times the three hot kernels in isolation and a full ``fit_la`` run with each
backend, checks the two backends agree, and writes a CSV.

    python3 benchmarks/bench_backends.py --repeats 5 --out bench.csv
"""

import argparse
import csv
import sys
import time

import numpy as np

from carlaseg import _backend
from carlaseg.gmm import Mixture
from carlaseg.histogram import synth_histogram
from carlaseg.segmenter import LaConfig, fit_la

TRUTH = Mixture.from_arrays([0.2, 0.2, 0.3, 0.3], [40, 100, 150, 220], [8, 10, 12, 6])


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(kern, n_calls=2000):
    rng = np.random.default_rng(0)
    width = np.tile([0.5, 128.0, 255.0], 4)
    lo = np.zeros(12)
    dx = width / 256
    dens = np.repeat((1 / width)[:, None], 257, axis=1)
    z = rng.random((n_calls, 12))
    h = synth_histogram(TRUTH).bins.copy()
    x = np.arange(256, dtype=np.int64)
    p, mu, sd = TRUTH.p, TRUTH.mu, TRUTH.sigma

    def select():
        for row in z:
            kern.select_team(dens, lo, dx, row)

    def reinforce():
        f = dens.copy()
        a = lo + 0.5 * width
        for _ in range(n_calls):
            kern.reinforce_team(f, lo, dx, a, 0.3 / width, 0.02 * width)

    def cost():
        for _ in range(n_calls):
            kern.mixture_cost(p, mu, sd, h, x, 0.01)

    return {"select_team": select, "reinforce_team": reinforce, "mixture_cost": cost}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--iterations", type=int, default=2000)
    ap.add_argument("--out", default=None, help="CSV path (default stdout)")
    args = ap.parse_args(argv)

    backends = {"python": _backend.python_kernels}
    if _backend.compiled_kernels is not None:
        backends["cython"] = _backend.compiled_kernels
    else:
        print("compiled kernels not built; timing the python backend only", file=sys.stderr)

    rows = []
    for name, kern in backends.items():
        for case, fn in kernel_cases(kern).items():
            rows.append([name, case, 2000, best_of(fn, args.repeats)])

    hist = synth_histogram(TRUTH)
    cfg = LaConfig(iterations=args.iterations, seed=0)
    reports = {}
    for name, kern in backends.items():
        reports[name] = fit_la(hist, cfg, kernels=kern)
        rows.append([name, "fit_la", args.iterations, best_of(lambda: fit_la(hist, cfg, kernels=kern), args.repeats)])

    if len(reports) == 2:
        diff = float(np.max(np.abs(reports["python"].trace - reports["cython"].trace)))
        print(f"max trace difference between backends: {diff:.2e}", file=sys.stderr)

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(out)
    w.writerow(["backend", "case", "calls", "seconds"])
    for r in rows:
        w.writerow(r[:3] + [f"{r[3]:.6f}"])
    if args.out:
        out.close()

    if len(backends) == 2:
        t = {(r[0], r[1]): r[3] for r in rows}
        for case in ("select_team", "reinforce_team", "mixture_cost", "fit_la"):
            print(f"{case:>15}: cython {t[('python', case)] / t[('cython', case)]:.1f}x faster", file=sys.stderr)


if __name__ == "__main__":
    main()
