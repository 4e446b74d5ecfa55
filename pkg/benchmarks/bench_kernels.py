"""Time the Lasso-path kernels: numba-compiled loops against the numpy version.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Runs both kernels on the same standardized problems (the shapes used by the
simulation situations and the 64-variable real-data design) and checks that
they return the same coefficients before reporting timings.
"""

import argparse
import time

import numpy as np

from acsel import kernels
from acsel._jit import USE_NUMBA
from acsel.geometry import Dataset, standardize
from acsel.selectors import CD_TOL, MAX_SWEEPS, ZERO_BAND, default_lambdas

SHAPES = [("situation1", 10, 10), ("situation2", 20, 50), ("situation3", 25, 500), ("real-data", 442, 64)]


def make_problem(n, p, seed=0):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, 1))
    x = np.sqrt(0.5) * z + np.sqrt(0.5) * rng.normal(size=(n, p))
    beta = np.zeros(p)
    beta[:5] = 1.0
    sd = standardize(Dataset(x, x @ beta + rng.normal(size=n)))
    return np.asfortranarray(sd.xs), np.ascontiguousarray(sd.ys), default_lambdas(sd)


def run(fn, x, y, lams):
    coefs = np.zeros((x.shape[1], lams.size))
    band = ZERO_BAND * float(np.linalg.norm(y))
    n_done, status = fn(x, y, lams, CD_TOL, MAX_SWEEPS, x.shape[0] - 1, band, coefs)
    return coefs[:, :n_done], status


def best_time(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not USE_NUMBA:
        print("numba disabled (ACSEL_DISABLE_NUMBA set or numba missing); timing the numpy kernel only")

    # first call compiles; keep it out of the timings
    x, y, lams = make_problem(10, 10)
    t0 = time.perf_counter()
    run(kernels.cd_path_loops, x, y, lams)
    print(f"first call (compile or cache load): {time.perf_counter() - t0:.2f} s")

    print(f"{'shape':<12}{'N':>5}{'P':>5}{'numpy ms':>11}{'numba ms':>11}{'speedup':>9}{'max |diff|':>12}")
    for name, n, p in SHAPES:
        x, y, lams = make_problem(n, p)
        ref, _ = run(kernels.cd_path_numpy, x, y, lams)
        t_np = best_time(run, (kernels.cd_path_numpy, x, y, lams), args.repeat)
        if USE_NUMBA:
            got, _ = run(kernels.cd_path_loops, x, y, lams)
            diff = np.abs(got - ref).max() if got.shape == ref.shape else float("inf")
            t_nb = best_time(run, (kernels.cd_path_loops, x, y, lams), args.repeat)
            print(f"{name:<12}{n:>5}{p:>5}{1e3 * t_np:>11.2f}{1e3 * t_nb:>11.3f}{t_np / t_nb:>9.1f}{diff:>12.1e}")
        else:
            print(f"{name:<12}{n:>5}{p:>5}{1e3 * t_np:>11.2f}{'-':>11}{'-':>9}{'-':>12}")


if __name__ == "__main__":
    main()
