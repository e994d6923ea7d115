"""Compare the compiled and pure-Python kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--states 2]
"""
import argparse
import math
import timeit

import numpy as np

from mblab import _kernels_py

try:
    from mblab import _kernels
except ImportError:
    _kernels = None


def random_generator(n, rng):
    P = rng.random((n, n)) + 0.05
    return P / P.sum(axis=1, keepdims=True)


def cases(mod, P, f):
    core = mod.FamilyCore(P, f, math.log(0.8), math.log(0.9))
    mu = 0.6 * f.max() + 0.4 * f.min()
    cum, last = mod.cumulative_rows(P)
    u = np.random.default_rng(0).random(10_000)
    return {
        "power_iteration": (lambda: mod.power_iteration(P), 20),
        "evaluate(theta=0.7)": (lambda: core.evaluate(0.7), 20),
        "theta_from_mean": (lambda: core.theta_from_mean(mu), 5),
        "simulate_path(1e4)": (lambda: mod.simulate_path(cum, last, 0, u), 2),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--states", type=int, default=2)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(1)
    if args.states == 2:
        P = np.array([[0.9, 0.1], [0.2, 0.8]])
    else:
        P = random_generator(args.states, rng)
    f = np.linspace(0.0, 1.0, args.states)

    backends = [("python", _kernels_py)]
    if _kernels is not None:
        backends.insert(0, ("cython", _kernels))
    else:
        print("compiled extension not built; timing the fallback only")

    results = {}
    for name, mod in backends:
        for case, (fn, number) in cases(mod, P, f).items():
            best = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
            results[(name, case)] = best

    print(f"{'kernel':<22}" + "".join(f"{n:>14}" for n, _ in backends) + ("   speedup" if len(backends) > 1 else ""))
    for case in cases(backends[0][1], P, f):
        row = f"{case:<22}" + "".join(f"{results[(n, case)] * 1e6:>12.1f}us" for n, _ in backends)
        if len(backends) > 1:
            row += f"{results[('python', case)] / results[('cython', case)]:>9.0f}x"
        print(row)


if __name__ == "__main__":
    main()
