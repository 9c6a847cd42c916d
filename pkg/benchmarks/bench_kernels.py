"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import math
import timeit

import numpy as np

from nngf import _backend
from nngf.kernel import kernel_from_series


def cases():
    k = kernel_from_series([0.0, 0.9] + [0.0] * 8 + [0.1])
    u = np.linspace(-1, 1, 2000)
    sign = np.where(u < 0, -1.0, 1.0)
    t = 1.0 - np.abs(u)
    u64 = np.linspace(-1, 1, 64)
    s64, t64 = np.where(u64 < 0, -1.0, 1.0), 1.0 - np.abs(u64)
    th = np.linspace(0.01, math.pi - 0.01, 256)
    x = np.linspace(-10, 10, 4000)
    env = np.exp(-x * x / 4)
    return {
        "iterate_relu L=200 n=2000": lambda m: m.iterate_relu(sign, t, 200),
        "iterate_relu L=20000 n=64": lambda m: m.iterate_relu(s64, t64, 20000),
        "iterate_series L=200 n=2000": lambda m: m.iterate_series(k.coeffs, k.tail_sums, k.tail, k.parity,
                                                                   sign, t, 200),
        "gegenbauer_table l=500 n=2000": lambda m: m.gegenbauer_table(500, 2, u),
        "legendre_table l=128 n=256": lambda m: m.legendre_table(128, np.cos(th), np.sin(th)),
        "hermite_table q=200 n=4000": lambda m: m.hermite_table(200, x, env),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    impls = _backend.implementations()
    names = sorted(impls)
    print(f"{'case':32s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn in cases().items():
        times = {n: min(timeit.repeat(lambda: fn(impls[n]), number=1, repeat=args.repeat)) for n in names}
        row = f"{label:32s}" + "".join(f"{times[n] * 1e3:10.2f}ms" for n in names)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
