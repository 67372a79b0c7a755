"""Wall-clock comparison of the compiled and numpy small-d kernels.

    python3 benchmarks/bench_kernels.py [--n 20000] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from irrepsync import _kernels_py
from irrepsync._kernels import _kernels_ext


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("--n", type=int, default=20000, help="number of angles")
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--lmax", type=int, nargs="+", default=[2, 4, 8, 16])
    args = p.parse_args(argv)

    betas = np.random.default_rng(0).uniform(0.0, np.pi, args.n)
    backends = {"python": _kernels_py.small_d_packed}
    if _kernels_ext is not None:
        backends["cython"] = _kernels_ext.small_d_packed
    else:
        print("compiled extension not available; timing the fallback only")

    print(f"{'lmax':>5} " + " ".join(f"{name:>12}" for name in backends) + f" {'speedup':>9} {'max diff':>10}")
    for lmax in args.lmax:
        times, outs = {}, {}
        for name, fn in backends.items():
            outs[name] = fn(lmax, betas)
            times[name] = min(timeit.repeat(lambda: fn(lmax, betas), number=1, repeat=args.repeat))
        row = " ".join(f"{times[name] * 1e3:10.2f}ms" for name in backends)
        if "cython" in backends:
            speed = times["python"] / times["cython"]
            diff = np.abs(outs["python"] - outs["cython"]).max()
            row += f" {speed:8.1f}x {diff:10.1e}"
        print(f"{lmax:>5} {row}")


if __name__ == "__main__":
    main()
