"""Compare the compiled kernels against the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from tvsmas import graph as gr
from tvsmas import kernels


def cases():
    a = gr.detail_balance(gr.example2_graph(), "least-squares").a_tilde
    rng = np.random.default_rng(0)
    x4 = rng.normal(size=(25, 15, 4))
    x2 = rng.normal(size=(25, 15, 2))
    pts = rng.normal(size=(2000, 2))
    vals = rng.normal(size=(2000, 2))
    return [
        ("coupling_sum estimator (B=25, N=15, 4)", 20,
         lambda: kernels.coupling_sum(a, x4, 0.5, 0.5, 3.0, 0.8, 1.2, 1)),
        ("coupling_sum protocol (B=25, N=15, 2)", 20,
         lambda: kernels.coupling_sum(a, x2, 5.0, 5.0, 3.0, 0.8, 1.2, 0)),
        ("max_pair_excess (2000 points)", 2, lambda: kernels.max_pair_excess(vals, pts, 1.5)),
    ]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    if not kernels.COMPILED_AVAILABLE:
        print("compiled kernels are not built; only the python backend is timed")
    backends = ["python"] + (["compiled"] if kernels.COMPILED_AVAILABLE else [])
    print(f"{'case':<42}" + "".join(f"{b:>14}" for b in backends) + f"{'speedup':>10}")
    prev = kernels.backend()
    try:
        for name, n, fn in cases():
            times = []
            for b in backends:
                kernels.use_backend(b)
                times.append(min(timeit.repeat(fn, number=n, repeat=args.repeat)) / n)
            speed = f"{times[0] / times[1]:>9.1f}x" if len(times) == 2 else ""
            print(f"{name:<42}" + "".join(f"{t * 1e3:>12.3f}ms" for t in times) + speed)
    finally:
        kernels.use_backend(prev)


if __name__ == "__main__":
    main()
