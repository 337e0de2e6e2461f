"""Time the compiled kernels against the pure-Python fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeats 5] [--epochs 20]

Reports the best wall time per backend for a vectorised prox call and for
a short SGD training run, plus the speed-up of the compiled backend.
"""

import argparse
import time

import numpy as np

from lpgcn import _backend
from lpgcn.data import make_synthetic
from lpgcn.prox import prox_lp
from lpgcn.sgd import TrainConfig, train


def best_time(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--epochs", type=int, default=20)
    parser.add_argument("--size", type=int, default=100_000, help="prox vector length")
    args = parser.parse_args(argv)

    rng = np.random.default_rng(0)
    v = rng.standard_normal(args.size) * 3
    ds = make_synthetic(400, 500, 2, 0.05, 0.3, seed=0, features="binary")
    cases = {
        "prox_lp p=1.001": lambda b: prox_lp(v, 0.1, 1.001, backend=b),
        "prox_lp p=1.5": lambda b: prox_lp(v, 0.1, 1.5, backend=b),
        f"train {args.epochs} epochs": lambda b: train(ds, TrainConfig(p=1.32, eta=1.0, epochs=args.epochs,
                                                                        backend=b)),
    }
    backends = _backend.available()
    print(f"{'case':<22}" + "".join(f"{b:>12}" for b in backends) + ("     speed-up" if len(backends) > 1 else ""))
    for name, fn in cases.items():
        times = {b: best_time(lambda: fn(b), args.repeats) for b in backends}
        line = f"{name:<22}" + "".join(f"{times[b]:>11.4f}s" for b in backends)
        if len(backends) > 1:
            line += f"{times['python'] / times['cython']:>12.1f}x"
        print(line)


if __name__ == "__main__":
    main()
