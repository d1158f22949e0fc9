"""Compare the compiled and pure-Python KL/gradient kernels.

Times repeated kl_and_gradient calls and one full optimization per backend
and reports the speedup.  Run with:

    python3 benchmarks/bench_tsne.py [--sizes 100,300,600] [--repeats 20]
"""

import argparse
import time

import numpy as np

from drtune import TsneConfig, available_backends, joint_probabilities, run_tsne
from drtune.tsne import get_backend, kl_and_gradient


def time_kernel(backend, P, Y, repeats):
    kl_and_gradient(P, Y, backend=backend)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        kl_and_gradient(P, Y, backend=backend)
    return (time.perf_counter() - t0) / repeats


def time_descent(backend, X, config):
    t0 = time.perf_counter()
    run_tsne(X, config, backend=backend)
    return time.perf_counter() - t0


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="100,300,600",
                        help="comma-separated sample counts")
    parser.add_argument("--repeats", type=int, default=20,
                        help="kernel calls per timing")
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    backends = available_backends()
    print(f"available backends: {', '.join(backends)}")
    if "compiled" not in backends:
        print("compiled backend not built; timing the python fallback only")

    rng = np.random.default_rng(0)
    print(f"\nkl_and_gradient, mean of {args.repeats} calls")
    print(f"{'n':>6} " + " ".join(f"{name:>12}" for name in backends)
          + ("   speedup" if len(backends) > 1 else ""))
    for n in sizes:
        X = rng.normal(size=(n, 10))
        P = joint_probabilities(X, min(30.0, (n - 1) / 3.0))
        Y = rng.normal(scale=1e-2, size=(n, 2))
        times = [time_kernel(get_backend(name), P, Y, args.repeats)
                 for name in backends]
        row = f"{n:>6} " + " ".join(f"{t * 1e3:>10.2f}ms" for t in times)
        if len(times) > 1:
            row += f"   {times[-1] / times[0]:>6.1f}x"
        print(row)

    n = sizes[len(sizes) // 2]
    X = rng.normal(size=(n, 10))
    config = TsneConfig(perplexity=min(30.0, (n - 1) / 3.0), n_iter=250,
                        exaggeration_iters=100)
    print(f"\nfull optimization, n={n}, {config.n_iter} iterations")
    for name in backends:
        print(f"{name:>12}: {time_descent(name, X, config):.2f}s")


if __name__ == "__main__":
    main()
