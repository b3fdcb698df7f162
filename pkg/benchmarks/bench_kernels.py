"""Compare the compiled kernel backend against the pure-Python fallback.

Run:  python3 benchmarks/bench_kernels.py [--count 200000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from scorelab._kernels import available_backends, get_backend


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    m = args.count

    rng = np.random.default_rng(0)
    pts = rng.normal(size=(4096, 2))
    logw = rng.normal(size=4096)
    x = np.array([0.3, -0.7])

    names = available_backends()
    print(f"backends: {', '.join(names)};  count={m}, repeat={args.repeat}")
    header = f"{'kernel':34s}" + "".join(f"{n:>12s}" for n in names)
    print(header)
    print("-" * len(header))

    cases = {
        "uniform_draws": lambda be: be.uniform_draws(42, 1, 0, m),
        "normal_draws dim=2": lambda be: be.normal_draws(42, 1, 0, m // 2, 2),
        "weighted_gaussian_moments": lambda be: be.weighted_gaussian_moments(
            pts, logw, x, 0.25),
    }
    rows = {}
    for label, call in cases.items():
        rows[label] = [best_of(lambda: call(get_backend(n)), args.repeat)
                       for n in names]
        print(f"{label:34s}"
              + "".join(f"{t * 1e3:10.2f}ms" for t in rows[label]))

    if len(names) == 2:
        print()
        for label, (a, b) in rows.items():
            faster, slower = (names[0], names[1]) if a < b else (names[1],
                                                                 names[0])
            print(f"{label}: {faster} is {max(a, b) / min(a, b):.1f}x "
                  f"faster than {slower}")

    # uniform streams are pure integer hashing and must match bit for bit;
    # the normal transform goes through libm, so only ulp-level agreement
    draws = [(n, get_backend(n).uniform_draws(42, 1, 0, 100_000),
              get_backend(n).normal_draws(42, 1, 0, 100_000, 2))
             for n in names]
    worst = 0.0
    for n, u, z in draws[1:]:
        assert np.array_equal(draws[0][1], u), \
            f"backend {n} uniform stream diverges from {names[0]}"
        worst = max(worst, float(np.abs(z - draws[0][2]).max()))
        assert worst <= 2e-15, \
            f"backend {n} normal stream off by {worst:.2e}"
    print(f"\nuniform streams identical: yes; "
          f"normal streams worst |diff| {worst:.1e} (<= 2e-15)")


if __name__ == "__main__":
    main()
