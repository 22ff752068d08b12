"""Benchmark the pure-Python kernels against the compiled extension.

Runs each hot kernel (gestalt string matching, trigram hashing, range
distribution inner quadrature) on representative workloads and prints a
per-kernel timing table with the speedup ratio. The compiled backend is
optional; when it is unavailable only the pure timings are shown.

Usage:
    python benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]
"""

from __future__ import annotations

import argparse
import math
import random
import string
import time

from ragmark._kernels import _pure

try:
    from ragmark._kernels import _speedups
except ImportError:
    _speedups = None


def _best_of(fn, args_list: list[tuple], repeat: int) -> float:
    """Best wall-clock time over ``repeat`` passes of the full workload."""
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        for args in args_list:
            fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _gestalt_workload(rng: random.Random, scale: float) -> list[tuple]:
    alphabet = string.ascii_lowercase + "     "
    cases = []
    for _ in range(max(1, int(40 * scale))):
        n = rng.randrange(200, 600)
        a = "".join(rng.choice(alphabet) for _ in range(n))
        # Correlated partner: mutate a copy so matching blocks survive.
        chars = list(a)
        for _ in range(n // 10):
            chars[rng.randrange(n)] = rng.choice(alphabet)
        cases.append((a, "".join(chars)))
    return cases


def _trigram_workload(rng: random.Random, scale: float) -> list[tuple]:
    words = ["".join(rng.choice(string.ascii_lowercase) for _ in range(rng.randrange(2, 9)))
             for _ in range(400)]
    cases = []
    for _ in range(max(1, int(60 * scale))):
        text = "\x02" + " ".join(rng.choice(words) for _ in range(150)) + "\x03"
        cases.append((text, 384, 1234567))
    return cases


def _quadrature_workload(rng: random.Random, scale: float) -> list[tuple]:
    z = [-8.5 + 17.0 * i / 339 for i in range(340)]
    weighted = [0.05 * math.exp(-0.5 * v * v) for v in z]
    big = [0.5 * math.erfc(-v * 0.7071067811865476) for v in z]
    cases = []
    for _ in range(max(1, int(3000 * scale))):
        cases.append((rng.uniform(0.1, 6.0), rng.choice((2, 2, 9)), z, weighted, big))
    return cases


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5,
                        help="timing passes per kernel; best is reported")
    parser.add_argument("--scale", type=float, default=1.0,
                        help="workload size multiplier")
    parser.add_argument("--seed", type=int, default=2024)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    workloads = [
        ("gestalt_total", _gestalt_workload(rng, args.scale)),
        ("trigram_accumulate", _trigram_workload(rng, args.scale)),
        ("range_cdf_inner", _quadrature_workload(rng, args.scale)),
    ]

    if _speedups is None:
        print("compiled backend not available; showing pure timings only")
    print(f"{'kernel':<20} {'pure (s)':>10} {'compiled (s)':>13} {'speedup':>9}")
    for name, cases in workloads:
        pure_fn = getattr(_pure, name)
        if name == "range_cdf_inner":
            pure_cases = [(w, k, _pure.as_grid(z), _pure.as_grid(wp), _pure.as_grid(bp))
                          for w, k, z, wp, bp in cases]
        else:
            pure_cases = cases
        t_pure = _best_of(pure_fn, pure_cases, args.repeat)
        if _speedups is None:
            print(f"{name:<20} {t_pure:>10.4f} {'-':>13} {'-':>9}")
            continue
        fast_fn = getattr(_speedups, name)
        if name == "range_cdf_inner":
            fast_cases = [(w, k, _speedups.as_grid(z), _speedups.as_grid(wp),
                           _speedups.as_grid(bp)) for w, k, z, wp, bp in cases]
        else:
            fast_cases = cases
        # Guard: backends must agree before timing means anything.
        sample = pure_cases[0]
        fast_sample = fast_cases[0]
        if pure_fn(*sample) != fast_fn(*fast_sample):
            raise SystemExit(f"backend mismatch on {name}; refusing to benchmark")
        t_fast = _best_of(fast_fn, fast_cases, args.repeat)
        print(f"{name:<20} {t_pure:>10.4f} {t_fast:>13.4f} {t_pure / t_fast:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
