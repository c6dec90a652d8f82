"""Benchmark the compiled kernels against the pure-Python fallback.

Run as ``python -m ctmgsolve.bench``.  Reports wall time per call for
solve, scheduler evaluation and simulation on the built-in race model.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ._backend import get_kernels
from ._compile import compile_model
from .format import parse_model
from .samples import TWO_CHOICE_RACE


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(steps: int, runs: int, repeat: int) -> list[tuple[str, float, float]]:
    model = parse_model(TWO_CHOICE_RACE)
    arrays = compile_model(model, "max")
    bps = np.array([0.0, model.time_bound])
    rows = np.array([[0, 0, -1]], dtype=np.int32)

    backends = {}
    for name in ("python", "compiled"):
        try:
            backends[name] = get_kernels(name)
        except ImportError:
            pass

    cases = [
        ("solve N=%d" % steps, lambda k: k.solve_kernel(arrays, steps, 1e-9, 1e-12)),
        ("evaluate N=%d" % steps, lambda k: k.evaluate_kernel(arrays, bps, rows, steps)),
        ("simulate runs=%d" % runs, lambda k: k.simulate_kernel(arrays, bps, rows, runs, 42)),
    ]
    out = []
    for label, fn in cases:
        times = {}
        for name, kern in backends.items():
            times[name] = _time(lambda: fn(kern), repeat)
        out.append((label, times.get("python", float("nan")), times.get("compiled", float("nan"))))
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=10000)
    ap.add_argument("--runs", type=int, default=100000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    rows = run(args.steps, args.runs, args.repeat)
    print(f"{'case':<24}{'python':>12}{'compiled':>12}{'speedup':>10}")
    for label, tp, tc in rows:
        speed = tp / tc if tc > 0 else float("nan")
        print(f"{label:<24}{tp:>11.4f}s{tc:>11.4f}s{speed:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
