"""Time the compiled and pure-Python integration kernels on the same scenario.

Usage: python3 benchmarks/bench_kernels.py [--duration 20] [--repeat 3]
"""
import argparse
import time
from dataclasses import replace

import numpy as np

from gekf_esc import kernels
from gekf_esc.config import parse_config
from gekf_esc.sim import run_scenario


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="sim_known_objective")
    ap.add_argument("--duration", type=float, default=20.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    sc = replace(parse_config().get(args.scenario), duration=args.duration)
    steps = int(round(sc.duration / sc.dt))
    backends = ["python"] + (["cython"] if kernels.compiled_available() else [])
    results = {}
    for b in backends:
        secs, rec = best_of(lambda: run_scenario(sc, backend=b), args.repeat)
        results[b] = (secs, rec)
        print(f"{b:>7}: {secs:8.3f} s  ({steps / secs / 1e6:6.3f} M steps/s)")
    if len(results) == 2:
        (tp, rp), (tc, rc) = results["python"], results["cython"]
        diff = float(np.nanmax(np.abs(rp.data - rc.data)))
        print(f"speedup: {tp / tc:.1f}x   max |python - cython| = {diff:.3e}")
    else:
        print("compiled kernel not built; only the fallback was timed")


if __name__ == "__main__":
    main()
