"""Compiled vs pure-Python kernel timings on identical random inputs.

    python3 benchmarks/bench_kernels.py [--slots N] [--repeat R]
"""

import argparse
import time

import numpy as np

from latqueue import kernels
from latqueue.model import (
    InterferenceKernel,
    Routing,
    ScenarioConfig,
    bernoulli,
    build_topology,
    poisson,
)
from latqueue.sim_continuous import run_ct
from latqueue.sim_discrete import run


def scenarios(slots):
    ring = build_topology("torus", 16, InterferenceKernel.nearest_neighbour(1))
    grid = build_topology("torus", (8, 8), InterferenceKernel.nearest_neighbour(2))
    yield "D1 16-ring", ScenarioConfig(ring, bernoulli(0.3, 16), scheduler="D1", horizon=slots)
    yield "D2 16-ring", ScenarioConfig(ring, bernoulli(0.3, 16), horizon=slots)
    yield "D2 8x8 torus", ScenarioConfig(grid, bernoulli(0.15, 64), horizon=slots // 4)
    yield "multi-hop 16-ring", ScenarioConfig(ring, bernoulli(0.125, 16), routing=Routing(0.5),
                                              horizon=slots)
    yield "continuous multi-hop", ScenarioConfig(
        ring, poisson(0.125, 16), scheduler="uniformized", time_model="continuous",
        routing=Routing(0.5), horizon=slots / 20)


def timed(sc, backend, repeat):
    fn = run_ct if sc.time_model == "continuous" else run
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(sc, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--slots", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if "compiled" not in kernels.available():
        raise SystemExit("compiled kernels not built; run `pip install -e . --no-build-isolation`")
    print(f"{'scenario':<22} {'compiled s':>11} {'python s':>10} {'speedup':>8}  identical")
    for name, sc in scenarios(args.slots):
        tc, rc = timed(sc, "compiled", args.repeat)
        tp, rp = timed(sc, "python", 1)
        same = (np.array_equal(rc.sum_x, rp.sum_x) and np.array_equal(rc.final, rp.final)
                and np.array_equal(rc.departures, rp.departures))
        print(f"{name:<22} {tc:>11.3f} {tp:>10.3f} {tp / tc:>7.1f}x  {same}")


if __name__ == "__main__":
    main()
