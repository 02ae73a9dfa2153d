#!/usr/bin/env python3
"""Compare the compiled and pure-Python timing engines on shared workloads.

Both engines must produce identical pass results; this script reports their
relative speed on a spread of graph sizes, models, and parallelism configs.

    python3 benchmarks/bench_engines.py [--repeats N]
"""

import argparse
import time

from gnndataflow.graph import gen_synthetic
from gnndataflow.models import random_model
from gnndataflow.sim import engine_py
from gnndataflow.sim.config import ParallelismConfig, PipelineStrategy
from gnndataflow.sim.plan import build_plan

try:
    from gnndataflow.sim import _engine_cy as engine_cy
except ImportError:
    engine_cy = None

WORKLOADS = [
    ("molhiv-like gcn, baseline", 25, 2.2, "gcn", 5, 100,
     dict(strategy=PipelineStrategy.BASELINE_DATAFLOW)),
    ("molhiv-like gcn, multiqueue 2x4", 25, 2.2, "gcn", 5, 100,
     dict(p_node=2, p_edge=4)),
    ("dense gin, multiqueue 4x4", 48, 8.0, "gin", 5, 100,
     dict(p_node=4, p_edge=4, p_scatter=2)),
    ("gat, multiqueue 2x4", 32, 4.0, "gat", 5, 64, dict(p_node=2, p_edge=4)),
    ("hub graph, tiny queues", 64, 2.0, "gin", 3, 64,
     dict(p_node=2, p_edge=2, queue_depth=2)),
]


def time_engine(impl, phases, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for phase in phases:
            impl.run_pass(phase.spec)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if engine_cy is None:
        print("compiled engine not built; showing pure-Python timings only")

    header = f"{'workload':34} {'cycles':>10} {'python':>10} {'compiled':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for label, n, deg, kind, layers, hidden, overrides in WORKLOADS:
        graph = gen_synthetic(n, deg, "uniform", (9, 3), seed=1)
        cfg = random_model(kind, f_in=9, edge_dim=3, seed=1,
                           num_layers=layers, hidden_dim=hidden)
        pcfg = ParallelismConfig(**overrides)
        phases, _ = build_plan(graph, cfg, pcfg)
        cycles = sum(engine_py.run_pass(ph.spec).cycles for ph in phases)
        t_py = time_engine(engine_py, phases, args.repeats)
        if engine_cy is not None:
            cy_cycles = sum(engine_cy.run_pass(ph.spec).cycles for ph in phases)
            assert cy_cycles == cycles, f"engines disagree on {label}"
            t_cy = time_engine(engine_cy, phases, args.repeats)
            print(f"{label:34} {cycles:>10} {t_py * 1e3:>8.2f}ms {t_cy * 1e3:>8.2f}ms "
                  f"{t_py / t_cy:>7.1f}x")
        else:
            print(f"{label:34} {cycles:>10} {t_py * 1e3:>8.2f}ms {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
