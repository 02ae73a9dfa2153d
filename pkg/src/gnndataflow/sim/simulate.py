"""Top-level cycle-approximate simulation of one inference."""

from __future__ import annotations

import numpy as np

from ..graph import Graph, workload_imbalance
from ..kernels import _check_compat
from ..models import ModelConfig, validate_model
from . import engine
from .config import ParallelismConfig, SimReport
from .numeric import NumericExecutor
from .plan import build_plan


def simulate(
    graph: Graph,
    cfg: ModelConfig,
    pcfg: ParallelismConfig | None = None,
    trace_path: str | None = None,
) -> SimReport:
    """Run the dataflow schedule for one graph and return its SimReport.

    The schedule is value-independent; the executor performs the real
    arithmetic in exactly the per-bank order the engine processed edges, so
    the report's prediction is the dataflow machine's own output.
    """
    pcfg = pcfg or ParallelismConfig()
    validate_model(cfg)
    _check_compat(graph, cfg)

    collect_trace = trace_path is not None
    phases, ctx = build_plan(graph, cfg, pcfg, collect_trace)
    executor = NumericExecutor(graph, cfg, ctx)

    nt_units = pcfg.nt_units
    mp_units = pcfg.mp_units
    nt_busy = [0] * nt_units
    nt_stall = [0] * nt_units
    mp_busy = [0] * mp_units
    queue_max = [0] * mp_units
    queue_stall = [0] * mp_units
    per_pass: list[int] = []
    total = 0
    trace_lines: list[str] = []

    for phase in phases:
        result = engine.run_pass(phase.spec)
        executor.apply_phase(phase, result.bank_order)
        for k, busy in enumerate(result.prod_busy):
            nt_busy[k] += busy
        for k, stall in enumerate(result.prod_stall):
            nt_stall[k] += stall
        for q, busy in enumerate(result.cons_busy):
            mp_busy[q] += busy
        for q, occ in enumerate(result.queue_max):
            queue_max[q] = max(queue_max[q], occ)
        for q, stall in enumerate(result.queue_stall):
            queue_stall[q] += stall
        if collect_trace:
            for cycle, unit, event, node in result.trace:
                trace_lines.append(f"{total + cycle},{unit},{event},{node},{phase.label}")
        per_pass.append(result.cycles)
        total += result.cycles + pcfg.layer_overhead

    if collect_trace:
        with open(trace_path, "w") as fh:
            fh.write("cycle,unit,event,node,detail\n")
            fh.write("\n".join(trace_lines))
            if trace_lines:
                fh.write("\n")

    imbalance = None
    if mp_units >= 2 and graph.num_edges > 0:
        imbalance = workload_imbalance(graph, mp_units)

    return SimReport(
        total_cycles=total,
        nt_busy=nt_busy,
        nt_idle=[total - b for b in nt_busy],
        nt_stall=nt_stall,
        mp_busy=mp_busy,
        mp_idle=[total - b for b in mp_busy],
        queue_max_occupancy=queue_max,
        queue_full_stall_cycles=queue_stall,
        per_bank_edge_counts=ctx.per_bank_edge_count,
        imbalance_pct=imbalance,
        prediction=np.asarray(executor.prediction(), dtype=np.float32),
        peak_message_scalars=executor.buffers.peak_scalars,
        strategy=pcfg.strategy.value,
        p_node=pcfg.p_node,
        p_edge=pcfg.p_edge,
        p_apply=pcfg.p_apply,
        p_scatter=pcfg.p_scatter,
        queue_depth=pcfg.queue_depth,
        per_pass_cycles=per_pass,
    )
