"""Unit cost model and adapter routing.

One cycle moves one beat: p_apply scalar lanes on the NT side, p_scatter on
the MP side. MAC arrays inside a unit are width-parallel and free, so an NT
node costs one accumulate cycle per input beat plus one output cycle per
output beat, and an MP edge costs one cycle per message beat. Queue handshakes
overlap these cycles and add no latency of their own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..graph import CsrView, EdgeBankAssignment, Graph, build_csr, partition_edges
from .config import ParallelismConfig, PipelineStrategy


@dataclass(frozen=True)
class ScheduleRules:
    """Event-generation rules one pipeline strategy imposes on a pass.

    mode selects the engine state machine (0 barrier, 1 node queue, 2 beat
    multiqueue, 4 lock-step pairing); queue entries are whole node embeddings
    unless beat_streaming, in which case consumers take p_scatter-wide beats
    as they arrive instead of waiting for full embeddings.
    """

    mode: int
    nt_units: int
    mp_units: int
    queue_entries: int
    beat_streaming: bool


def strategy_rules(pcfg: ParallelismConfig) -> ScheduleRules:
    strategy = pcfg.strategy
    if strategy is PipelineStrategy.NON_PIPELINED:
        return ScheduleRules(0, 1, 1, 1, False)
    if strategy is PipelineStrategy.FIXED_PIPELINE:
        return ScheduleRules(4, 1, 1, 1, False)
    if strategy is PipelineStrategy.BASELINE_DATAFLOW:
        return ScheduleRules(1, 1, 1, pcfg.queue_depth, False)
    return ScheduleRules(2, pcfg.p_node, pcfg.p_edge, pcfg.queue_depth, True)


def nt_unit_cost(msg_in_dim: int, out_dim: int, p_apply: int) -> tuple[int, int]:
    """(accumulate, output) cycles for one node transform."""
    return math.ceil(msg_in_dim / p_apply), math.ceil(out_dim / p_apply)


def mp_unit_cost(msg_dim: int, p_scatter: int) -> int:
    """Cycles one MP unit spends on one edge."""
    return math.ceil(msg_dim / p_scatter)


def rebatch_beat_cycles(msg_dim: int, p_apply: int, p_scatter: int) -> list[int]:
    """Output cycle (1-based) at which each p_scatter-wide beat completes.

    The adapter re-batches the p_apply-wide NT output stream into
    p_scatter-wide MP beats; beat b is complete once its last element has
    been emitted.
    """
    out_cycles = math.ceil(msg_dim / p_apply)
    done = []
    for hi in range(p_scatter, msg_dim + p_scatter, p_scatter):
        done.append(min(math.ceil(min(hi, msg_dim) / p_apply), out_cycles))
    return done


def adapter_route(node: int, assignment: EdgeBankAssignment, csr: CsrView) -> list[int]:
    """Banks whose MP unit must receive this node's embedding beats.

    A beat is multicast to queue q iff the node has at least one outgoing
    edge whose destination lies in bank q.
    """
    dsts = csr.row(node)
    return sorted({int(d) // assignment.block_size for d in dsts})


def build_routes(graph: Graph, p_edge: int):
    """Per-node (bank, edge-count) routing table plus the bank assignment.

    Returns (assignment, csr, route_ptr, route_bank, route_cnt) where the
    ragged route arrays list each node's target banks in ascending order.
    """
    assignment = partition_edges(graph, p_edge)
    csr = build_csr(graph)
    route_ptr = [0]
    route_bank: list[int] = []
    route_cnt: list[int] = []
    for node in range(graph.num_nodes):
        dsts = csr.row(node)
        counts: dict[int, int] = {}
        for d in dsts:
            q = int(d) // assignment.block_size
            counts[q] = counts.get(q, 0) + 1
        for q in sorted(counts):
            route_bank.append(q)
            route_cnt.append(counts[q])
        route_ptr.append(len(route_bank))
    return assignment, csr, route_ptr, route_bank, route_cnt
