"""Translate (graph, model, parallelism) into a sequence of engine passes.

Execution follows the merged scatter/gather design: per layer, one streamed
pass runs the layer's node transforms while message passing for the next
aggregation consumes the freshly produced embeddings; aggregation
finalization (mean division, degree scaling, softmax normalization, GCN/GAT
self terms) folds into the reader at zero modeled cycles. Models whose
messages are built from raw previous-layer embeddings (gin, pna, dgn) need an
initial buffer-fed scatter pass; gcn scatters its transformed embeddings
within each layer pass; gat runs gather-first with a score pass pipelined
into the transform and a buffer-fed weighted-sum pass per layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..graph import Graph
from ..models import ModelConfig
from .config import ParallelismConfig
from .costs import (
    build_routes,
    mp_unit_cost,
    nt_unit_cost,
    rebatch_beat_cycles,
    strategy_rules,
)
from .engine_py import PassSpec

ACC_WIDTH_MULT = {"gin": 1, "gcn": 1, "gat": 1, "pna": 12, "dgn": 2}


@dataclass
class PhasePlan:
    label: str
    spec: PassSpec
    nt_layer: int = -1
    mp_layer: int = -1
    mp_kind: str = ""
    swap_after: bool = False


@dataclass
class PlanContext:
    graph: Graph
    cfg: ModelConfig
    pcfg: ParallelismConfig
    n_banks: int
    block_size: int
    per_bank_edge_count: list[int]
    route_ptr: list[int]
    route_bank: list[int]
    route_cnt: list[int]
    route_rows: list[list[int]] = field(default_factory=list)
    node_rows: list[list[int]] = field(default_factory=list)
    msg_width: int = 0

    def rows_for(self, node: int, bank: int | None) -> list[int]:
        """COO rows of this node's out-edges, CSR order, optionally one bank."""
        if bank is None:
            return self.node_rows[node]
        for r in range(self.route_ptr[node], self.route_ptr[node + 1]):
            if self.route_bank[r] == bank:
                return self.route_rows[r]
        return []


def message_state_width(cfg: ModelConfig) -> int:
    """Widest per-node aggregation state any layer needs (F_msg)."""
    dims = cfg.layer_dims
    if cfg.model_kind == "gin":
        return max(dims[:-1])
    if cfg.model_kind == "gcn":
        return max(dims[1:])
    if cfg.model_kind == "pna":
        return 4 * max(dims[:-1])
    if cfg.model_kind == "dgn":
        return 2 * max(dims[:-1]) + 1
    if cfg.model_kind == "gat":
        return max(d + 2 * cfg.gat_heads for d in dims[1:])
    raise ValueError(cfg.model_kind)


def build_plan(graph: Graph, cfg: ModelConfig, pcfg: ParallelismConfig,
               collect_trace: bool = False) -> tuple[list[PhasePlan], PlanContext]:
    assignment, csr, route_ptr, route_bank, route_cnt = build_routes(graph, pcfg.mp_units)
    ctx = PlanContext(
        graph=graph,
        cfg=cfg,
        pcfg=pcfg,
        n_banks=pcfg.mp_units,
        block_size=assignment.block_size,
        per_bank_edge_count=[int(c) for c in assignment.per_bank_edge_count],
        route_ptr=route_ptr,
        route_bank=route_bank,
        route_cnt=route_cnt,
        msg_width=message_state_width(cfg),
    )
    bank_of = lambda dst: dst // assignment.block_size
    for node in range(graph.num_nodes):
        lo, hi = csr.row_ptr[node], csr.row_ptr[node + 1]
        rows = [int(csr.edge_perm[k]) for k in range(lo, hi)]
        ctx.node_rows.append(rows)
    for node in range(graph.num_nodes):
        for r in range(route_ptr[node], route_ptr[node + 1]):
            q = route_bank[r]
            ctx.route_rows.append(
                [row for row in ctx.node_rows[node] if bank_of(int(graph.coo[row, 1])) == q]
            )

    dims = cfg.layer_dims
    mult = ACC_WIDTH_MULT[cfg.model_kind]
    phases: list[PhasePlan] = []

    def streamed(label, layer, msg_dim, mp_layer, mp_kind, swap):
        acc, out = nt_unit_cost(mult * dims[layer], dims[layer + 1], pcfg.p_apply)
        spec = _streamed_spec(ctx, pcfg, graph.num_nodes, acc, out, msg_dim, collect_trace)
        phases.append(PhasePlan(label, spec, layer, mp_layer, mp_kind, swap))

    def buffer_fed(label, msg_dim, mp_layer, mp_kind, swap):
        spec = _buffer_spec(ctx, pcfg, msg_dim, collect_trace)
        phases.append(PhasePlan(label, spec, -1, mp_layer, mp_kind, swap))

    if cfg.model_kind in ("gin", "pna", "dgn"):
        buffer_fed("scatter0", dims[0], 0, "scatter", True)
        for layer in range(cfg.num_layers):
            if layer + 1 < cfg.num_layers:
                streamed(f"nt{layer}+scatter{layer + 1}", layer, dims[layer + 1],
                         layer + 1, "scatter", True)
            else:
                streamed(f"nt{layer}", layer, 0, -1, "", False)
    elif cfg.model_kind == "gcn":
        for layer in range(cfg.num_layers):
            streamed(f"nt{layer}+scatter{layer}", layer, dims[layer + 1],
                     layer, "scatter", True)
    elif cfg.model_kind == "gat":
        for layer in range(cfg.num_layers):
            streamed(f"z{layer}+score{layer}", layer, dims[layer + 1],
                     layer, "score", False)
            buffer_fed(f"wsum{layer}", dims[layer + 1], layer, "wsum", True)
    else:
        raise ValueError(cfg.model_kind)
    return phases, ctx


def _streamed_spec(ctx, pcfg, n_nodes, acc, out, msg_dim, collect_trace) -> PassSpec:
    node_beats = mp_unit_cost(msg_dim, pcfg.p_scatter) if msg_dim else 0
    if msg_dim:
        route_ptr, route_bank, route_cnt = ctx.route_ptr, ctx.route_bank, ctx.route_cnt
    else:
        route_ptr = [0] * (n_nodes + 1)
        route_bank, route_cnt = [], []
    rules = strategy_rules(pcfg)
    return PassSpec(
        mode=rules.mode,
        n_banks=rules.mp_units,
        queue_cap=rules.queue_entries,
        p_units=rules.nt_units,
        n_nodes=n_nodes,
        acc_cycles=acc,
        out_cycles=out,
        node_beats=node_beats,
        beat_done_cycle=(
            rebatch_beat_cycles(msg_dim, pcfg.p_apply, pcfg.p_scatter) if msg_dim else []
        ),
        route_ptr=route_ptr,
        route_bank=route_bank,
        route_cnt=route_cnt,
        burst_ptr=[0] * (rules.mp_units + 1),
        collect_trace=collect_trace,
    )


def _buffer_spec(ctx, pcfg, msg_dim, collect_trace) -> PassSpec:
    beats = mp_unit_cost(msg_dim, pcfg.p_scatter)
    banks = ctx.n_banks
    per_bank: list[list[tuple[int, int]]] = [[] for _ in range(banks)]
    n = ctx.graph.num_nodes
    for node in range(n):
        for r in range(ctx.route_ptr[node], ctx.route_ptr[node + 1]):
            per_bank[ctx.route_bank[r]].append((node, ctx.route_cnt[r] * beats))
    burst_ptr = [0]
    burst_src: list[int] = []
    burst_cost: list[int] = []
    for q in range(banks):
        for src, cost in per_bank[q]:
            burst_src.append(src)
            burst_cost.append(cost)
        burst_ptr.append(len(burst_src))
    return PassSpec(
        mode=3,
        n_banks=banks,
        queue_cap=pcfg.queue_depth,
        p_units=pcfg.nt_units,
        n_nodes=0,
        node_beats=beats,
        route_ptr=[0],
        burst_ptr=burst_ptr,
        burst_src=burst_src,
        burst_cost=burst_cost,
        collect_trace=collect_trace,
    )
