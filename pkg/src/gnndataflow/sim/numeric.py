"""Execute the model's real arithmetic in the order the engine scheduled it.

The timing engine decides when each unit touches which node or edge; this
module performs the corresponding float32 arithmetic, accumulating partial
aggregates into the banked message-buffer pair exactly as the hardware's
merged scatter/gather would: per destination, in the order its bank's MP unit
processed the edges. Everything else (node transforms, finalization) is
per-node math identical to the functional kernels.
"""

from __future__ import annotations

import numpy as np

from ..graph import Graph, build_csc, degrees
from ..kernels import global_mean_pool, mlp_head
from ..models import ModelConfig
from .config import MessageBufferPair
from .plan import PhasePlan, PlanContext

F32 = np.float32
NEG_INF = np.float32(-np.inf)
POS_INF = np.float32(np.inf)


class NumericExecutor:
    def __init__(self, graph: Graph, cfg: ModelConfig, ctx: PlanContext):
        self.graph = graph
        self.cfg = cfg
        self.ctx = ctx
        self.dims = cfg.layer_dims
        self.x = graph.node_features.astype(F32)
        self.vn = np.zeros(cfg.f_in, dtype=F32) if cfg.virtual_node else None
        self.buffers = MessageBufferPair(graph.num_nodes, ctx.msg_width)
        self.in_deg = degrees(graph, "in").astype(F32)
        self.z = None          # gcn transformed embeddings of the latest layer
        self.z3 = None         # gat per-head embeddings (N, H, F_h)
        self.p_score = None    # gat a_src . z_i
        self.q_score = None    # gat a_dst . z_j
        self.last_layer = -1
        if cfg.model_kind == "gcn":
            self.inv_sqrt = (1.0 / np.sqrt(self.in_deg + 1.0)).astype(F32)
        if cfg.model_kind == "dgn":
            self.w_edge = self._dgn_edge_weights()

    def _dgn_edge_weights(self) -> np.ndarray:
        field = self.graph.node_field.astype(F32)
        csc = build_csc(self.graph)
        w = np.zeros(self.graph.num_edges, dtype=F32)
        for i in range(self.graph.num_nodes):
            lo, hi = csc.row_ptr[i], csc.row_ptr[i + 1]
            if lo == hi:
                continue
            srcs = csc.col_idx[lo:hi]
            diffs = field[srcs] - field[i]
            norm = np.float32(np.abs(diffs).sum() + np.float32(1e-8))
            w[csc.edge_perm[lo:hi]] = diffs / norm
        return w

    # -- virtual-node state ------------------------------------------------

    def _vn_step(self, layer: int) -> None:
        p = self.cfg.layers[layer]
        real = self.graph.num_real_nodes
        self.x = self.x.copy()
        self.x[:real] += self.vn
        pooled = self.vn + self.x[:real].sum(axis=0)
        hidden = np.maximum(pooled @ p.vn_w1.T + p.vn_b1, F32(0.0))
        self.vn = (hidden @ p.vn_w2.T + p.vn_b2).astype(F32)

    # -- phase dispatch ------------------------------------------------------

    def apply_phase(self, phase: PhasePlan, bank_order: list[list[int]]) -> None:
        kind = self.cfg.model_kind
        if kind in ("gin", "pna", "dgn"):
            self._phase_scatter_family(phase, bank_order)
        elif kind == "gcn":
            self._phase_gcn(phase, bank_order)
        else:
            self._phase_gat(phase, bank_order)

    def _each_edge(self, bank_order: list[list[int]], single_bank: bool):
        """Yield (src, dst, coo_row) in the engine's processing order."""
        coo = self.graph.coo
        for q, srcs in enumerate(bank_order):
            bank = None if single_bank else q
            for src in srcs:
                for row in self.ctx.rows_for(src, bank):
                    yield src, int(coo[row, 1]), row

    def _edges_in_order(self, phase: PhasePlan, bank_order):
        single = phase.spec.mode in (0, 1, 4)  # single-unit strategies
        return self._each_edge(bank_order, single)

    # -- gin / pna / dgn -----------------------------------------------------

    def _phase_scatter_family(self, phase: PhasePlan, bank_order) -> None:
        if phase.nt_layer >= 0:
            self._nt_scatter_family(phase.nt_layer)
        elif self.cfg.virtual_node:
            self._vn_step(0)  # layer-0 state update before the initial scatter
        if phase.mp_layer >= 0:
            self._accumulate_scatter(phase, bank_order)
        if phase.swap_after:
            self.buffers.swap()

    def _nt_scatter_family(self, layer: int) -> None:
        kind = self.cfg.model_kind
        p = self.cfg.layers[layer]
        d = self.dims[layer]
        state = self.buffers.read
        if kind == "gin":
            agg = state[:, :d]
            pre = F32(1.0 + p.epsilon) * self.x + agg
            hidden = np.maximum(pre @ p.lin1_w.T + p.lin1_b, F32(0.0))
            self.x = (hidden @ p.lin2_w.T + p.lin2_b).astype(F32)
        elif kind == "pna":
            combined = self._pna_finalize(state, d)
            self.x = np.maximum(combined @ p.lin1_w.T + p.lin1_b, F32(0.0))
        else:  # dgn
            combined = self._dgn_finalize(state, d)
            self.x = np.maximum(combined @ p.lin1_w.T + p.lin1_b, F32(0.0))
        if self.cfg.virtual_node and layer + 1 < self.cfg.num_layers:
            self._vn_step(layer + 1)

    def _pna_finalize(self, state: np.ndarray, d: int) -> np.ndarray:
        n = self.graph.num_nodes
        delta = F32(self.cfg.pna_avg_log_degree)
        combined = np.zeros((n, 12 * d), dtype=F32)
        deg = self.in_deg
        live = deg > 0
        if not live.any():
            return combined
        degl = deg[live, None]
        mean = state[live, :d] / degl
        var = np.maximum(state[live, d:2 * d] / degl - mean * mean, F32(0.0))
        std = np.sqrt(var + F32(1e-5)).astype(F32)
        aggs = [mean, std, state[live, 2 * d:3 * d], state[live, 3 * d:4 * d]]
        log_deg = np.log(deg[live] + 1.0).astype(F32)[:, None]
        scalers = [np.float32(1.0), log_deg / delta, delta / log_deg]
        combined[live] = np.concatenate([s * a for s in scalers for a in aggs], axis=1)
        return combined

    def _dgn_finalize(self, state: np.ndarray, d: int) -> np.ndarray:
        n = self.graph.num_nodes
        combined = np.zeros((n, 2 * d), dtype=F32)
        deg = self.in_deg
        live = deg > 0
        combined[live, :d] = state[live, :d] / deg[live, None]
        combined[live, d:] = np.abs(
            state[live, d:2 * d] - self.x[live] * state[live, 2 * d:2 * d + 1]
        )
        return combined

    def _accumulate_scatter(self, phase: PhasePlan, bank_order) -> None:
        kind = self.cfg.model_kind
        layer = phase.mp_layer
        p = self.cfg.layers[layer]
        d = self.dims[layer]
        state = self.buffers.write
        state[:] = F32(0.0)
        if kind == "pna":
            state[:, 2 * d:3 * d] = NEG_INF
            state[:, 3 * d:4 * d] = POS_INF
        enc = p.edge_enc if kind in ("gin", "pna") else None
        efeat = self.graph.edge_features
        for src, dst, row in self._edges_in_order(phase, bank_order):
            if kind == "dgn":
                xs = self.x[src]
                w = self.w_edge[row]
                state[dst, :d] += xs
                state[dst, d:2 * d] += w * xs
                state[dst, 2 * d] += w
                continue
            m = self.x[src]
            if enc is not None and efeat is not None:
                m = m + enc @ efeat[row]
            m = np.maximum(m, F32(0.0))
            if kind == "gin":
                state[dst, :d] += m
            else:  # pna
                state[dst, :d] += m
                state[dst, d:2 * d] += m * m
                np.maximum(state[dst, 2 * d:3 * d], m, out=state[dst, 2 * d:3 * d])
                np.minimum(state[dst, 3 * d:4 * d], m, out=state[dst, 3 * d:4 * d])

    # -- gcn -------------------------------------------------------------

    def _phase_gcn(self, phase: PhasePlan, bank_order) -> None:
        layer = phase.nt_layer
        p = self.cfg.layers[layer]
        if layer > 0:
            self.x = self._gcn_finalize(layer - 1)
        if self.cfg.virtual_node:
            self._vn_step(layer)
        self.z = (self.x @ p.lin1_w.T).astype(F32)
        if p.lin1_b is not None:
            self.z = self.z + p.lin1_b
        d_out = self.dims[layer + 1]
        state = self.buffers.write
        state[:] = F32(0.0)
        state[:, :d_out] = self.z / (self.in_deg[:, None] + 1.0)  # self-loop term
        for src, dst, _ in self._edges_in_order(phase, bank_order):
            coef = self.inv_sqrt[dst] * self.inv_sqrt[src]
            state[dst, :d_out] += coef * self.z[src]
        self.buffers.swap()
        self.last_layer = layer

    def _gcn_finalize(self, layer: int) -> np.ndarray:
        d_out = self.dims[layer + 1]
        return np.maximum(self.buffers.read[:, :d_out], F32(0.0))

    # -- gat -------------------------------------------------------------

    def _phase_gat(self, phase: PhasePlan, bank_order) -> None:
        layer = phase.mp_layer
        p = self.cfg.layers[layer]
        heads = self.cfg.gat_heads
        d_out = self.dims[layer + 1]
        slope = F32(self.cfg.gat_leaky_slope)
        state = self.buffers.write

        if phase.mp_kind == "score":
            if layer > 0:
                self.x = self._gat_finalize(layer - 1)
            if self.cfg.virtual_node:
                self._vn_step(layer)
            self.z3 = np.einsum("hfd,nd->nhf", p.gat_w, self.x).astype(F32)
            self.p_score = (self.z3 * p.gat_a_src).sum(axis=2).astype(F32)
            self.q_score = (self.z3 * p.gat_a_dst).sum(axis=2).astype(F32)
            state[:] = F32(0.0)
            self_raw = self.p_score + self.q_score
            state[:, :heads] = np.where(self_raw > 0, self_raw, slope * self_raw)
            for src, dst, _ in self._edges_in_order(phase, bank_order):
                raw = self.p_score[dst] + self.q_score[src]
                s = np.where(raw > 0, raw, slope * raw)
                np.maximum(state[dst, :heads], s, out=state[dst, :heads])
        else:  # wsum
            mx = state[:, :heads]
            self_raw = self.p_score + self.q_score
            self_s = np.where(self_raw > 0, self_raw, slope * self_raw).astype(F32)
            self_w = np.exp(self_s - mx).astype(F32)
            state[:, heads:2 * heads] = self_w
            fh = self.cfg.gat_head_dim
            num = state[:, 2 * heads:2 * heads + d_out].reshape(-1, heads, fh)
            num[:] = self_w[:, :, None] * self.z3
            for src, dst, _ in self._edges_in_order(phase, bank_order):
                raw = self.p_score[dst] + self.q_score[src]
                s = np.where(raw > 0, raw, slope * raw)
                w = np.exp(s - mx[dst]).astype(F32)
                state[dst, heads:2 * heads] += w
                num[dst] += w[:, None] * self.z3[src]
            self.buffers.swap()
            self.last_layer = layer

    def _gat_finalize(self, layer: int) -> np.ndarray:
        heads = self.cfg.gat_heads
        fh = self.cfg.gat_head_dim
        d_out = self.dims[layer + 1]
        state = self.buffers.read
        den = state[:, heads:2 * heads]
        num = state[:, 2 * heads:2 * heads + d_out].reshape(-1, heads, fh)
        return (num / den[:, :, None]).reshape(-1, d_out).astype(F32)

    # -- output ------------------------------------------------------------

    def final_embeddings(self) -> np.ndarray:
        if self.cfg.model_kind == "gcn":
            return self._gcn_finalize(self.last_layer)
        if self.cfg.model_kind == "gat":
            return self._gat_finalize(self.last_layer)
        return self.x

    def prediction(self) -> np.ndarray:
        from ..kernels import EmbeddingBuffer

        emb = EmbeddingBuffer(self.final_embeddings(), self.cfg.num_layers)
        return mlp_head(global_mean_pool(self.graph, emb), self.cfg.head)
