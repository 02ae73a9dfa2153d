"""Schedule-free message-passing layers for the six supported model families.

These are the numeric ground truth: pure functions of immutable inputs in
float32, aggregating neighbors in CSC view order so repeated runs are
bit-identical. The dataflow simulator must reproduce these numbers; the
naive implementations in ``oracle`` cross-check them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import CscView, Graph, build_csc, degrees
from .models import LayerParams, ModelConfig, validate_model

STD_EPS = np.float32(1e-5)
DGN_EPS = np.float32(1e-8)


@dataclass
class EmbeddingBuffer:
    """Per-node embeddings at one layer boundary."""

    data: np.ndarray
    layer: int = 0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)


def aggregate(values: np.ndarray, kind: str) -> np.ndarray:
    """Elementwise reduction over rows; empty input yields the zero vector."""
    values = np.asarray(values, dtype=np.float32)
    if values.ndim != 2:
        raise ValueError("aggregate expects a (k, F) array")
    f = values.shape[1]
    if values.shape[0] == 0:
        return np.zeros(f, dtype=np.float32)
    if kind == "sum":
        return values.sum(axis=0)
    if kind == "mean":
        return values.mean(axis=0)
    if kind == "max":
        return values.max(axis=0)
    if kind == "min":
        return values.min(axis=0)
    if kind == "std":
        mean = values.mean(axis=0)
        var = np.maximum((values * values).mean(axis=0) - mean * mean, 0.0)
        return np.sqrt(var + STD_EPS).astype(np.float32)
    raise ValueError(f"unknown aggregation kind {kind!r}")


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, np.float32(0.0))


def _linear(x: np.ndarray, w: np.ndarray, b: np.ndarray | None) -> np.ndarray:
    y = x @ w.T
    return y if b is None else y + b


def _mlp2(x: np.ndarray, p: LayerParams) -> np.ndarray:
    return _linear(_relu(_linear(x, p.lin1_w, p.lin1_b)), p.lin2_w, p.lin2_b)


def _edge_messages(graph: Graph, x: np.ndarray, p: LayerParams, csc: CscView) -> np.ndarray:
    """ReLU(x_src + enc(e)) per edge, rows in CSC (destination-grouped) order."""
    src = csc.col_idx
    msgs = x[src]
    if p.edge_enc is not None and graph.edge_features is not None:
        msgs = msgs + graph.edge_features[csc.edge_perm] @ p.edge_enc.T
    return _relu(msgs)


def gin_layer(graph: Graph, emb: EmbeddingBuffer, p: LayerParams,
              csc: CscView | None = None) -> EmbeddingBuffer:
    """x' = MLP((1 + eps) * x + sum_j ReLU(x_j + enc(e_ji)))."""
    x = emb.data
    csc = csc or build_csc(graph)
    msgs = _edge_messages(graph, x, p, csc)
    agg = np.zeros_like(x)
    for i in range(graph.num_nodes):
        agg[i] = msgs[csc.row_ptr[i]:csc.row_ptr[i + 1]].sum(axis=0)
    out = _mlp2(np.float32(1.0 + p.epsilon) * x + agg, p)
    return EmbeddingBuffer(out, emb.layer + 1)


def gcn_layer(graph: Graph, emb: EmbeddingBuffer, p: LayerParams,
              csc: CscView | None = None) -> EmbeddingBuffer:
    """Symmetric-normalized convolution with self-loops, ReLU activation."""
    x = emb.data
    csc = csc or build_csc(graph)
    z = _linear(x, p.lin1_w, p.lin1_b)
    dhat = (degrees(graph, "in") + 1).astype(np.float32)
    inv_sqrt = (1.0 / np.sqrt(dhat)).astype(np.float32)
    out = np.empty_like(z)
    for i in range(graph.num_nodes):
        srcs = csc.row(i)
        acc = z[i] / dhat[i]
        if srcs.size:
            coef = (inv_sqrt[i] * inv_sqrt[srcs]).astype(np.float32)
            acc = acc + (coef[:, None] * z[srcs]).sum(axis=0)
        out[i] = acc
    return EmbeddingBuffer(_relu(out), emb.layer + 1)


def gat_layer(graph: Graph, emb: EmbeddingBuffer, p: LayerParams, heads: int,
              head_dim: int, slope: float = 0.2, csc: CscView | None = None,
              return_attention: bool = False):
    """Multi-head additive attention over in-neighbors plus a self-loop."""
    x = emb.data
    csc = csc or build_csc(graph)
    z = np.einsum("hfd,nd->nhf", p.gat_w, x).astype(np.float32)  # (N, H, F_h)
    p_i = (z * p.gat_a_src).sum(axis=2)  # (N, H)
    q_j = (z * p.gat_a_dst).sum(axis=2)
    slope = np.float32(slope)
    out = np.zeros((graph.num_nodes, heads * head_dim), dtype=np.float32)
    attention = [] if return_attention else None
    for i in range(graph.num_nodes):
        srcs = csc.row(i)
        members = np.concatenate([[i], srcs]).astype(np.int64)
        raw = p_i[i][None, :] + q_j[members]  # (k+1, H)
        scores = np.where(raw > 0, raw, slope * raw).astype(np.float32)
        scores = scores - scores.max(axis=0, keepdims=True)
        weights = np.exp(scores)
        alpha = (weights / weights.sum(axis=0, keepdims=True)).astype(np.float32)
        mixed = np.einsum("kh,khf->hf", alpha, z[members]).astype(np.float32)
        out[i] = mixed.reshape(-1)
        if return_attention:
            attention.append(alpha)
    result = EmbeddingBuffer(out, emb.layer + 1)
    return (result, attention) if return_attention else result


def pna_layer(graph: Graph, emb: EmbeddingBuffer, p: LayerParams, delta: float,
              csc: CscView | None = None) -> EmbeddingBuffer:
    """Four aggregators scaled three ways, concatenated, then linear + ReLU."""
    if delta <= 0:
        raise ValueError("pna average log degree must be > 0")
    x = emb.data
    d_in = x.shape[1]
    csc = csc or build_csc(graph)
    msgs = _edge_messages(graph, x, p, csc)
    delta = np.float32(delta)
    combined = np.zeros((graph.num_nodes, 12 * d_in), dtype=np.float32)
    for i in range(graph.num_nodes):
        rows = msgs[csc.row_ptr[i]:csc.row_ptr[i + 1]]
        deg = rows.shape[0]
        if deg == 0:
            continue  # degree-0 convention: all twelve blocks stay zero
        aggs = [aggregate(rows, kind) for kind in ("mean", "std", "max", "min")]
        log_deg = np.float32(np.log(deg + 1.0))
        scalers = (np.float32(1.0), log_deg / delta, delta / log_deg)
        combined[i] = np.concatenate([s * a for s in scalers for a in aggs])
    out = _relu(_linear(combined, p.lin1_w, p.lin1_b))
    return EmbeddingBuffer(out, emb.layer + 1)


def dgn_layer(graph: Graph, emb: EmbeddingBuffer, p: LayerParams,
              csc: CscView | None = None) -> EmbeddingBuffer:
    """Mean aggregator concatenated with a field-guided directional derivative."""
    if graph.node_field is None:
        raise ValueError("dgn requires a node_field on the graph")
    x = emb.data
    field = graph.node_field
    csc = csc or build_csc(graph)
    combined = np.zeros((graph.num_nodes, 2 * x.shape[1]), dtype=np.float32)
    for i in range(graph.num_nodes):
        srcs = csc.row(i)
        if srcs.size == 0:
            continue
        rows = x[srcs]
        diffs = field[srcs] - field[i]
        w = (diffs / (np.abs(diffs).sum() + DGN_EPS)).astype(np.float32)
        mean = rows.mean(axis=0)
        direction = np.abs((w[:, None] * rows).sum(axis=0) - x[i] * w.sum())
        combined[i] = np.concatenate([mean, direction])
    out = _relu(_linear(combined, p.lin1_w, p.lin1_b))
    return EmbeddingBuffer(out, emb.layer + 1)


def virtual_node_step(graph: Graph, emb: EmbeddingBuffer, vn_state: np.ndarray,
                      p: LayerParams) -> tuple[EmbeddingBuffer, np.ndarray]:
    """Broadcast the virtual-node state into real nodes, then refresh it.

    Returns the updated embeddings and the next state
    MLP(vn + sum_i x_i') where the sum runs over real nodes.
    """
    x = emb.data.copy()
    real = graph.num_real_nodes
    x[:real] += vn_state.astype(np.float32)
    pooled = x[:real].sum(axis=0)
    hidden = _relu(_linear(vn_state + pooled, p.vn_w1, p.vn_b1))
    vn_next = _linear(hidden, p.vn_w2, p.vn_b2)
    return EmbeddingBuffer(x, emb.layer), vn_next.astype(np.float32)


def global_mean_pool(graph: Graph, emb: EmbeddingBuffer) -> np.ndarray:
    """Mean over real nodes; the virtual node is excluded when present."""
    return emb.data[:graph.num_real_nodes].mean(axis=0)


def mlp_head(vec: np.ndarray, head: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Linear+ReLU chain; the final layer stays linear."""
    out = np.asarray(vec, dtype=np.float32)
    for k, (w, b) in enumerate(head):
        out = _linear(out, w, b)
        if k + 1 < len(head):
            out = _relu(out)
    return out


def _check_compat(graph: Graph, cfg: ModelConfig) -> None:
    if graph.feature_dim != cfg.f_in:
        raise ValueError(f"graph features ({graph.feature_dim}) != config f_in ({cfg.f_in})")
    if cfg.model_kind == "dgn" and graph.node_field is None:
        raise ValueError("dgn model requires a graph with a node field")
    if cfg.uses_edge_features and graph.edge_feature_dim != cfg.edge_dim:
        raise ValueError(
            f"graph edge features ({graph.edge_feature_dim}) != config edge_dim ({cfg.edge_dim})"
        )


def run_layers(graph: Graph, cfg: ModelConfig) -> EmbeddingBuffer:
    """Run all message-passing layers, returning the final embeddings."""
    validate_model(cfg)
    _check_compat(graph, cfg)
    csc = build_csc(graph)
    emb = EmbeddingBuffer(graph.node_features, 0)
    vn = np.zeros(cfg.f_in, dtype=np.float32) if cfg.virtual_node else None
    for layer, p in enumerate(cfg.layers):
        if cfg.virtual_node:
            emb, vn = virtual_node_step(graph, emb, vn, p)
        if cfg.model_kind == "gin":
            emb = gin_layer(graph, emb, p, csc)
        elif cfg.model_kind == "gcn":
            emb = gcn_layer(graph, emb, p, csc)
        elif cfg.model_kind == "gat":
            emb = gat_layer(graph, emb, p, cfg.gat_heads, cfg.gat_head_dim,
                            cfg.gat_leaky_slope, csc)
        elif cfg.model_kind == "pna":
            emb = pna_layer(graph, emb, p, cfg.pna_avg_log_degree, csc)
        elif cfg.model_kind == "dgn":
            emb = dgn_layer(graph, emb, p, csc)
    return emb


def run_model(graph: Graph, cfg: ModelConfig) -> np.ndarray:
    """Layers, pooling over real nodes, then the prediction head."""
    emb = run_layers(graph, cfg)
    return mlp_head(global_mean_pool(graph, emb), cfg.head)
