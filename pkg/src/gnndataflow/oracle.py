"""Deliberately naive ground-truth implementations used only for checking.

Everything here loops over the raw COO edge list, materializes per-edge
messages, and accumulates in float64 in COO order. It deliberately shares no
code with ``kernels`` beyond primitive arithmetic so agreement between the two
is a genuine cross-check, not a tautology.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .models import LayerParams, ModelConfig


@dataclass
class DenseGraph:
    """Dense 0/1 adjacency; row = destination, column = source."""

    adjacency: np.ndarray
    features: np.ndarray

    @classmethod
    def from_graph(cls, graph: Graph) -> "DenseGraph":
        a = np.zeros((graph.num_nodes, graph.num_nodes), dtype=np.float64)
        for src, dst in graph.coo:
            a[dst, src] = 1.0
        return cls(a, graph.node_features.astype(np.float64))


def dense_gcn_oracle(dense: DenseGraph, p: LayerParams) -> np.ndarray:
    """One GCN layer as ReLU(D^-1/2 (A + I) D^-1/2 X W^T + b), all dense."""
    n = dense.adjacency.shape[0]
    a_hat = dense.adjacency + np.eye(n)
    d_hat = a_hat.sum(axis=1)
    d_inv = np.diag(1.0 / np.sqrt(d_hat))
    x = dense.features
    w = p.lin1_w.astype(np.float64)
    b = 0.0 if p.lin1_b is None else p.lin1_b.astype(np.float64)
    return np.maximum(d_inv @ a_hat @ d_inv @ x @ w.T + b, 0.0)


def _relu(x):
    return np.maximum(x, 0.0)


def _mlp2(x, p: LayerParams):
    h = _relu(x @ p.lin1_w.T.astype(np.float64) + p.lin1_b.astype(np.float64))
    return h @ p.lin2_w.T.astype(np.float64) + p.lin2_b.astype(np.float64)


def _in_lists(graph: Graph) -> list[list[int]]:
    """Incoming (edge_index, src) pairs per node, in COO order."""
    incoming = [[] for _ in range(graph.num_nodes)]
    for k in range(graph.num_edges):
        src, dst = int(graph.coo[k, 0]), int(graph.coo[k, 1])
        incoming[dst].append((k, src))
    return incoming


def _message(graph: Graph, x, p: LayerParams, edge_idx: int, src: int):
    m = x[src].copy()
    if p.edge_enc is not None and graph.edge_features is not None:
        m = m + p.edge_enc.astype(np.float64) @ graph.edge_features[edge_idx].astype(np.float64)
    return _relu(m)


def _layer(graph: Graph, cfg: ModelConfig, layer: int, x: np.ndarray,
           incoming, in_deg) -> np.ndarray:
    p = cfg.layers[layer]
    n = graph.num_nodes
    if cfg.model_kind == "gin":
        out = np.zeros((n, p.lin1_w.shape[1]), dtype=np.float64)
        for i in range(n):
            acc = np.zeros(x.shape[1], dtype=np.float64)
            for k, j in incoming[i]:
                acc += _message(graph, x, p, k, j)
            out[i] = (1.0 + p.epsilon) * x[i] + acc
        return _mlp2(out, p)

    if cfg.model_kind == "gcn":
        w = p.lin1_w.astype(np.float64)
        b = 0.0 if p.lin1_b is None else p.lin1_b.astype(np.float64)
        z = x @ w.T + b
        out = np.zeros_like(z)
        for i in range(n):
            acc = z[i] / (in_deg[i] + 1.0)
            for _, j in incoming[i]:
                acc = acc + z[j] / math.sqrt((in_deg[i] + 1.0) * (in_deg[j] + 1.0))
            out[i] = acc
        return _relu(out)

    if cfg.model_kind == "gat":
        h, fh = cfg.gat_heads, cfg.gat_head_dim
        out = np.zeros((n, h * fh), dtype=np.float64)
        for i in range(n):
            for head in range(h):
                w = p.gat_w[head].astype(np.float64)
                zi = w @ x[i]
                members = [i] + [j for _, j in incoming[i]]
                zs = [w @ x[j] for j in members]
                scores = []
                for zj in zs:
                    raw = float(p.gat_a_src[head].astype(np.float64) @ zi
                                + p.gat_a_dst[head].astype(np.float64) @ zj)
                    scores.append(raw if raw > 0 else cfg.gat_leaky_slope * raw)
                top = max(scores)
                weights = [math.exp(s - top) for s in scores]
                total = sum(weights)
                mix = np.zeros(fh, dtype=np.float64)
                for wgt, zj in zip(weights, zs):
                    mix += (wgt / total) * zj
                out[i, head * fh:(head + 1) * fh] = mix
        return out

    if cfg.model_kind == "pna":
        d = x.shape[1]
        delta = cfg.pna_avg_log_degree
        combined = np.zeros((n, 12 * d), dtype=np.float64)
        for i in range(n):
            rows = [_message(graph, x, p, k, j) for k, j in incoming[i]]
            deg = len(rows)
            if deg == 0:
                continue
            stack = np.stack(rows)
            mean = stack.mean(axis=0)
            var = np.maximum((stack * stack).mean(axis=0) - mean * mean, 0.0)
            std = np.sqrt(var + 1e-5)
            aggs = [mean, std, stack.max(axis=0), stack.min(axis=0)]
            log_deg = math.log(deg + 1.0)
            scalers = [1.0, log_deg / delta, delta / log_deg]
            combined[i] = np.concatenate([s * a for s in scalers for a in aggs])
        return _relu(combined @ p.lin1_w.T.astype(np.float64) + p.lin1_b.astype(np.float64))

    if cfg.model_kind == "dgn":
        d = x.shape[1]
        field = graph.node_field.astype(np.float64)
        combined = np.zeros((n, 2 * d), dtype=np.float64)
        for i in range(n):
            if not incoming[i]:
                continue
            norm = sum(abs(field[j] - field[i]) for _, j in incoming[i]) + 1e-8
            mean = np.zeros(d, dtype=np.float64)
            dirsum = np.zeros(d, dtype=np.float64)
            wsum = 0.0
            for _, j in incoming[i]:
                w = (field[j] - field[i]) / norm
                mean += x[j]
                dirsum += w * x[j]
                wsum += w
            mean /= len(incoming[i])
            combined[i] = np.concatenate([mean, np.abs(dirsum - x[i] * wsum)])
        return _relu(combined @ p.lin1_w.T.astype(np.float64) + p.lin1_b.astype(np.float64))

    raise ValueError(f"unknown model kind {cfg.model_kind!r}")


def brute_force_embeddings(graph: Graph, cfg: ModelConfig) -> np.ndarray:
    incoming = _in_lists(graph)
    in_deg = [len(lst) for lst in incoming]
    x = graph.node_features.astype(np.float64)
    real = graph.num_real_nodes
    vn = np.zeros(cfg.f_in, dtype=np.float64) if cfg.virtual_node else None
    for layer in range(cfg.num_layers):
        p = cfg.layers[layer]
        if cfg.virtual_node:
            x = x.copy()
            for i in range(real):
                x[i] = x[i] + vn
            pooled = vn.copy()
            for i in range(real):
                pooled = pooled + x[i]
            hidden = _relu(p.vn_w1.astype(np.float64) @ pooled + p.vn_b1.astype(np.float64))
            vn = p.vn_w2.astype(np.float64) @ hidden + p.vn_b2.astype(np.float64)
        x = _layer(graph, cfg, layer, x, incoming, in_deg)
    return x


def brute_force_mp_oracle(graph: Graph, cfg: ModelConfig) -> np.ndarray:
    """Full model by direct per-edge loops; returns the float64 prediction."""
    x = brute_force_embeddings(graph, cfg)
    pooled = x[:graph.num_real_nodes].mean(axis=0)
    out = pooled
    for k, (w, b) in enumerate(cfg.head):
        out = w.astype(np.float64) @ out + b.astype(np.float64)
        if k + 1 < len(cfg.head):
            out = _relu(out)
    return out
