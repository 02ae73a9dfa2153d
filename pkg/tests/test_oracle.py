import numpy as np

from gnndataflow.graph import Graph, gen_synthetic
from gnndataflow.kernels import EmbeddingBuffer, gcn_layer, run_model
from gnndataflow.models import LayerParams, random_model
from gnndataflow.oracle import DenseGraph, brute_force_mp_oracle, dense_gcn_oracle


def test_dense_gcn_self_loops_only_is_relu():
    x = np.array([[1.0, -2.0], [-0.5, 3.0]], dtype=np.float64)
    dense = DenseGraph(np.zeros((2, 2)), x)
    p = LayerParams(lin1_w=np.eye(2, dtype=np.float32))
    assert np.allclose(dense_gcn_oracle(dense, p), np.maximum(x, 0.0))


def test_dense_gcn_single_node():
    dense = DenseGraph(np.zeros((1, 1)), np.array([[2.0, -1.0]]))
    p = LayerParams(lin1_w=np.array([[1.0, 1.0]], dtype=np.float32))
    assert dense_gcn_oracle(dense, p).tolist() == [[1.0]]


def test_dense_gcn_matches_engine_layer():
    for seed in range(15):
        g = gen_synthetic(12, 3.0, "uniform", (5, 0), seed=seed)
        cfg = random_model("gcn", f_in=5, edge_dim=0, seed=seed,
                           num_layers=1, hidden_dim=8)
        p = cfg.layers[0]
        got = gcn_layer(g, EmbeddingBuffer(g.node_features), p).data
        want = dense_gcn_oracle(DenseGraph.from_graph(g), p)
        assert np.abs(got - want).max() < 1e-4


def test_brute_force_gin_two_node_hand_case():
    feats = np.array([[0.25, 0.5], [1.0, 2.0]], dtype=np.float32)
    g = Graph(2, 1, np.array([[1, 0]], dtype=np.int32), feats)
    eye = np.eye(2, dtype=np.float32)
    zero = np.zeros(2, dtype=np.float32)
    cfg = random_model("gin", f_in=2, edge_dim=0, seed=0, num_layers=1, hidden_dim=2)
    cfg.layers[0] = LayerParams(lin1_w=eye, lin1_b=zero, lin2_w=eye, lin2_b=zero,
                                epsilon=0.0)
    cfg.head = [(eye[:1], zero[:1])]
    cfg.head_dims = (1,)
    got = brute_force_mp_oracle(g, cfg)
    # x0' = x0 + relu(x1) = [1.25, 2.5]; x1' = x1; pooled mean = [1.125, 2.25]
    assert got == [1.125]


def test_brute_force_empty_graph_is_pure_self_transform():
    g = gen_synthetic(5, 0.0, "uniform", (4, 0), seed=1)
    assert g.num_edges == 0
    for kind in ("gcn", "gin", "gat"):
        cfg = random_model(kind, f_in=4, edge_dim=0, seed=2, num_layers=2, hidden_dim=8)
        got = run_model(g, cfg)
        want = brute_force_mp_oracle(g, cfg)
        assert np.abs(got - want).max() < 1e-5


def test_oracle_module_does_not_import_kernels():
    import ast

    import gnndataflow.oracle as oracle_mod

    with open(oracle_mod.__file__) as fh:
        tree = ast.parse(fh.read())
    imported = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            imported.update(alias.name for alias in node.names)
        elif isinstance(node, ast.ImportFrom):
            imported.add(node.module or "")
    assert not any("kernels" in name or "sim" in name for name in imported)
