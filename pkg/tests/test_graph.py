import numpy as np
import pytest

from gnndataflow.graph import (
    Graph,
    GraphError,
    build_csc,
    build_csr,
    degrees,
    gen_synthetic,
    load_graph,
    partition_edges,
    save_graph,
    workload_imbalance,
)


def make_graph(n, coo, f_in=2, **kw):
    coo = np.array(coo, dtype=np.int32).reshape(-1, 2)
    feats = np.arange(n * f_in, dtype=np.float32).reshape(n, f_in)
    return Graph(n, coo.shape[0], coo, feats, **kw)


FIG4_EDGES = [(0, 1), (1, 2), (1, 3), (2, 1)]


class TestLoadGraph:
    def test_minimal_text_file(self):
        g = load_graph("2 1 1 0\n0 1\n0.5\n1.5\n", "text")
        assert g.num_nodes == 2 and g.num_edges == 1
        assert g.coo.tolist() == [[0, 1]]
        assert g.node_features.tolist() == [[0.5], [1.5]]

    def test_edge_index_out_of_range(self):
        with pytest.raises(GraphError, match="line 2.*out of range"):
            load_graph("3 1 1 0\n5 0\n0\n0\n0\n", "text")

    def test_bad_header(self):
        with pytest.raises(GraphError, match="line 1"):
            load_graph("2 1\n", "text")

    def test_feature_count_mismatch(self):
        with pytest.raises(GraphError, match="line 3"):
            load_graph("2 1 2 0\n0 1\n0.5\n1.5 2.0\n", "text")

    def test_roundtrip_random_graphs(self):
        for seed in range(100):
            topo = ["uniform", "power-law", "with-virtual-node"][seed % 3]
            g = gen_synthetic(1 + seed % 17, 2.5, topo, (3, seed % 3), seed=seed,
                              with_field=seed % 2 == 0)
            for fmt in ("text", "binary"):
                g2 = load_graph(save_graph(g, fmt), fmt)
                assert g2.num_nodes == g.num_nodes and g2.num_edges == g.num_edges
                assert np.array_equal(g2.coo, g.coo)
                assert np.array_equal(g2.node_features, g.node_features)
                if g.edge_features is not None:
                    assert np.array_equal(g2.edge_features, g.edge_features)
                if g.node_field is not None:
                    assert np.array_equal(g2.node_field, g.node_field)
                assert g2.has_virtual_node == g.has_virtual_node

    def test_load_preserves_edge_order_bytewise(self):
        g = gen_synthetic(12, 3.0, "uniform", (2, 1), seed=5)
        blob = save_graph(g, "text")
        assert save_graph(load_graph(blob, "text"), "text") == blob

    def test_edgelist_format(self):
        g = load_graph("# comment\n0 1\n2 0\n1 2\n", "edgelist")
        assert g.num_nodes == 3 and g.num_edges == 3
        assert g.coo.tolist() == [[0, 1], [2, 0], [1, 2]]


class TestViews:
    def test_csr_hand_expansion(self):
        g = make_graph(4, FIG4_EDGES)
        csr = build_csr(g)
        assert csr.row_ptr.tolist() == [0, 1, 3, 4, 4]
        assert csr.col_idx.tolist() == [1, 2, 3, 1]

    def test_empty_graph(self):
        g = make_graph(3, [])
        assert build_csr(g).row_ptr.tolist() == [0, 0, 0, 0]

    def test_csc_single_edge(self):
        g = make_graph(2, [(0, 1)])
        csc = build_csc(g)
        assert csc.row(1).tolist() == [0]
        assert csc.row(0).tolist() == []

    def test_views_reproduce_coo_multiset(self):
        for seed in range(30):
            g = gen_synthetic(2 + seed, 3.0, "uniform", (2, 0), seed=seed)
            csr, csc = build_csr(g), build_csc(g)
            original = sorted(map(tuple, g.coo.tolist()))
            from_csr = sorted(
                (int(g.coo[r, 0]), int(g.coo[r, 1])) for r in csr.edge_perm
            )
            from_csc = sorted(
                (int(csc.col_idx[k]), int(g.coo[csc.edge_perm[k], 1]))
                for k in range(g.num_edges)
            )
            assert from_csr == original
            assert from_csc == original

    def test_csr_stable_within_row(self):
        g = make_graph(4, [(1, 3), (1, 0), (1, 2)])
        csr = build_csr(g)
        assert csr.row(1).tolist() == [3, 0, 2]  # COO order kept


class TestDegrees:
    def test_in_degrees_hand_case(self):
        g = make_graph(4, FIG4_EDGES)
        assert degrees(g, "in").tolist() == [0, 2, 1, 1]

    def test_ring_in_degrees(self):
        g = make_graph(4, [(i, (i + 1) % 4) for i in range(4)])
        assert degrees(g, "in").tolist() == [1, 1, 1, 1]

    def test_degree_sums_equal_edge_count(self):
        for seed in range(20):
            g = gen_synthetic(3 + seed, 2.0, "uniform", (2, 0), seed=seed)
            assert int(degrees(g, "in").sum()) == g.num_edges
            assert int(degrees(g, "out").sum()) == g.num_edges


class TestPartition:
    def test_fig4_blocks(self):
        g = make_graph(6, FIG4_EDGES)
        a = partition_edges(g, 2)
        assert a.block_size == 3
        assert [a.bank_of_dst(v) for v in range(6)] == [0, 0, 0, 1, 1, 1]
        assert a.per_bank_edge_count.tolist() == [3, 1]

    def test_single_bank(self):
        g = make_graph(6, FIG4_EDGES)
        a = partition_edges(g, 1)
        assert a.per_bank_edge_count.tolist() == [4]

    def test_every_edge_lands_in_its_dst_bank(self):
        for seed in range(20):
            g = gen_synthetic(5 + seed, 3.0, "uniform", (2, 0), seed=seed)
            for p in (2, 3, 5):
                a = partition_edges(g, p)
                counts = np.zeros(p, dtype=int)
                for _, dst in g.coo:
                    counts[a.bank_of_dst(int(dst))] += 1
                assert counts.tolist() == a.per_bank_edge_count.tolist()


class TestImbalance:
    def test_all_edges_to_one_node(self):
        g = make_graph(6, [(i, 0) for i in range(1, 6)])
        assert workload_imbalance(g, 2) == 100.0

    def test_perfectly_balanced(self):
        g = make_graph(8, [(i, (i + 1) % 8) for i in range(8)])
        for p in (2, 4, 8):
            assert workload_imbalance(g, p) == 0.0

    def test_empty_graph_is_undefined(self):
        g = make_graph(4, [])
        with pytest.raises(ValueError, match="undefined"):
            workload_imbalance(g, 2)

    def test_range_and_zero_iff_equal(self):
        for seed in range(20):
            g = gen_synthetic(6 + seed, 3.0, "uniform", (2, 0), seed=seed)
            if g.num_edges == 0:
                continue
            for p in (2, 4):
                v = workload_imbalance(g, p)
                assert 0.0 <= v <= 100.0
                counts = partition_edges(g, p).per_bank_edge_count
                assert (v == 0.0) == (counts.max() == counts.min())

    def test_moving_edge_from_min_to_max_bank_increases(self):
        from gnndataflow.graph import _imbalance_pct

        rng = np.random.default_rng(0)
        for _ in range(50):
            counts = rng.integers(1, 30, size=rng.integers(2, 8))
            before = _imbalance_pct(counts, int(counts.sum()))
            moved = counts.copy()
            moved[int(np.argmin(counts))] -= 1
            moved[int(np.argmax(counts))] += 1
            after = _imbalance_pct(moved, int(moved.sum()))
            assert after > before


class TestGenSynthetic:
    def test_deterministic(self):
        a = gen_synthetic(12, 3.0, "power-law", (4, 2), seed=9, with_field=True)
        b = gen_synthetic(12, 3.0, "power-law", (4, 2), seed=9, with_field=True)
        assert np.array_equal(a.coo, b.coo)
        assert np.array_equal(a.node_features, b.node_features)
        assert np.array_equal(a.edge_features, b.edge_features)
        assert np.array_equal(a.node_field, b.node_field)

    def test_virtual_node_degree(self):
        g = gen_synthetic(5, 1.0, "with-virtual-node", (2, 0), seed=1)
        assert g.has_virtual_node
        assert int(degrees(g, "in")[4]) == 4
        assert int(degrees(g, "out")[4]) == 4

    def test_power_law_skew(self):
        g = gen_synthetic(256, 4.0, "power-law", (2, 0), seed=3)
        ind = degrees(g, "in")
        assert ind.max() > 3 * ind.mean()

    def test_features_in_range(self):
        g = gen_synthetic(20, 2.0, "uniform", (3, 2), seed=2)
        assert float(np.abs(g.node_features).max()) <= 1.0
        assert float(np.abs(g.edge_features).max()) <= 1.0

    def test_graphs_are_readonly(self):
        g = gen_synthetic(5, 2.0, "uniform", (2, 0), seed=0)
        with pytest.raises(ValueError):
            g.coo[0, 0] = 3
