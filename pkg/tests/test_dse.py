import numpy as np
import pytest

from gnndataflow.dse import (
    SWEEP_CSV_HEADER,
    SweepSpec,
    ablation,
    bottleneck_report,
    run_sweep,
)
from gnndataflow.graph import Graph, gen_synthetic
from gnndataflow.models import random_model
from gnndataflow.sim import ParallelismConfig, PipelineStrategy, simulate


def small_setup(n_graphs=2, hidden=16):
    graphs = [gen_synthetic(16, 3.0, "uniform", (5, 0), seed=i) for i in range(n_graphs)]
    cfg = random_model("gcn", f_in=5, edge_dim=0, seed=0, num_layers=2, hidden_dim=hidden)
    return graphs, cfg


class TestRunSweep:
    def test_single_cell_grid(self):
        graphs, cfg = small_setup()
        spec = SweepSpec([1], [1], [1], [1], graphs, cfg)
        result = run_sweep(spec)
        assert len(result.rows) == 1
        assert result.rows[0].speedup == 1.0

    def test_grid_size_and_order(self):
        graphs, cfg = small_setup(1)
        spec = SweepSpec([1, 2], [2, 1], [1, 2], [1, 2], graphs, cfg)
        result = run_sweep(spec)
        assert len(result.rows) == 16
        keys = [(r.p_node, r.p_edge, r.p_apply, r.p_scatter) for r in result.rows]
        assert keys == sorted(keys)

    def test_csv_header_exact(self):
        assert SWEEP_CSV_HEADER == (
            "p_node,p_edge,p_apply,p_scatter,strategy,cycles_geomean,speedup,bottleneck"
        )
        graphs, cfg = small_setup(1)
        lines = run_sweep(SweepSpec([1], [1], [1], [1], graphs, cfg)).csv_lines()
        assert lines[0] == SWEEP_CSV_HEADER
        assert lines[1].count(",") == 7

    def test_baseline_must_be_in_grid(self):
        graphs, cfg = small_setup(1)
        with pytest.raises(ValueError, match="baseline"):
            run_sweep(SweepSpec([2], [1], [1], [1], graphs, cfg))

    def test_deterministic(self):
        graphs, cfg = small_setup(1)
        spec = SweepSpec([1, 2], [1, 2], [1], [1], graphs, cfg)
        assert run_sweep(spec).csv_lines() == run_sweep(spec).csv_lines()


class TestBottleneck:
    def test_nt_bound_when_edge_units_oversized(self):
        # plenty of MP capacity and narrow NT width: NT is the limiter
        g = gen_synthetic(32, 6.0, "uniform", (6, 0), seed=3)
        cfg = random_model("gcn", f_in=6, edge_dim=0, seed=3, num_layers=2,
                           hidden_dim=32)
        rep = simulate(g, cfg, ParallelismConfig(p_node=1, p_edge=4, p_apply=1,
                                                 p_scatter=8))
        tag, table = bottleneck_report(rep)
        assert tag == "NT-bound"
        assert table[0].startswith("unit")

    def test_mp_bound_on_star_graph(self):
        coo = [(i, 0) for i in range(1, 32)] + [(0, i) for i in range(1, 32)]
        feats = np.zeros((32, 6), dtype=np.float32)
        g = Graph(32, len(coo), np.array(coo, dtype=np.int32), feats)
        cfg = random_model("gcn", f_in=6, edge_dim=0, seed=4, num_layers=2,
                           hidden_dim=16)
        rep = simulate(g, cfg, ParallelismConfig(p_node=4, p_edge=1, p_apply=8,
                                                 p_scatter=1, queue_depth=4096))
        tag, _ = bottleneck_report(rep)
        assert tag == "MP-bound"

    def test_queue_bound_reachable_with_tiny_queues(self):
        coo = [(0, i) for i in range(1, 48)]
        feats = np.zeros((48, 6), dtype=np.float32)
        g = Graph(48, len(coo), np.array(coo, dtype=np.int32), feats)
        cfg = random_model("gcn", f_in=6, edge_dim=0, seed=5, num_layers=2,
                           hidden_dim=32)
        rep = simulate(g, cfg, ParallelismConfig(p_node=4, p_edge=1, p_apply=8,
                                                 p_scatter=1, queue_depth=1))
        tag, _ = bottleneck_report(rep)
        assert tag == "queue-bound"


class TestAblation:
    def test_ratios_at_least_one_on_nontrivial_graphs(self):
        graphs = [gen_synthetic(24, 3.0, "uniform", (6, 0), seed=i) for i in range(3)]
        cfg = random_model("gcn", f_in=6, edge_dim=0, seed=6, num_layers=3,
                           hidden_dim=24)
        rows = ablation(graphs, cfg, ParallelismConfig(p_scatter=2))
        assert [r.label for r in rows][:4] == [
            "nonpipelined", "fixed", "baseline", "multiqueue-1-1",
        ]
        for row in rows[:4]:
            assert row.vs_previous >= 1.0
            assert row.vs_nonpipelined >= 1.0
        assert rows[1].vs_previous > 1.0
        assert all(rows[i].vs_nonpipelined >= rows[i - 1].vs_nonpipelined - 1e-9
                   for i in (1, 2, 3))

    def test_baseline_over_fixed_band_on_molecule_like_graphs(self):
        graphs = [gen_synthetic(25, 2.2, "uniform", (9, 0), seed=900 + i)
                  for i in range(12)]
        cfg = random_model("gcn", f_in=9, edge_dim=0, seed=9)  # 5 layers, d=100
        rows = ablation(graphs, cfg)
        by_label = {r.label: r for r in rows}
        assert 1.1 <= by_label["baseline"].vs_previous <= 2.5

    def test_single_node_graph_gives_unit_ratios(self):
        g = Graph(1, 0, np.zeros((0, 2), dtype=np.int32),
                  np.zeros((1, 5), dtype=np.float32))
        cfg = random_model("gcn", f_in=5, edge_dim=0, seed=7, num_layers=2,
                           hidden_dim=8)
        rows = ablation([g], cfg)
        for row in rows[:4]:  # unit-count stages can't help a single node either
            assert row.vs_nonpipelined == pytest.approx(1.0)
