"""Command-line front end.

Every command resolves its parameters into a RunManifest (command, resolved
flags, input-file digests, tool version, seed) that is embedded in the
report it writes, so two runs with equal manifests produce byte-identical
outputs. Exit codes: 0 success, 1 validation error, 2 verification mismatch.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys

import numpy as np

from . import __version__
from .dse import SweepSpec, ablation, bottleneck_report, run_sweep
from .graph import (
    Graph,
    GraphError,
    degrees,
    gen_synthetic,
    load_graph_file,
    save_graph_file,
    workload_imbalance,
)
from .kernels import run_model
from .models import default_config, load_weights_file, random_model, save_weights
from .oracle import DenseGraph, brute_force_mp_oracle, dense_gcn_oracle
from .sim.config import ParallelismConfig, PipelineStrategy
from .sim.simulate import simulate

MODEL_CHOICES = ("gcn", "gin", "gin-vn", "gat", "pna", "dgn")
STRATEGY_CHOICES = tuple(s.value for s in PipelineStrategy)


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on flag errors, per the CLI contract
        raise CliError(f"{self.prog}: {message}")


class RunManifest:
    def __init__(self, command: str, params: dict, seed=None):
        self.command = command
        self.params = dict(params)
        self.seed = seed
        self.digests: dict[str, str] = {}

    def add_file(self, label: str, path: str) -> None:
        with open(path, "rb") as fh:
            self.digests[label] = hashlib.sha256(fh.read()).hexdigest()[:16]

    def lines(self) -> list[str]:
        out = [
            f"# manifest: command = {self.command}",
            f"# manifest: version = {__version__}",
        ]
        if self.seed is not None:
            out.append(f"# manifest: seed = {self.seed}")
        for key in sorted(self.params):
            out.append(f"# manifest: {key} = {self.params[key]}")
        for label in sorted(self.digests):
            out.append(f"# manifest: digest.{label} = {self.digests[label]}")
        return out


def _emit(lines: list[str], out_path: str | None) -> None:
    text = "\n".join(lines) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt_vec(vec: np.ndarray) -> str:
    return ",".join(f"{v:.8e}" for v in np.asarray(vec).ravel())


def _load_graph(path: str, fmt: str | None) -> Graph:
    if not os.path.exists(path):
        raise CliError(f"--graph: file not found: {path}")
    return load_graph_file(path, fmt)


def _build_model(args, graph: Graph | None, need_weights: bool = True):
    f_in = graph.feature_dim if graph is not None else args.f_in
    edge_dim = graph.edge_feature_dim if graph is not None else args.edge_dim
    if args.weights:
        cfg = default_config(args.model, f_in, edge_dim)
        if args.layers:
            cfg.num_layers = args.layers
        if args.hidden:
            cfg.hidden_dim = args.hidden
        cfg.pna_avg_log_degree = args.pna_delta
        if not os.path.exists(args.weights):
            raise CliError(f"--weights: file not found: {args.weights}")
        return load_weights_file(args.weights, cfg)
    if not need_weights and args.weights_seed is None:
        cfg = default_config(args.model, f_in, edge_dim)
        if args.layers:
            cfg.num_layers = args.layers
        if args.hidden:
            cfg.hidden_dim = args.hidden
        return cfg
    seed = args.weights_seed if args.weights_seed is not None else 0
    return random_model(
        args.model, f_in=f_in, edge_dim=edge_dim, seed=seed,
        num_layers=args.layers, hidden_dim=args.hidden,
        pna_avg_log_degree=args.pna_delta,
    )


def _add_model_flags(p: _Parser) -> None:
    p.add_argument("--model", required=True, choices=MODEL_CHOICES)
    p.add_argument("--weights", default=None, help="FGWT weight file")
    p.add_argument("--weights-seed", type=int, default=None,
                   help="derive deterministic random weights from this seed")
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--pna-delta", type=float, default=float(np.log(5.0)),
                   help="pna average log degree")


def _add_parallelism_flags(p: _Parser) -> None:
    p.add_argument("--p-node", type=int, default=2)
    p.add_argument("--p-edge", type=int, default=4)
    p.add_argument("--p-apply", type=int, default=1)
    p.add_argument("--p-scatter", type=int, default=1)
    p.add_argument("--queue-depth", type=int, default=16)
    p.add_argument("--strategy", choices=STRATEGY_CHOICES, default="multiqueue")


def _pcfg_from_args(args) -> ParallelismConfig:
    return ParallelismConfig(
        p_node=args.p_node, p_edge=args.p_edge, p_apply=args.p_apply,
        p_scatter=args.p_scatter, queue_depth=args.queue_depth,
        strategy=args.strategy,
    )


def _graph_set(args) -> tuple[list[Graph], list[tuple[str, str]]]:
    """Graphs from --graphs DIR, or a deterministic synthetic batch."""
    if args.graphs:
        if not os.path.isdir(args.graphs):
            raise CliError(f"--graphs: not a directory: {args.graphs}")
        names = sorted(
            n for n in os.listdir(args.graphs) if n.endswith((".txt", ".graph", ".bin"))
        )
        if not names:
            raise CliError(f"--graphs: no graph files in {args.graphs}")
        graphs, files = [], []
        for name in names:
            path = os.path.join(args.graphs, name)
            graphs.append(load_graph_file(path))
            files.append((name, path))
        return graphs, files
    graphs = [
        gen_synthetic(args.nodes, args.avg_degree, "uniform",
                      (args.f_in, args.edge_dim), seed=args.seed + i,
                      with_field=True)
        for i in range(args.count)
    ]
    return graphs, []


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _cmd_gen(args) -> int:
    graph = gen_synthetic(
        args.nodes, args.avg_degree, args.topology,
        (args.f_in, args.edge_dim), seed=args.seed, with_field=args.with_field,
    )
    save_graph_file(graph, args.out, args.format)
    manifest = RunManifest("gen", {
        "nodes": args.nodes, "avg_degree": args.avg_degree,
        "topology": args.topology, "f_in": args.f_in, "edge_dim": args.edge_dim,
        "with_field": args.with_field, "out": args.out,
        "format": args.format or "auto",
    }, seed=args.seed)
    manifest.add_file("out", args.out)
    _emit(manifest.lines() + [
        f"nodes = {graph.num_nodes}",
        f"edges = {graph.num_edges}",
    ], args.report)
    return 0


def _cmd_inspect(args) -> int:
    graph = _load_graph(args.graph, args.format)
    manifest = RunManifest("inspect", {"graph": args.graph})
    manifest.add_file("graph", args.graph)
    ind = degrees(graph, "in")
    outd = degrees(graph, "out")
    lines = manifest.lines() + [
        f"nodes = {graph.num_nodes}",
        f"edges = {graph.num_edges}",
        f"feature_dim = {graph.feature_dim}",
        f"edge_feature_dim = {graph.edge_feature_dim}",
        f"has_virtual_node = {graph.has_virtual_node}",
        f"has_node_field = {graph.node_field is not None}",
        f"in_degree.max = {int(ind.max())}",
        f"in_degree.mean = {float(ind.mean()):.4f}",
        f"out_degree.max = {int(outd.max())}",
        f"out_degree.mean = {float(outd.mean()):.4f}",
    ]
    _emit(lines, args.out)
    return 0


def _cmd_gen_weights(args) -> int:
    cfg = random_model(
        args.model, f_in=args.f_in, edge_dim=args.edge_dim, seed=args.seed,
        num_layers=args.layers, hidden_dim=args.hidden,
        pna_avg_log_degree=args.pna_delta,
    )
    with open(args.out, "wb") as fh:
        fh.write(save_weights(cfg))
    manifest = RunManifest("gen-weights", {
        "model": args.model, "f_in": args.f_in, "edge_dim": args.edge_dim,
        "layers": cfg.num_layers, "hidden": cfg.hidden_dim, "out": args.out,
    }, seed=args.seed)
    manifest.add_file("out", args.out)
    _emit(manifest.lines(), args.report)
    return 0


def _cmd_infer(args) -> int:
    graph = _load_graph(args.graph, args.format)
    cfg = _build_model(args, graph)
    pred = run_model(graph, cfg)
    manifest = RunManifest("infer", {
        "graph": args.graph, "model": cfg.describe(),
        "weights": args.weights or f"seed:{args.weights_seed or 0}",
    }, seed=args.weights_seed)
    manifest.add_file("graph", args.graph)
    if args.weights:
        manifest.add_file("weights", args.weights)
    _emit(manifest.lines() + [f"prediction = {_fmt_vec(pred)}"], args.out)
    return 0


def _cmd_verify(args) -> int:
    if args.graphs:
        graphs, _ = _graph_set(args)
    else:
        graphs = [
            gen_synthetic(
                int(4 + (i * 7) % 28), 4.0, "uniform",
                (args.f_in, args.edge_dim), seed=args.seed + i, with_field=True,
            )
            for i in range(args.trials)
        ]
    manifest = RunManifest("verify", {
        "model": args.model, "trials": len(graphs), "tol": args.tol,
    }, seed=args.seed)
    lines = manifest.lines()
    worst = 0.0
    failures = 0
    for i, graph in enumerate(graphs):
        cfg = random_model(
            args.model, f_in=graph.feature_dim, edge_dim=graph.edge_feature_dim,
            seed=args.seed + i, num_layers=args.layers, hidden_dim=args.hidden,
            pna_avg_log_degree=args.pna_delta,
        )
        got = run_model(graph, cfg)
        want = brute_force_mp_oracle(graph, cfg)
        diff = float(np.abs(got - want).max())
        if args.model == "gcn":
            from .kernels import EmbeddingBuffer, gcn_layer

            dense = DenseGraph.from_graph(graph)
            emb = EmbeddingBuffer(graph.node_features)
            for p in cfg.layers:
                emb = gcn_layer(graph, emb, p)
                dense.features = dense_gcn_oracle(dense, p)
            diff = max(diff, float(np.abs(emb.data - dense.features).max()))
        worst = max(worst, diff)
        ok = diff <= args.tol
        failures += 0 if ok else 1
        lines.append(f"trial {i}: max_abs_diff = {diff:.3e} [{'ok' if ok else 'FAIL'}]")
    lines.append(f"worst = {worst:.3e}")
    lines.append(f"result = {'pass' if failures == 0 else 'fail'}")
    _emit(lines, args.out)
    return 0 if failures == 0 else 2


def _cmd_simulate(args) -> int:
    graph = _load_graph(args.graph, args.format)
    cfg = _build_model(args, graph)
    pcfg = _pcfg_from_args(args)
    report = simulate(graph, cfg, pcfg, trace_path=args.trace)
    manifest = RunManifest("simulate", {
        "graph": args.graph, "model": cfg.describe(),
        "weights": args.weights or f"seed:{args.weights_seed or 0}",
        "p_node": pcfg.p_node, "p_edge": pcfg.p_edge,
        "p_apply": pcfg.p_apply, "p_scatter": pcfg.p_scatter,
        "queue_depth": pcfg.queue_depth, "strategy": pcfg.strategy.value,
    }, seed=args.weights_seed)
    manifest.add_file("graph", args.graph)
    if args.weights:
        manifest.add_file("weights", args.weights)
    tag, table = bottleneck_report(report)
    _emit(manifest.lines() + report.to_kv_lines() + [f"bottleneck = {tag}"] + table,
          args.out)
    return 0


def _cmd_ablate(args) -> int:
    graphs, files = _graph_set(args)
    cfg = _build_model_for_set(args, graphs)
    rows = ablation(graphs, cfg, _pcfg_from_args(args))
    manifest = RunManifest("ablate", {
        "model": cfg.describe(), "graphs": len(graphs),
    }, seed=args.seed)
    for name, path in files:
        manifest.add_file(name, path)
    lines = manifest.lines() + ["stage,cycles_geomean,vs_previous,vs_nonpipelined"]
    for row in rows:
        lines.append(
            f"{row.label},{row.cycles_geomean:.3f},{row.vs_previous:.4f},"
            f"{row.vs_nonpipelined:.4f}"
        )
    _emit(lines, args.out)
    return 0


def _build_model_for_set(args, graphs: list[Graph]):
    f_in = graphs[0].feature_dim
    edge_dim = graphs[0].edge_feature_dim
    for g in graphs:
        if g.feature_dim != f_in or g.edge_feature_dim != edge_dim:
            raise CliError("graph set has inconsistent feature dimensions")
    seed = args.weights_seed if args.weights_seed is not None else 0
    return random_model(
        args.model, f_in=f_in, edge_dim=edge_dim, seed=seed,
        num_layers=args.layers, hidden_dim=args.hidden,
        pna_avg_log_degree=args.pna_delta,
    )


def _parse_values(text: str, flag: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v]
    except ValueError:
        raise CliError(f"{flag}: expected comma-separated integers, got {text!r}")
    if not values:
        raise CliError(f"{flag}: no values given")
    return values


def _cmd_sweep(args) -> int:
    graphs, files = _graph_set(args)
    cfg = _build_model_for_set(args, graphs)
    spec = SweepSpec(
        p_node_values=_parse_values(args.p_node_values, "--p-node-values"),
        p_edge_values=_parse_values(args.p_edge_values, "--p-edge-values"),
        p_apply_values=_parse_values(args.p_apply_values, "--p-apply-values"),
        p_scatter_values=_parse_values(args.p_scatter_values, "--p-scatter-values"),
        graphs=graphs,
        model=cfg,
        queue_depth=args.queue_depth,
    )
    result = run_sweep(spec)
    manifest = RunManifest("sweep", {
        "model": cfg.describe(), "graphs": len(graphs),
        "grid": f"{args.p_node_values}x{args.p_edge_values}"
                f"x{args.p_apply_values}x{args.p_scatter_values}",
        "queue_depth": args.queue_depth,
    }, seed=args.seed)
    for name, path in files:
        manifest.add_file(name, path)
    _emit(manifest.lines() + result.csv_lines(), args.out)
    return 0


def _cmd_imbalance(args) -> int:
    graph = _load_graph(args.graph, args.format)
    p_edges = _parse_values(args.p_edge, "--p-edge")
    manifest = RunManifest("imbalance", {"graph": args.graph, "p_edge": args.p_edge})
    manifest.add_file("graph", args.graph)
    lines = manifest.lines() + ["p_edge,imbalance_pct"]
    for pe in p_edges:
        lines.append(f"{pe},{workload_imbalance(graph, pe):.4f}")
    _emit(lines, args.out)
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="gnndataflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[], help="generate a synthetic graph file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--nodes", type=int, default=25)
    p.add_argument("--avg-degree", type=float, default=2.2)
    p.add_argument("--topology", default="uniform",
                   choices=("uniform", "power-law", "with-virtual-node"))
    p.add_argument("--f-in", type=int, default=9)
    p.add_argument("--edge-dim", type=int, default=0)
    p.add_argument("--with-field", action="store_true")
    p.add_argument("--format", choices=("text", "binary"), default=None)
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("inspect", help="summarize a graph file")
    p.add_argument("--graph", required=True)
    p.add_argument("--format", choices=("text", "binary", "edgelist"), default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_inspect)

    p = sub.add_parser("gen-weights", help="write deterministic random weights (FGWT)")
    p.add_argument("--model", required=True, choices=MODEL_CHOICES)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--f-in", type=int, default=9)
    p.add_argument("--edge-dim", type=int, default=3)
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--pna-delta", type=float, default=float(np.log(5.0)))
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_gen_weights)

    p = sub.add_parser("infer", help="run the functional engine on a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--format", choices=("text", "binary", "edgelist"), default=None)
    _add_model_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("verify", help="check the engine against the naive oracles")
    p.add_argument("--graphs", default=None, help="directory of graph files")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--f-in", type=int, default=9)
    p.add_argument("--edge-dim", type=int, default=3)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--nodes", type=int, default=24)
    p.add_argument("--avg-degree", type=float, default=4.0)
    _add_model_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("simulate", help="cycle-approximate dataflow simulation")
    p.add_argument("--graph", required=True)
    p.add_argument("--format", choices=("text", "binary", "edgelist"), default=None)
    _add_model_flags(p)
    _add_parallelism_flags(p)
    p.add_argument("--trace", default=None, help="write an event trace to this file")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_simulate)

    for name, fn in (("ablate", _cmd_ablate), ("sweep", _cmd_sweep)):
        p = sub.add_parser(name, help=f"{name} over a graph set")
        p.add_argument("--graphs", default=None, help="directory of graph files")
        p.add_argument("--count", type=int, default=8)
        p.add_argument("--nodes", type=int, default=25)
        p.add_argument("--avg-degree", type=float, default=2.2)
        p.add_argument("--f-in", type=int, default=9)
        p.add_argument("--edge-dim", type=int, default=0)
        p.add_argument("--seed", type=int, default=0)
        _add_model_flags(p)
        _add_parallelism_flags(p)
        if name == "sweep":
            p.add_argument("--p-node-values", default="1,2,4")
            p.add_argument("--p-edge-values", default="1,2,4")
            p.add_argument("--p-apply-values", default="1,2,4")
            p.add_argument("--p-scatter-values", default="1,2,4,8")
        p.add_argument("--out", default=None)
        p.set_defaults(func=fn)

    p = sub.add_parser("imbalance", help="per-bank workload imbalance table")
    p.add_argument("--graph", required=True)
    p.add_argument("--format", choices=("text", "binary", "edgelist"), default=None)
    p.add_argument("--p-edge", default="2,4,8,16,32,64")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_imbalance)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        sys.stderr.write(f"{exc}\n")
        return 1
    except (GraphError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
