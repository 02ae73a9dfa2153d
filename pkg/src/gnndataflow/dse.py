"""Design-space exploration: parallelism sweeps, strategy ablation, bottlenecks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .graph import Graph
from .models import ModelConfig
from .sim.config import ParallelismConfig, PipelineStrategy, SimReport
from .sim.simulate import simulate

SWEEP_CSV_HEADER = "p_node,p_edge,p_apply,p_scatter,strategy,cycles_geomean,speedup,bottleneck"

QUEUE_BOUND_STALL_FRACTION = 0.10


def geomean(values: list[float]) -> float:
    return math.exp(sum(math.log(v) for v in values) / len(values))


@dataclass
class SweepSpec:
    p_node_values: list[int]
    p_edge_values: list[int]
    p_apply_values: list[int]
    p_scatter_values: list[int]
    graphs: list[Graph]
    model: ModelConfig
    strategies: list[PipelineStrategy] = field(
        default_factory=lambda: [PipelineStrategy.MULTI_QUEUE]
    )
    queue_depth: int = 16
    baseline: tuple[int, int, int, int, PipelineStrategy] = (
        1, 1, 1, 1, PipelineStrategy.MULTI_QUEUE,
    )

    def validate(self) -> None:
        for name in ("p_node_values", "p_edge_values", "p_apply_values", "p_scatter_values"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        if not self.graphs:
            raise ValueError("graph set must be non-empty")
        bn, be, ba, bs, bstrat = self.baseline
        if (
            bn not in self.p_node_values
            or be not in self.p_edge_values
            or ba not in self.p_apply_values
            or bs not in self.p_scatter_values
            or bstrat not in self.strategies
        ):
            raise ValueError("baseline configuration must be part of the sweep grid")


@dataclass
class SweepRow:
    p_node: int
    p_edge: int
    p_apply: int
    p_scatter: int
    strategy: str
    cycles_geomean: float
    cycles_mean: float
    speedup: float
    bottleneck: str
    failed: bool = False

    def csv(self) -> str:
        return (
            f"{self.p_node},{self.p_edge},{self.p_apply},{self.p_scatter},"
            f"{self.strategy},{self.cycles_geomean:.3f},{self.speedup:.4f},{self.bottleneck}"
        )


@dataclass
class SweepResult:
    rows: list[SweepRow]

    def csv_lines(self) -> list[str]:
        return [SWEEP_CSV_HEADER] + [row.csv() for row in self.rows]

    def best(self) -> SweepRow:
        return min((r for r in self.rows if not r.failed), key=lambda r: r.cycles_geomean)


def bottleneck_report(report: SimReport) -> tuple[str, list[str]]:
    """Classify a run as NT-, MP-, or queue-bound, with a utilization table.

    Queue-bound takes precedence when any queue's full-stall fraction exceeds
    the threshold; otherwise the side with the smaller minimum idle fraction
    is the bottleneck (ties go to NT, the reader of aggregated messages).
    """
    total = max(report.total_cycles, 1)
    nt_idle = [idle / total for idle in report.nt_idle]
    mp_idle = [idle / total for idle in report.mp_idle]
    stall = [s / total for s in report.queue_full_stall_cycles]
    tag = _bottleneck_tag(nt_idle, mp_idle, stall)
    table = ["unit,idle_fraction"]
    table += [f"nt{k},{v:.4f}" for k, v in enumerate(nt_idle)]
    table += [f"mp{q},{v:.4f}" for q, v in enumerate(mp_idle)]
    table += [f"queue{q}.stall_fraction,{v:.4f}" for q, v in enumerate(stall)]
    return tag, table


def _bottleneck_tag(nt_idle_fracs, mp_idle_fracs, stall_fracs) -> str:
    if stall_fracs and max(stall_fracs) > QUEUE_BOUND_STALL_FRACTION:
        return "queue-bound"
    if min(nt_idle_fracs) <= min(mp_idle_fracs):
        return "NT-bound"
    return "MP-bound"


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Simulate every grid point over the graph set; geomean-aggregate cycles.

    Rows come out in lexicographic parameter order regardless of evaluation
    order; the baseline row's speedup is exactly 1.0.
    """
    spec.validate()
    grid = sorted(
        itertools.product(
            spec.p_node_values,
            spec.p_edge_values,
            spec.p_apply_values,
            spec.p_scatter_values,
            [s.value for s in spec.strategies],
        )
    )
    rows: list[SweepRow] = []
    baseline_gm: float | None = None
    bn, be, ba, bs, bstrat = spec.baseline
    results: dict[tuple, tuple[float, float, str, bool]] = {}
    for pn, pe, pa, ps, strat in grid:
        pcfg = ParallelismConfig(
            p_node=pn, p_edge=pe, p_apply=pa, p_scatter=ps,
            queue_depth=spec.queue_depth, strategy=strat,
        )
        cycles: list[float] = []
        nt_idle: list[float] = []
        mp_idle: list[float] = []
        stalls: list[float] = []
        failed = False
        try:
            for graph in spec.graphs:
                rep = simulate(graph, spec.model, pcfg)
                total = max(rep.total_cycles, 1)
                cycles.append(float(max(rep.total_cycles, 1)))
                nt_idle.append(min(i / total for i in rep.nt_idle))
                mp_idle.append(min(i / total for i in rep.mp_idle))
                stalls.append(max((s / total for s in rep.queue_full_stall_cycles), default=0.0))
        except (ValueError, RuntimeError):
            failed = True
        if failed:
            results[(pn, pe, pa, ps, strat)] = (math.inf, math.inf, "failed", True)
            continue
        gm = geomean(cycles)
        mean = sum(cycles) / len(cycles)
        tag = _bottleneck_tag([min(nt_idle)], [min(mp_idle)], [max(stalls)])
        results[(pn, pe, pa, ps, strat)] = (gm, mean, tag, False)
        if (pn, pe, pa, ps, strat) == (bn, be, ba, bs, bstrat.value):
            baseline_gm = gm
    if baseline_gm is None:
        raise ValueError("baseline configuration was not evaluated")
    for key in grid:
        gm, mean, tag, failed = results[key]
        pn, pe, pa, ps, strat = key
        speedup = 1.0 if key == (bn, be, ba, bs, bstrat.value) else (
            0.0 if failed else baseline_gm / gm
        )
        rows.append(SweepRow(pn, pe, pa, ps, strat, gm, mean, speedup, tag, failed))
    return SweepResult(rows)


ABLATION_STAGES: list[tuple[str, dict]] = [
    ("nonpipelined", dict(strategy=PipelineStrategy.NON_PIPELINED,
                          p_apply=1, p_scatter=1)),
    ("fixed", dict(strategy=PipelineStrategy.FIXED_PIPELINE,
                   p_apply=1, p_scatter=1)),
    ("baseline", dict(strategy=PipelineStrategy.BASELINE_DATAFLOW,
                      p_apply=1, p_scatter=1)),
    ("multiqueue-1-1", dict(strategy=PipelineStrategy.MULTI_QUEUE,
                            p_node=1, p_edge=1, p_apply=1, p_scatter=1)),
    ("multiqueue-1-2", dict(strategy=PipelineStrategy.MULTI_QUEUE,
                            p_node=1, p_edge=1, p_apply=1, p_scatter=2)),
    ("multiqueue-2-2", dict(strategy=PipelineStrategy.MULTI_QUEUE,
                            p_node=1, p_edge=1, p_apply=2, p_scatter=2)),
    ("multiqueue-full", dict(strategy=PipelineStrategy.MULTI_QUEUE)),
]


@dataclass
class AblationRow:
    label: str
    cycles_geomean: float
    vs_previous: float
    vs_nonpipelined: float


def ablation(graphs: list[Graph], model: ModelConfig,
             base: ParallelismConfig | None = None) -> list[AblationRow]:
    """Cycles per pipelining stage, geomean over the graph set, plus ratios.

    Stage labels multiqueue-x-y fix p_apply=x, p_scatter=y on a single
    NT/MP unit pair; multiqueue-full uses the supplied (or default) unit
    counts and beam widths.
    """
    base = base or ParallelismConfig()
    rows: list[AblationRow] = []
    first = prev = None
    for label, overrides in ABLATION_STAGES:
        kwargs = dict(
            p_node=base.p_node, p_edge=base.p_edge, p_apply=base.p_apply,
            p_scatter=base.p_scatter, queue_depth=base.queue_depth,
        )
        kwargs.update(overrides)
        pcfg = ParallelismConfig(**kwargs)
        gm = geomean([float(simulate(g, model, pcfg).total_cycles) for g in graphs])
        rows.append(AblationRow(
            label,
            gm,
            (prev / gm) if prev is not None else 1.0,
            (first / gm) if first is not None else 1.0,
        ))
        prev = gm
        if first is None:
            first = gm
    return rows
