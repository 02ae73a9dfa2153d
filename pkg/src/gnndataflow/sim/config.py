"""Simulator configuration and report types."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class PipelineStrategy(str, enum.Enum):
    """How node transformation and message passing overlap.

    NON_PIPELINED runs each pass's NT to completion before its MP.
    FIXED_PIPELINE overlaps MP of node k with NT of node k+1 through a
    depth-1 handoff. BASELINE_DATAFLOW widens that handoff to a bounded node
    queue but still hands over whole embeddings. MULTI_QUEUE streams
    embedding beats through per-bank queues into parallel MP units.
    """

    NON_PIPELINED = "nonpipelined"
    FIXED_PIPELINE = "fixed"
    BASELINE_DATAFLOW = "baseline"
    MULTI_QUEUE = "multiqueue"


STRATEGY_ALIASES = {s.value: s for s in PipelineStrategy}


@dataclass
class ParallelismConfig:
    """The four parallelism degrees plus queue depth and strategy.

    p_node / p_edge control unit counts for the multi-queue strategy only;
    the earlier strategies are single-unit by construction. queue_depth is
    counted in queue entries: beats for the multi-queue adapter queues, whole
    node embeddings for the fixed/baseline node queue.
    """

    p_node: int = 2
    p_edge: int = 4
    p_apply: int = 1
    p_scatter: int = 1
    queue_depth: int = 16
    strategy: PipelineStrategy = PipelineStrategy.MULTI_QUEUE
    layer_overhead: int = 0

    def __post_init__(self):
        if isinstance(self.strategy, str):
            self.strategy = STRATEGY_ALIASES[self.strategy]
        for name in ("p_node", "p_edge", "p_apply", "p_scatter", "queue_depth"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.layer_overhead < 0:
            raise ValueError("layer_overhead must be >= 0")

    @property
    def nt_units(self) -> int:
        return self.p_node if self.strategy is PipelineStrategy.MULTI_QUEUE else 1

    @property
    def mp_units(self) -> int:
        return self.p_edge if self.strategy is PipelineStrategy.MULTI_QUEUE else 1


@dataclass
class Beat:
    """One queue entry: a contiguous element range of one node's embedding."""

    node: int
    lo: int
    hi: int
    payload: np.ndarray | None = None


def iter_beats(dim: int, width: int) -> list[tuple[int, int]]:
    """Element ranges covering [0, dim) in chunks of at most ``width``."""
    return [(lo, min(lo + width, dim)) for lo in range(0, dim, width)]


class MessageBufferPair:
    """Two N x F_msg banks alternating read/write roles each layer.

    This is the only aggregation storage the simulator uses, so its size is
    the instrumented peak message memory: always 2 * N * F_msg scalars,
    independent of the edge count.
    """

    def __init__(self, num_nodes: int, width: int):
        self.num_nodes = num_nodes
        self.width = width
        self._banks = [
            np.zeros((num_nodes, width), dtype=np.float32),
            np.zeros((num_nodes, width), dtype=np.float32),
        ]
        self._write = 0

    @property
    def write(self) -> np.ndarray:
        return self._banks[self._write]

    @property
    def read(self) -> np.ndarray:
        return self._banks[1 - self._write]

    def swap(self) -> None:
        self._write = 1 - self._write

    @property
    def peak_scalars(self) -> int:
        return 2 * self.num_nodes * self.width


@dataclass
class SimReport:
    """Cycle counts, per-unit utilization, queue stats, and the prediction."""

    total_cycles: int
    nt_busy: list[int]
    nt_idle: list[int]
    nt_stall: list[int]
    mp_busy: list[int]
    mp_idle: list[int]
    queue_max_occupancy: list[int]
    queue_full_stall_cycles: list[int]
    per_bank_edge_counts: list[int]
    imbalance_pct: float | None
    prediction: np.ndarray
    peak_message_scalars: int
    strategy: str
    p_node: int
    p_edge: int
    p_apply: int
    p_scatter: int
    queue_depth: int
    per_pass_cycles: list[int] = field(default_factory=list)

    def to_kv_lines(self) -> list[str]:
        lines = [
            f"total_cycles = {self.total_cycles}",
            f"strategy = {self.strategy}",
            f"p_node = {self.p_node}",
            f"p_edge = {self.p_edge}",
            f"p_apply = {self.p_apply}",
            f"p_scatter = {self.p_scatter}",
            f"queue_depth = {self.queue_depth}",
            f"peak_message_scalars = {self.peak_message_scalars}",
        ]
        for k, (busy, idle, stall) in enumerate(zip(self.nt_busy, self.nt_idle, self.nt_stall)):
            lines.append(f"nt{k}.busy = {busy}")
            lines.append(f"nt{k}.idle = {idle}")
            lines.append(f"nt{k}.stall = {stall}")
        for q, (busy, idle) in enumerate(zip(self.mp_busy, self.mp_idle)):
            lines.append(f"mp{q}.busy = {busy}")
            lines.append(f"mp{q}.idle = {idle}")
        for q, (occ, stall) in enumerate(
            zip(self.queue_max_occupancy, self.queue_full_stall_cycles)
        ):
            lines.append(f"queue{q}.max_occupancy = {occ}")
            lines.append(f"queue{q}.full_stall_cycles = {stall}")
        for q, cnt in enumerate(self.per_bank_edge_counts):
            lines.append(f"bank{q}.edges = {cnt}")
        if self.imbalance_pct is not None:
            lines.append(f"imbalance_pct = {self.imbalance_pct:.6f}")
        lines.append("per_pass_cycles = " + ",".join(str(c) for c in self.per_pass_cycles))
        lines.append(
            "prediction = " + ",".join(f"{v:.8e}" for v in np.asarray(self.prediction).ravel())
        )
        return lines
