"""Pure-Python timing engine: cycle-stepped simulation of one pipeline pass.

The schedule is value-independent, so the engine works entirely in integers:
it advances a global cycle counter and steps every unit once per cycle.
Consumers run before producers inside a cycle, which gives queues their
one-cycle push-to-pop latency while letting a slot freed by a pop be reused
by a push in the same cycle.

The compiled twin in ``_engine_cy`` implements the identical state machine;
``tests/test_engine_parity.py`` holds them bit-equal.

Pass modes:
  0  barrier        producer phase runs to completion, then the consumer
  1  node queue     serial producer, bounded node-entry queue, one consumer
                    that takes whole embeddings (the baseline dataflow)
  2  beat multiqueue  pipelined producers, per-bank beat queues, streaming
                    consumers (the multi-queue dataflow)
  3  buffer fed     no producer; per-bank bursts straight from a buffer
  4  lock step      rigid pairing: NT of node k+1 runs exactly alongside MP
                    of node k and the pair advances together (fixed pipeline)
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class PassSpec:
    mode: int
    n_banks: int = 1
    queue_cap: int = 1
    p_units: int = 1
    n_nodes: int = 0
    acc_cycles: int = 0
    out_cycles: int = 0
    node_beats: int = 0
    beat_done_cycle: list[int] = field(default_factory=list)
    route_ptr: list[int] = field(default_factory=list)
    route_bank: list[int] = field(default_factory=list)
    route_cnt: list[int] = field(default_factory=list)
    burst_ptr: list[int] = field(default_factory=list)
    burst_src: list[int] = field(default_factory=list)
    burst_cost: list[int] = field(default_factory=list)
    collect_trace: bool = False


@dataclass
class PassResult:
    cycles: int
    prod_busy: list[int]
    prod_stall: list[int]
    cons_busy: list[int]
    queue_max: list[int]
    queue_stall: list[int]
    bank_order: list[list[int]]
    trace: list[tuple]


def _node_edge_total(spec: PassSpec, node: int) -> int:
    total = 0
    for k in range(spec.route_ptr[node], spec.route_ptr[node + 1]):
        total += spec.route_cnt[k]
    return total


def run_pass(spec: PassSpec) -> PassResult:
    if spec.mode == 0:
        return _run_barrier(spec)
    if spec.mode == 1:
        return _run_node_queue(spec)
    if spec.mode == 2:
        return _run_multiqueue(spec)
    if spec.mode == 3:
        return _run_buffer_fed(spec)
    if spec.mode == 4:
        return _run_lockstep(spec)
    raise ValueError(f"unknown pass mode {spec.mode}")


def _run_lockstep(spec: PassSpec) -> PassResult:
    trace: list[tuple] = []
    n = spec.n_nodes
    per_node = spec.acc_cycles + spec.out_cycles
    t = 0
    prod_busy = 0
    prod_stall = 0
    cons_busy = 0
    queue_stall = 0
    queue_max = 0
    order: list[int] = []
    for s in range(n + 1):
        nt_time = per_node if s < n else 0
        mp_time = 0
        if s >= 1:
            edges = _node_edge_total(spec, s - 1)
            if edges > 0:
                mp_time = edges * spec.node_beats
                order.append(s - 1)
                queue_max = 1
                if spec.collect_trace:
                    trace.append((t, "mp0", "node_start", s - 1))
        if s < n and spec.collect_trace:
            trace.append((t, "nt0", "acc_start", s))
            trace.append((t + spec.acc_cycles, "nt0", "out_start", s))
        step = nt_time if nt_time > mp_time else mp_time
        prod_busy += nt_time
        cons_busy += mp_time
        if s < n and nt_time < step:
            prod_stall += step - nt_time
            queue_stall += step - nt_time
        t += step
    if spec.collect_trace:
        trace.sort(key=lambda ev: (ev[0], ev[1]))
    return PassResult(t, [prod_busy], [prod_stall], [cons_busy], [queue_max],
                      [queue_stall], [order], trace)


def _run_barrier(spec: PassSpec) -> PassResult:
    trace: list[tuple] = []
    t = 0
    prod_busy = 0
    per_node = spec.acc_cycles + spec.out_cycles
    for node in range(spec.n_nodes):
        if spec.collect_trace:
            trace.append((t, "nt0", "acc_start", node))
            trace.append((t + spec.acc_cycles, "nt0", "out_start", node))
        t += per_node
        prod_busy += per_node
    cons_busy = 0
    order: list[int] = []
    for node in range(spec.n_nodes):
        edges = _node_edge_total(spec, node)
        if edges == 0:
            continue
        cost = edges * spec.node_beats
        if spec.collect_trace:
            trace.append((t, "mp0", "node_start", node))
        order.append(node)
        t += cost
        cons_busy += cost
    return PassResult(t, [prod_busy], [0], [cons_busy], [0], [0], [order], trace)


def _run_node_queue(spec: PassSpec) -> PassResult:
    trace: list[tuple] = []
    cap = spec.queue_cap
    n = spec.n_nodes

    # producer state: phases 0=acc, 1=out, 2=push-blocked
    p_node = 0
    p_phase = 0
    p_left = spec.acc_cycles
    prod_busy = 0
    prod_stall = 0

    # queue entries: (node, cost, pushed_at)
    queue: list[tuple[int, int, int]] = []
    q_head = 0
    queue_max = 0
    queue_stall = 0

    c_left = 0
    cons_busy = 0
    order: list[int] = []

    t = 0
    watchdog = _watchdog_limit(spec)
    while True:
        prod_done = p_node >= n
        q_len = len(queue) - q_head
        if prod_done and q_len == 0 and c_left == 0:
            break
        if t > watchdog:
            raise RuntimeError("timing engine made no progress (deadlock watchdog)")

        # consumer
        if c_left > 0:
            c_left -= 1
            cons_busy += 1
        elif q_len > 0 and queue[q_head][2] < t:
            node, cost, _ = queue[q_head]
            q_head += 1
            order.append(node)
            if spec.collect_trace:
                trace.append((t, "mp0", "node_start", node))
            cons_busy += 1
            c_left = cost - 1

        # producer
        if not prod_done:
            if p_phase == 0:
                if spec.collect_trace and p_left == spec.acc_cycles:
                    trace.append((t, "nt0", "acc_start", p_node))
                p_left -= 1
                prod_busy += 1
                if p_left == 0:
                    p_phase = 1
                    p_left = spec.out_cycles
            elif p_phase == 1:
                if spec.collect_trace and p_left == spec.out_cycles:
                    trace.append((t, "nt0", "out_start", p_node))
                p_left -= 1
                prod_busy += 1
                if p_left == 0:
                    edges = _node_edge_total(spec, p_node)
                    if edges > 0:
                        cost = edges * spec.node_beats
                        if len(queue) - q_head < cap:
                            queue.append((p_node, cost, t))
                            if len(queue) - q_head > queue_max:
                                queue_max = len(queue) - q_head
                            p_node += 1
                            p_phase = 0
                            p_left = spec.acc_cycles
                        else:
                            p_phase = 2
                    else:
                        p_node += 1
                        p_phase = 0
                        p_left = spec.acc_cycles
            else:  # push blocked
                if len(queue) - q_head < cap:
                    edges = _node_edge_total(spec, p_node)
                    queue.append((p_node, edges * spec.node_beats, t))
                    if len(queue) - q_head > queue_max:
                        queue_max = len(queue) - q_head
                    p_node += 1
                    p_phase = 0
                    p_left = spec.acc_cycles
                prod_stall += 1
                queue_stall += 1
        t += 1

    return PassResult(t, [prod_busy], [prod_stall], [cons_busy], [queue_max],
                      [queue_stall], [order], trace)


def _run_multiqueue(spec: PassSpec) -> PassResult:
    trace: list[tuple] = []
    n = spec.n_nodes
    units = spec.p_units
    banks = spec.n_banks
    cap = spec.queue_cap
    n_beats = spec.node_beats

    # how many beats complete at each 1-based output cycle
    beats_at = [0] * (spec.out_cycles + 1)
    for oc in spec.beat_done_cycle:
        beats_at[oc] += 1

    # producer state per unit
    acc_node = [-1] * units
    acc_left = [0] * units
    pending = [-1] * units
    out_node = [-1] * units
    out_pos = [0] * units
    out_left = [0] * units
    next_pos = [0] * units  # next stream index (node id) for this unit
    prod_busy = [0] * units
    prod_stall = [0] * units
    for k in range(units):
        if k < n:
            acc_node[k] = k
            acc_left[k] = spec.acc_cycles
            next_pos[k] = k + units

    # per-bank queues of (node, cnt, pushed_at)
    queues: list[list[tuple[int, int, int]]] = [[] for _ in range(banks)]
    q_head = [0] * banks
    queue_max = [0] * banks
    queue_stall = [0] * banks

    c_left = [0] * banks
    cons_busy = [0] * banks
    seen = [[0] * n for _ in range(banks)]
    order: list[list[int]] = [[] for _ in range(banks)]
    out_pending = [-1] * units  # beats awaiting push for the current out cycle

    t = 0
    watchdog = _watchdog_limit(spec)
    while True:
        prods_done = all(
            acc_node[k] == -1 and pending[k] == -1 and out_node[k] == -1 for k in range(units)
        )
        queues_empty = all(len(queues[q]) - q_head[q] == 0 for q in range(banks))
        cons_done = all(left == 0 for left in c_left)
        if prods_done and queues_empty and cons_done:
            break
        if t > watchdog:
            raise RuntimeError("timing engine made no progress (deadlock watchdog)")

        # consumers
        for q in range(banks):
            if c_left[q] > 0:
                c_left[q] -= 1
                cons_busy[q] += 1
            elif len(queues[q]) - q_head[q] > 0 and queues[q][q_head[q]][2] < t:
                node, cnt, _ = queues[q][q_head[q]]
                q_head[q] += 1
                if not seen[q][node]:
                    seen[q][node] = 1
                    order[q].append(node)
                    if spec.collect_trace:
                        trace.append((t, f"mp{q}", "node_start", node))
                elif spec.collect_trace:
                    trace.append((t, f"mp{q}", "beat", node))
                cons_busy[q] += 1
                c_left[q] = cnt - 1

        # producers
        for k in range(units):
            # output station: the current output cycle completes once all the
            # beats it finishes have been pushed; pushes may trickle across
            # stalled cycles under backpressure.
            if out_node[k] != -1:
                node = out_node[k]
                lo = spec.route_ptr[node]
                hi = spec.route_ptr[node + 1]
                if out_pending[k] < 0:
                    out_pending[k] = beats_at[out_pos[k] + 1] if hi > lo else 0
                while out_pending[k] > 0:
                    fits = True
                    for r in range(lo, hi):
                        q = spec.route_bank[r]
                        if len(queues[q]) - q_head[q] >= cap:
                            fits = False
                            queue_stall[q] += 1
                    if not fits:
                        break
                    for r in range(lo, hi):
                        q = spec.route_bank[r]
                        queues[q].append((node, spec.route_cnt[r], t))
                        size = len(queues[q]) - q_head[q]
                        if size > queue_max[q]:
                            queue_max[q] = size
                    out_pending[k] -= 1
                if out_pending[k] == 0:
                    if spec.collect_trace and out_pos[k] == 0:
                        trace.append((t, f"nt{k}", "out_start", node))
                    out_pos[k] += 1
                    out_left[k] -= 1
                    out_pending[k] = -1
                    prod_busy[k] += 1
                    if out_left[k] == 0:
                        if spec.collect_trace:
                            trace.append((t, f"nt{k}", "out_done", node))
                        out_node[k] = -1
                else:
                    prod_stall[k] += 1
            # accumulate station
            if acc_node[k] != -1 and pending[k] == -1:
                if spec.collect_trace and acc_left[k] == spec.acc_cycles:
                    trace.append((t, f"nt{k}", "acc_start", acc_node[k]))
                acc_left[k] -= 1
                prod_busy[k] += 1
                if acc_left[k] == 0:
                    pending[k] = acc_node[k]
                    acc_node[k] = -1
            # handoff at end of cycle
            if pending[k] != -1 and out_node[k] == -1:
                out_node[k] = pending[k]
                out_pos[k] = 0
                out_left[k] = spec.out_cycles
                pending[k] = -1
                if next_pos[k] < n:
                    acc_node[k] = next_pos[k]
                    acc_left[k] = spec.acc_cycles
                    next_pos[k] += units
        t += 1

    return PassResult(t, prod_busy, prod_stall, cons_busy, queue_max, queue_stall,
                      order, trace)


def _run_buffer_fed(spec: PassSpec) -> PassResult:
    banks = spec.n_banks
    trace: list[tuple] = []
    cons_busy = [0] * banks
    order: list[list[int]] = [[] for _ in range(banks)]
    cycles = 0
    for q in range(banks):
        t = 0
        for k in range(spec.burst_ptr[q], spec.burst_ptr[q + 1]):
            src = spec.burst_src[k]
            cost = spec.burst_cost[k]
            if spec.collect_trace:
                trace.append((t, f"mp{q}", "node_start", src))
            order[q].append(src)
            t += cost
            cons_busy[q] += cost
        if t > cycles:
            cycles = t
    if spec.collect_trace:
        trace.sort(key=lambda ev: (ev[0], ev[1]))
    return PassResult(cycles, [0] * spec.p_units, [0] * spec.p_units, cons_busy,
                      [0] * banks, [0] * banks, order, trace)


def _watchdog_limit(spec: PassSpec) -> int:
    total_edges = sum(spec.route_cnt) + sum(spec.burst_cost)
    work = spec.n_nodes * (spec.acc_cycles + spec.out_cycles + 2)
    work += (total_edges + 1) * max(spec.node_beats, 1)
    return 10 * work + 10000
