# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled timing engine: the same state machine as ``engine_py``.

Every mode mirrors the pure-Python twin cycle for cycle; the parity test
holds both engines to identical PassResults. Keep the two files in sync.
"""

from libc.stdlib cimport calloc, free

from .engine_py import PassResult


cdef int* _to_c(list values) except NULL:
    cdef Py_ssize_t n = len(values)
    cdef int* arr = <int*> calloc(n if n > 0 else 1, sizeof(int))
    if arr == NULL:
        raise MemoryError()
    cdef Py_ssize_t i
    for i in range(n):
        arr[i] = values[i]
    return arr


def run_pass(spec):
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


cdef long _edge_total(int* route_ptr, int* route_cnt, int node):
    cdef long total = 0
    cdef int k
    for k in range(route_ptr[node], route_ptr[node + 1]):
        total += route_cnt[k]
    return total


def _run_barrier(spec):
    cdef int* route_ptr = _to_c(spec.route_ptr)
    cdef int* route_cnt = _to_c(spec.route_cnt)
    trace = []
    collect = bool(spec.collect_trace)
    cdef long t = 0, prod_busy = 0, cons_busy = 0, edges, cost
    cdef int n = spec.n_nodes, acc = spec.acc_cycles, out = spec.out_cycles
    cdef int beats = spec.node_beats, node
    cdef long per_node = acc + out
    order = []
    try:
        for node in range(n):
            if collect:
                trace.append((t, "nt0", "acc_start", node))
                trace.append((t + acc, "nt0", "out_start", node))
            t += per_node
            prod_busy += per_node
        for node in range(n):
            edges = _edge_total(route_ptr, route_cnt, node)
            if edges == 0:
                continue
            cost = edges * beats
            if collect:
                trace.append((t, "mp0", "node_start", node))
            order.append(node)
            t += cost
            cons_busy += cost
    finally:
        free(route_ptr)
        free(route_cnt)
    return PassResult(t, [prod_busy], [0], [cons_busy], [0], [0], [order], trace)


def _run_lockstep(spec):
    cdef int* route_ptr = _to_c(spec.route_ptr)
    cdef int* route_cnt = _to_c(spec.route_cnt)
    trace = []
    collect = bool(spec.collect_trace)
    cdef int n = spec.n_nodes, acc = spec.acc_cycles, out = spec.out_cycles
    cdef int beats = spec.node_beats, s
    cdef long per_node = acc + out
    cdef long t = 0, prod_busy = 0, prod_stall = 0, cons_busy = 0
    cdef long queue_stall = 0, nt_time, mp_time, step, edges
    cdef int queue_max = 0
    order = []
    try:
        for s in range(n + 1):
            nt_time = per_node if s < n else 0
            mp_time = 0
            if s >= 1:
                edges = _edge_total(route_ptr, route_cnt, s - 1)
                if edges > 0:
                    mp_time = edges * beats
                    order.append(s - 1)
                    queue_max = 1
                    if collect:
                        trace.append((t, "mp0", "node_start", s - 1))
            if s < n and collect:
                trace.append((t, "nt0", "acc_start", s))
                trace.append((t + acc, "nt0", "out_start", s))
            step = nt_time if nt_time > mp_time else mp_time
            prod_busy += nt_time
            cons_busy += mp_time
            if s < n and nt_time < step:
                prod_stall += step - nt_time
                queue_stall += step - nt_time
            t += step
    finally:
        free(route_ptr)
        free(route_cnt)
    if collect:
        trace.sort(key=lambda ev: (ev[0], ev[1]))
    return PassResult(t, [prod_busy], [prod_stall], [cons_busy], [queue_max],
                      [queue_stall], [order], trace)


def _run_buffer_fed(spec):
    cdef int banks = spec.n_banks
    cdef int* burst_ptr = _to_c(spec.burst_ptr)
    cdef int* burst_src = _to_c(spec.burst_src)
    cdef int* burst_cost = _to_c(spec.burst_cost)
    trace = []
    collect = bool(spec.collect_trace)
    cons_busy = [0] * banks
    order = [[] for _ in range(banks)]
    cdef long cycles = 0, t, busy
    cdef int q, k, src, cost
    try:
        for q in range(banks):
            t = 0
            busy = 0
            for k in range(burst_ptr[q], burst_ptr[q + 1]):
                src = burst_src[k]
                cost = burst_cost[k]
                if collect:
                    trace.append((t, f"mp{q}", "node_start", src))
                order[q].append(src)
                t += cost
                busy += cost
            cons_busy[q] = busy
            if t > cycles:
                cycles = t
    finally:
        free(burst_ptr)
        free(burst_src)
        free(burst_cost)
    if collect:
        trace.sort(key=lambda ev: (ev[0], ev[1]))
    return PassResult(cycles, [0] * spec.p_units, [0] * spec.p_units, cons_busy,
                      [0] * banks, [0] * banks, order, trace)


cdef long _watchdog_limit(spec):
    cdef long total_edges = 0
    for v in spec.route_cnt:
        total_edges += v
    for v in spec.burst_cost:
        total_edges += v
    cdef long work = spec.n_nodes * (spec.acc_cycles + spec.out_cycles + 2)
    cdef long beats = spec.node_beats if spec.node_beats > 1 else 1
    work += (total_edges + 1) * beats
    return 10 * work + 10000


def _run_node_queue(spec):
    cdef int* route_ptr = _to_c(spec.route_ptr)
    cdef int* route_cnt = _to_c(spec.route_cnt)
    cdef int n = spec.n_nodes, cap = spec.queue_cap
    cdef int acc = spec.acc_cycles, out = spec.out_cycles, beats = spec.node_beats
    trace = []
    collect = bool(spec.collect_trace)

    cdef int* q_node = <int*> calloc(n if n > 0 else 1, sizeof(int))
    cdef long* q_cost = <long*> calloc(n if n > 0 else 1, sizeof(long))
    cdef long* q_push = <long*> calloc(n if n > 0 else 1, sizeof(long))
    cdef int q_head = 0, q_tail = 0

    cdef int p_node = 0, p_phase = 0
    cdef long p_left = acc
    cdef long prod_busy = 0, prod_stall = 0, cons_busy = 0
    cdef int queue_max = 0, queue_stall_i
    cdef long queue_stall = 0
    cdef long c_left = 0
    cdef long t = 0, watchdog = _watchdog_limit(spec)
    cdef long edges, cost
    cdef int node
    order = []
    if q_node == NULL or q_cost == NULL or q_push == NULL:
        raise MemoryError()
    try:
        while True:
            if p_node >= n and q_tail - q_head == 0 and c_left == 0:
                break
            if t > watchdog:
                raise RuntimeError("timing engine made no progress (deadlock watchdog)")

            # consumer
            if c_left > 0:
                c_left -= 1
                cons_busy += 1
            elif q_tail - q_head > 0 and q_push[q_head] < t:
                node = q_node[q_head]
                cost = q_cost[q_head]
                q_head += 1
                order.append(node)
                if collect:
                    trace.append((t, "mp0", "node_start", node))
                cons_busy += 1
                c_left = cost - 1

            # producer
            if p_node < n:
                if p_phase == 0:
                    if collect and p_left == acc:
                        trace.append((t, "nt0", "acc_start", p_node))
                    p_left -= 1
                    prod_busy += 1
                    if p_left == 0:
                        p_phase = 1
                        p_left = out
                elif p_phase == 1:
                    if collect and p_left == out:
                        trace.append((t, "nt0", "out_start", p_node))
                    p_left -= 1
                    prod_busy += 1
                    if p_left == 0:
                        edges = _edge_total(route_ptr, route_cnt, p_node)
                        if edges > 0:
                            cost = edges * beats
                            if q_tail - q_head < cap:
                                q_node[q_tail] = p_node
                                q_cost[q_tail] = cost
                                q_push[q_tail] = t
                                q_tail += 1
                                if q_tail - q_head > queue_max:
                                    queue_max = q_tail - q_head
                                p_node += 1
                                p_phase = 0
                                p_left = acc
                            else:
                                p_phase = 2
                        else:
                            p_node += 1
                            p_phase = 0
                            p_left = acc
                else:
                    if q_tail - q_head < cap:
                        edges = _edge_total(route_ptr, route_cnt, p_node)
                        q_node[q_tail] = p_node
                        q_cost[q_tail] = edges * beats
                        q_push[q_tail] = t
                        q_tail += 1
                        if q_tail - q_head > queue_max:
                            queue_max = q_tail - q_head
                        p_node += 1
                        p_phase = 0
                        p_left = acc
                    prod_stall += 1
                    queue_stall += 1
            t += 1
    finally:
        free(route_ptr)
        free(route_cnt)
        free(q_node)
        free(q_cost)
        free(q_push)
    return PassResult(t, [prod_busy], [prod_stall], [cons_busy], [queue_max],
                      [queue_stall], [order], trace)


def _run_multiqueue(spec):
    cdef int n = spec.n_nodes
    cdef int units = spec.p_units
    cdef int banks = spec.n_banks
    cdef int cap = spec.queue_cap
    cdef int acc = spec.acc_cycles, out_cycles = spec.out_cycles
    cdef int* route_ptr = _to_c(spec.route_ptr)
    cdef int* route_bank = _to_c(spec.route_bank)
    cdef int* route_cnt = _to_c(spec.route_cnt)
    trace = []
    collect = bool(spec.collect_trace)

    # how many beats complete at each 1-based output cycle
    cdef int* beats_at = <int*> calloc(out_cycles + 1, sizeof(int))
    cdef int oc
    for oc in spec.beat_done_cycle:
        beats_at[oc] += 1

    cdef int* acc_node = <int*> calloc(units, sizeof(int))
    cdef long* acc_left = <long*> calloc(units, sizeof(long))
    cdef int* pending = <int*> calloc(units, sizeof(int))
    cdef int* out_node = <int*> calloc(units, sizeof(int))
    cdef int* out_pos = <int*> calloc(units, sizeof(int))
    cdef int* out_left = <int*> calloc(units, sizeof(int))
    cdef int* next_pos = <int*> calloc(units, sizeof(int))
    cdef int* out_pending = <int*> calloc(units, sizeof(int))
    prod_busy = [0] * units
    prod_stall = [0] * units
    cdef long* p_busy = <long*> calloc(units, sizeof(long))
    cdef long* p_stall = <long*> calloc(units, sizeof(long))
    cdef int k
    for k in range(units):
        acc_node[k] = -1
        pending[k] = -1
        out_node[k] = -1
        out_pending[k] = -1
        if k < n:
            acc_node[k] = k
            acc_left[k] = acc
            next_pos[k] = k + units

    # queue capacity per bank: every routed beat of every node, worst case
    cdef long* qcap_needed = <long*> calloc(banks, sizeof(long))
    cdef int r, q
    cdef int n_beats_total = len(spec.beat_done_cycle)
    cdef int node
    for node in range(n):
        for r in range(route_ptr[node], route_ptr[node + 1]):
            qcap_needed[route_bank[r]] += n_beats_total
    cdef long* q_base = <long*> calloc(banks + 1, sizeof(long))
    for q in range(banks):
        q_base[q + 1] = q_base[q] + qcap_needed[q]
    cdef long q_total = q_base[banks]
    cdef int* qn = <int*> calloc(q_total if q_total > 0 else 1, sizeof(int))
    cdef int* qc = <int*> calloc(q_total if q_total > 0 else 1, sizeof(int))
    cdef long* qp = <long*> calloc(q_total if q_total > 0 else 1, sizeof(long))
    cdef long* q_head = <long*> calloc(banks, sizeof(long))
    cdef long* q_tail = <long*> calloc(banks, sizeof(long))
    for q in range(banks):
        q_head[q] = q_base[q]
        q_tail[q] = q_base[q]

    cdef int* queue_max_c = <int*> calloc(banks, sizeof(int))
    cdef long* queue_stall_c = <long*> calloc(banks, sizeof(long))
    cdef long* c_left = <long*> calloc(banks, sizeof(long))
    cdef long* c_busy = <long*> calloc(banks, sizeof(long))
    cdef char* seen = <char*> calloc(<long> banks * (n if n > 0 else 1), sizeof(char))
    order = [[] for _ in range(banks)]

    cdef long t = 0, watchdog = _watchdog_limit(spec)
    cdef bint prods_done, queues_empty, cons_done, fits
    cdef int cnt, lo, hi, size
    try:
        while True:
            prods_done = True
            for k in range(units):
                if acc_node[k] != -1 or pending[k] != -1 or out_node[k] != -1:
                    prods_done = False
                    break
            queues_empty = True
            for q in range(banks):
                if q_tail[q] - q_head[q] != 0:
                    queues_empty = False
                    break
            cons_done = True
            for q in range(banks):
                if c_left[q] != 0:
                    cons_done = False
                    break
            if prods_done and queues_empty and cons_done:
                break
            if t > watchdog:
                raise RuntimeError("timing engine made no progress (deadlock watchdog)")

            # consumers
            for q in range(banks):
                if c_left[q] > 0:
                    c_left[q] -= 1
                    c_busy[q] += 1
                elif q_tail[q] - q_head[q] > 0 and qp[q_head[q]] < t:
                    node = qn[q_head[q]]
                    cnt = qc[q_head[q]]
                    q_head[q] += 1
                    if not seen[<long> q * n + node]:
                        seen[<long> q * n + node] = 1
                        order[q].append(node)
                        if collect:
                            trace.append((t, f"mp{q}", "node_start", node))
                    elif collect:
                        trace.append((t, f"mp{q}", "beat", node))
                    c_busy[q] += 1
                    c_left[q] = cnt - 1

            # producers
            for k in range(units):
                if out_node[k] != -1:
                    node = out_node[k]
                    lo = route_ptr[node]
                    hi = route_ptr[node + 1]
                    if out_pending[k] < 0:
                        out_pending[k] = beats_at[out_pos[k] + 1] if hi > lo else 0
                    while out_pending[k] > 0:
                        fits = True
                        for r in range(lo, hi):
                            q = route_bank[r]
                            if q_tail[q] - q_head[q] >= cap:
                                fits = False
                                queue_stall_c[q] += 1
                        if not fits:
                            break
                        for r in range(lo, hi):
                            q = route_bank[r]
                            qn[q_tail[q]] = node
                            qc[q_tail[q]] = route_cnt[r]
                            qp[q_tail[q]] = t
                            q_tail[q] += 1
                            size = <int> (q_tail[q] - q_head[q])
                            if size > queue_max_c[q]:
                                queue_max_c[q] = size
                        out_pending[k] -= 1
                    if out_pending[k] == 0:
                        if collect and out_pos[k] == 0:
                            trace.append((t, f"nt{k}", "out_start", node))
                        out_pos[k] += 1
                        out_left[k] -= 1
                        out_pending[k] = -1
                        p_busy[k] += 1
                        if out_left[k] == 0:
                            if collect:
                                trace.append((t, f"nt{k}", "out_done", node))
                            out_node[k] = -1
                    else:
                        p_stall[k] += 1
                if acc_node[k] != -1 and pending[k] == -1:
                    if collect and acc_left[k] == acc:
                        trace.append((t, f"nt{k}", "acc_start", acc_node[k]))
                    acc_left[k] -= 1
                    p_busy[k] += 1
                    if acc_left[k] == 0:
                        pending[k] = acc_node[k]
                        acc_node[k] = -1
                if pending[k] != -1 and out_node[k] == -1:
                    out_node[k] = pending[k]
                    out_pos[k] = 0
                    out_left[k] = out_cycles
                    pending[k] = -1
                    if next_pos[k] < n:
                        acc_node[k] = next_pos[k]
                        acc_left[k] = acc
                        next_pos[k] += units
            t += 1

        for k in range(units):
            prod_busy[k] = p_busy[k]
            prod_stall[k] = p_stall[k]
        cons_busy = [c_busy[q] for q in range(banks)]
        queue_max = [queue_max_c[q] for q in range(banks)]
        queue_stall = [queue_stall_c[q] for q in range(banks)]
    finally:
        free(route_ptr); free(route_bank); free(route_cnt)
        free(beats_at)
        free(acc_node); free(acc_left); free(pending)
        free(out_node); free(out_pos); free(out_left)
        free(next_pos); free(out_pending)
        free(p_busy); free(p_stall)
        free(qcap_needed); free(q_base)
        free(qn); free(qc); free(qp); free(q_head); free(q_tail)
        free(queue_max_c); free(queue_stall_c); free(c_left); free(c_busy)
        free(seen)
    return PassResult(t, prod_busy, prod_stall, cons_busy, queue_max, queue_stall,
                      order, trace)
