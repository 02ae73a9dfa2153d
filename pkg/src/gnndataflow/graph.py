"""Graph data model, edge-list file I/O, sparse views, and partition analytics.

Graphs are immutable after construction: all arrays are marked read-only, and
every operation here returns new objects. Directed COO is the source of truth;
CSR (keyed by source) and CSC (keyed by destination) are derived views whose
``edge_perm`` maps view positions back to COO rows so per-edge attributes can
follow either view.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass

import numpy as np

BINARY_MAGIC = b"FGNN"
BINARY_VERSION = 1

_FLAG_VIRTUAL = 1
_FLAG_FIELD = 2


class GraphError(ValueError):
    """Malformed graph data. Carries a line or byte offset when known."""

    def __init__(self, msg: str, *, line: int | None = None, offset: int | None = None):
        if line is not None:
            msg = f"line {line}: {msg}"
        elif offset is not None:
            msg = f"byte {offset}: {msg}"
        super().__init__(msg)
        self.line = line
        self.offset = offset


@dataclass
class Graph:
    """Directed graph with node features and optional edge features / node field.

    ``coo`` is an (M, 2) int32 array of (src, dst) rows kept in input order.
    When ``has_virtual_node`` is set, node ``num_nodes - 1`` is the virtual
    node and ``coo`` already contains its edges to and from all other nodes.
    """

    num_nodes: int
    num_edges: int
    coo: np.ndarray
    node_features: np.ndarray
    edge_features: np.ndarray | None = None
    node_field: np.ndarray | None = None
    has_virtual_node: bool = False

    def __post_init__(self):
        self.coo = np.ascontiguousarray(self.coo, dtype=np.int32).reshape(self.num_edges, 2)
        self.node_features = np.ascontiguousarray(self.node_features, dtype=np.float32)
        if self.node_features.shape[0] != self.num_nodes:
            raise GraphError(
                f"node feature rows {self.node_features.shape[0]} != num_nodes {self.num_nodes}"
            )
        if self.num_edges and (self.coo.min() < 0 or self.coo.max() >= self.num_nodes):
            bad = int(np.argmax((self.coo < 0).any(axis=1) | (self.coo >= self.num_nodes).any(axis=1)))
            raise GraphError(f"edge {bad} references node id outside [0, {self.num_nodes})")
        if self.edge_features is not None:
            self.edge_features = np.ascontiguousarray(self.edge_features, dtype=np.float32)
            if self.edge_features.shape[0] != self.num_edges:
                raise GraphError(
                    f"edge feature rows {self.edge_features.shape[0]} != num_edges {self.num_edges}"
                )
        if self.node_field is not None:
            self.node_field = np.ascontiguousarray(self.node_field, dtype=np.float32).reshape(-1)
            if self.node_field.shape[0] != self.num_nodes:
                raise GraphError(
                    f"node field length {self.node_field.shape[0]} != num_nodes {self.num_nodes}"
                )
        for arr in (self.coo, self.node_features, self.edge_features, self.node_field):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def feature_dim(self) -> int:
        return self.node_features.shape[1]

    @property
    def edge_feature_dim(self) -> int:
        return 0 if self.edge_features is None else self.edge_features.shape[1]

    @property
    def num_real_nodes(self) -> int:
        """Node count excluding the virtual node, when present."""
        return self.num_nodes - 1 if self.has_virtual_node else self.num_nodes


@dataclass
class CsrView:
    """Edges grouped by source. ``edge_perm[k]`` is the COO row at position k."""

    row_ptr: np.ndarray
    col_idx: np.ndarray
    edge_perm: np.ndarray

    def row(self, i: int) -> np.ndarray:
        return self.col_idx[self.row_ptr[i]:self.row_ptr[i + 1]]


@dataclass
class CscView:
    """Edges grouped by destination. ``col_idx`` holds source ids."""

    row_ptr: np.ndarray
    col_idx: np.ndarray
    edge_perm: np.ndarray

    def row(self, i: int) -> np.ndarray:
        return self.col_idx[self.row_ptr[i]:self.row_ptr[i + 1]]


@dataclass
class EdgeBankAssignment:
    """Contiguous destination-id blocks of size ceil(N / p_edge), one per MP unit."""

    p_edge: int
    num_nodes: int
    block_size: int
    per_bank_edge_count: np.ndarray

    def bank_of_dst(self, v: int) -> int:
        return v // self.block_size


def _build_view(keys: np.ndarray, others: np.ndarray, n: int):
    perm = np.argsort(keys, kind="stable").astype(np.int64)
    counts = np.bincount(keys, minlength=n)
    row_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=row_ptr[1:])
    return row_ptr, others[perm].astype(np.int32), perm


def build_csr(graph: Graph) -> CsrView:
    row_ptr, col, perm = _build_view(graph.coo[:, 0], graph.coo[:, 1], graph.num_nodes)
    return CsrView(row_ptr, col, perm)


def build_csc(graph: Graph) -> CscView:
    row_ptr, col, perm = _build_view(graph.coo[:, 1], graph.coo[:, 0], graph.num_nodes)
    return CscView(row_ptr, col, perm)


def degrees(graph: Graph, direction: str) -> np.ndarray:
    """Per-node degree; ``direction`` is 'in' (by dst) or 'out' (by src)."""
    if direction not in ("in", "out"):
        raise ValueError(f"direction must be 'in' or 'out', got {direction!r}")
    col = 1 if direction == "in" else 0
    return np.bincount(graph.coo[:, col], minlength=graph.num_nodes).astype(np.int64)


def partition_edges(graph: Graph, p_edge: int) -> EdgeBankAssignment:
    """Assign edges to MP-unit banks by destination id, in contiguous blocks."""
    if p_edge < 1:
        raise ValueError("p_edge must be >= 1")
    block = math.ceil(graph.num_nodes / p_edge)
    banks = graph.coo[:, 1] // block if graph.num_edges else np.zeros(0, dtype=np.int64)
    counts = np.bincount(banks, minlength=p_edge).astype(np.int64)
    return EdgeBankAssignment(p_edge, graph.num_nodes, block, counts)


def _imbalance_pct(counts: np.ndarray, m: int) -> float:
    return 100.0 * (int(counts.max()) - int(counts.min())) / m


def workload_imbalance(graph: Graph, p_edge: int) -> float:
    """Largest per-bank edge-count difference as a percentage of all edges."""
    if graph.num_edges == 0:
        raise ValueError("workload imbalance is undefined for a graph with no edges")
    if p_edge < 2:
        raise ValueError("p_edge must be >= 2")
    assignment = partition_edges(graph, p_edge)
    return _imbalance_pct(assignment.per_bank_edge_count, graph.num_edges)


def gen_synthetic(
    n_nodes: int,
    avg_degree: float,
    topology: str = "uniform",
    feature_dims: tuple[int, int] = (8, 0),
    seed: int = 0,
    with_field: bool = False,
) -> Graph:
    """Deterministic random graph for tests and benchmarks.

    Topologies: 'uniform' (endpoints uniform), 'power-law' (skewed destination
    choice), 'with-virtual-node' (uniform base on the first N-1 nodes plus a
    final node wired bidirectionally to all others). Features are uniform in
    [-1, 1]; edges are unique and self-loop free.
    """
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    if topology not in ("uniform", "power-law", "with-virtual-node"):
        raise ValueError(f"unknown topology {topology!r}")
    f_in, d_edge = feature_dims
    rng = np.random.default_rng(seed)
    virtual = topology == "with-virtual-node"
    base_n = n_nodes - 1 if virtual else n_nodes

    def sample_uniform(n: int, m: int) -> np.ndarray:
        if n < 2 or m <= 0:
            return np.zeros((0, 2), dtype=np.int64)
        src = rng.integers(0, n, size=m)
        dst = rng.integers(0, n - 1, size=m)
        dst = np.where(dst >= src, dst + 1, dst)  # bijective self-loop avoidance
        return np.stack([src, dst], axis=1)

    if topology == "power-law":
        m = int(round(n_nodes * avg_degree))
        if base_n >= 2 and m > 0:
            ranks = rng.permutation(base_n) + 1
            weights = 1.0 / ranks**1.2
            weights /= weights.sum()
            src = rng.integers(0, base_n, size=m)
            dst = rng.choice(base_n, size=m, p=weights)
            clash = src == dst
            dst[clash] = (dst[clash] + 1) % base_n
            pairs = np.stack([src, dst], axis=1)
        else:
            pairs = np.zeros((0, 2), dtype=np.int64)
    else:
        pairs = sample_uniform(base_n, int(round(base_n * avg_degree)))

    if pairs.shape[0]:
        pairs = np.unique(pairs, axis=0)
    if virtual:
        hub = n_nodes - 1
        others = np.arange(base_n)
        hub_edges = np.concatenate(
            [
                np.stack([others, np.full(base_n, hub)], axis=1),
                np.stack([np.full(base_n, hub), others], axis=1),
            ]
        )
        pairs = np.concatenate([pairs, hub_edges]) if pairs.shape[0] else hub_edges

    m = pairs.shape[0]
    feats = rng.uniform(-1.0, 1.0, size=(n_nodes, f_in)).astype(np.float32)
    efeats = rng.uniform(-1.0, 1.0, size=(m, d_edge)).astype(np.float32) if d_edge > 0 else None
    field = rng.uniform(-1.0, 1.0, size=n_nodes).astype(np.float32) if with_field else None
    return Graph(
        num_nodes=n_nodes,
        num_edges=m,
        coo=pairs.astype(np.int32).reshape(m, 2),
        node_features=feats,
        edge_features=efeats,
        node_field=field,
        has_virtual_node=virtual,
    )


# ---------------------------------------------------------------------------
# File formats.
#
# Text (whitespace separated):
#   line 1:            N M F_in D [V]
#   next M lines:      src dst f_1 ... f_D
#   next N lines:      x_1 ... x_F_in
#   optional:          a "#field" line followed by N field values
#
# Binary: magic "FGNN", version u16, flags u16 (bit0 virtual node, bit1 node
# field), N M F_in D as u32, then the same sections as little-endian f32/u32.
# ---------------------------------------------------------------------------


def load_graph(data: bytes | str, fmt: str = "text") -> Graph:
    """Parse a graph stream. No reordering or preprocessing of any kind."""
    if fmt == "text":
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        return _load_text(data)
    if fmt == "binary":
        if isinstance(data, str):
            data = data.encode("utf-8")
        return _load_binary(data)
    if fmt == "edgelist":
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        return _load_edgelist(data)
    raise ValueError(f"unknown graph format {fmt!r}")


def _load_edgelist(text: str) -> Graph:
    """Raw 'src dst' lines (citation-network style); nodes get no features."""
    pairs: list[tuple[int, int]] = []
    max_id = -1
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith(("#", "%")):
            continue
        toks = line.split()
        if len(toks) < 2:
            raise GraphError(f"edge line needs 2 fields, got {len(toks)}", line=lineno)
        try:
            s, t = int(toks[0]), int(toks[1])
        except ValueError:
            raise GraphError("non-integer edge endpoint", line=lineno) from None
        if s < 0 or t < 0:
            raise GraphError(f"negative node id ({s}, {t})", line=lineno)
        pairs.append((s, t))
        max_id = max(max_id, s, t)
    n = max_id + 1
    if n < 1:
        raise GraphError("edge list contains no edges", line=1)
    coo = np.array(pairs, dtype=np.int32).reshape(len(pairs), 2)
    return Graph(n, len(pairs), coo, np.zeros((n, 1), dtype=np.float32))


def save_graph(graph: Graph, fmt: str = "text") -> bytes:
    if fmt == "text":
        return _save_text(graph).encode("utf-8")
    if fmt == "binary":
        return _save_binary(graph)
    raise ValueError(f"unknown graph format {fmt!r}")


def load_graph_file(path: str, fmt: str | None = None) -> Graph:
    if fmt is None:
        if path.endswith(".bin"):
            fmt = "binary"
        elif path.endswith((".edges", ".cites", ".edgelist")):
            fmt = "edgelist"
        else:
            fmt = "text"
    with open(path, "rb") as fh:
        return load_graph(fh.read(), fmt)


def save_graph_file(graph: Graph, path: str, fmt: str | None = None) -> None:
    if fmt is None:
        fmt = "binary" if path.endswith(".bin") else "text"
    with open(path, "wb") as fh:
        fh.write(save_graph(graph, fmt))


def _load_text(text: str) -> Graph:
    lines = text.splitlines()
    if not lines or not lines[0].split():
        raise GraphError("empty header", line=1)
    head = lines[0].split()
    if len(head) not in (4, 5):
        raise GraphError(f"header must be 'N M F_in D [V]', got {len(head)} fields", line=1)
    try:
        n, m, f_in, d_edge = (int(tok) for tok in head[:4])
        virtual = bool(int(head[4])) if len(head) == 5 else False
    except ValueError as exc:
        raise GraphError(f"non-integer header field: {exc}", line=1) from None
    if n < 1 or m < 0 or f_in < 0 or d_edge < 0:
        raise GraphError("negative or zero count in header", line=1)

    want = 1 + m + n
    body = lines
    coo = np.zeros((m, 2), dtype=np.int32)
    efeats = np.zeros((m, d_edge), dtype=np.float32) if d_edge > 0 else None
    for k in range(m):
        lineno = 2 + k
        if lineno - 1 >= len(body):
            raise GraphError("unexpected end of file in edge section", line=lineno)
        toks = body[lineno - 1].split()
        if len(toks) != 2 + d_edge:
            raise GraphError(f"edge line needs {2 + d_edge} fields, got {len(toks)}", line=lineno)
        try:
            s, t = int(toks[0]), int(toks[1])
        except ValueError:
            raise GraphError("non-integer edge endpoint", line=lineno) from None
        if not (0 <= s < n and 0 <= t < n):
            raise GraphError(f"edge ({s}, {t}) index out of range for N={n}", line=lineno)
        coo[k] = (s, t)
        if d_edge > 0:
            try:
                efeats[k] = [float(tok) for tok in toks[2:]]
            except ValueError:
                raise GraphError("non-numeric edge feature", line=lineno) from None

    feats = np.zeros((n, f_in), dtype=np.float32)
    for i in range(n):
        lineno = 2 + m + i
        if lineno - 1 >= len(body):
            raise GraphError("unexpected end of file in node section", line=lineno)
        toks = body[lineno - 1].split()
        if len(toks) != f_in:
            raise GraphError(f"node line needs {f_in} fields, got {len(toks)}", line=lineno)
        try:
            feats[i] = [float(tok) for tok in toks]
        except ValueError:
            raise GraphError("non-numeric node feature", line=lineno) from None

    field = None
    rest = [ln.strip() for ln in body[want:] if ln.strip()]
    if rest:
        if rest[0] != "#field":
            raise GraphError("expected '#field' sentinel or end of file", line=want + 1)
        if len(rest) != 1 + n:
            raise GraphError(f"field section needs {n} values, got {len(rest) - 1}", line=want + 1)
        try:
            field = np.array([float(v) for v in rest[1:]], dtype=np.float32)
        except ValueError:
            raise GraphError("non-numeric field value", line=want + 2) from None

    return Graph(n, m, coo, feats, efeats, field, virtual)


def _save_text(graph: Graph) -> str:
    out = io.StringIO()
    head = f"{graph.num_nodes} {graph.num_edges} {graph.feature_dim} {graph.edge_feature_dim}"
    if graph.has_virtual_node:
        head += " 1"
    out.write(head + "\n")
    for k in range(graph.num_edges):
        s, t = graph.coo[k]
        row = f"{s} {t}"
        if graph.edge_features is not None:
            row += " " + " ".join(_fmt(v) for v in graph.edge_features[k])
        out.write(row + "\n")
    for i in range(graph.num_nodes):
        out.write(" ".join(_fmt(v) for v in graph.node_features[i]) + "\n")
    if graph.node_field is not None:
        out.write("#field\n")
        for v in graph.node_field:
            out.write(_fmt(v) + "\n")
    return out.getvalue()


def _fmt(v: float) -> str:
    return np.format_float_positional(np.float32(v), unique=True, trim="0")


def _load_binary(blob: bytes) -> Graph:
    if blob[:4] != BINARY_MAGIC:
        raise GraphError(f"bad magic {blob[:4]!r}", offset=0)
    try:
        version, flags, n, m, f_in, d_edge = struct.unpack_from("<HHIIII", blob, 4)
    except struct.error:
        raise GraphError("truncated header", offset=4) from None
    if version != BINARY_VERSION:
        raise GraphError(f"unsupported version {version}", offset=4)
    pos = 4 + struct.calcsize("<HHIIII")

    def take(count: int, dtype, what: str) -> np.ndarray:
        nonlocal pos
        nbytes = count * np.dtype(dtype).itemsize
        if pos + nbytes > len(blob):
            raise GraphError(f"truncated {what} section", offset=pos)
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=pos)
        pos += nbytes
        return arr

    coo = take(2 * m, "<u4", "edge").astype(np.int64).reshape(m, 2)
    if m and coo.max() >= n:
        raise GraphError(f"edge index {int(coo.max())} out of range for N={n}", offset=pos)
    efeats = take(m * d_edge, "<f4", "edge feature").reshape(m, d_edge) if d_edge else None
    feats = take(n * f_in, "<f4", "node feature").reshape(n, f_in)
    field = take(n, "<f4", "node field") if flags & _FLAG_FIELD else None
    if pos != len(blob):
        raise GraphError("trailing bytes after graph data", offset=pos)
    return Graph(n, m, coo.astype(np.int32), feats.copy(),
                 None if efeats is None else efeats.copy(),
                 None if field is None else field.copy(),
                 bool(flags & _FLAG_VIRTUAL))


def _save_binary(graph: Graph) -> bytes:
    flags = (_FLAG_VIRTUAL if graph.has_virtual_node else 0) | (
        _FLAG_FIELD if graph.node_field is not None else 0
    )
    parts = [
        BINARY_MAGIC,
        struct.pack(
            "<HHIIII",
            BINARY_VERSION,
            flags,
            graph.num_nodes,
            graph.num_edges,
            graph.feature_dim,
            graph.edge_feature_dim,
        ),
        graph.coo.astype("<u4").tobytes(),
    ]
    if graph.edge_features is not None:
        parts.append(graph.edge_features.astype("<f4").tobytes())
    parts.append(graph.node_features.astype("<f4").tobytes())
    if graph.node_field is not None:
        parts.append(graph.node_field.astype("<f4").tobytes())
    return b"".join(parts)
