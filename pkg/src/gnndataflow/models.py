"""Model configurations, per-layer parameters, and the FGWT weight container.

A model is one of five kinds (gcn, gin, gat, pna, dgn); the virtual-node
mechanism composes with any of them via ``ModelConfig.virtual_node``. Layer
parameters are plain numpy arrays; shape consistency is checked against the
config both at construction time and when loading a weight file.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

MODEL_KINDS = ("gcn", "gin", "gat", "pna", "dgn")

WEIGHTS_MAGIC = b"FGWT"
WEIGHTS_VERSION = 1

# Aggregators and degree scalers used by pna layers, in concatenation order
# (scaler-major: all four aggregators under scaler 1, then under the
# amplification scaler, then under attenuation).
PNA_AGGREGATORS = ("mean", "std", "max", "min")
PNA_NUM_BLOCKS = 12


@dataclass
class LayerParams:
    """Weights for one layer. Which fields are set depends on the model kind.

    lin1/lin2 form the node-transform linear or 2-layer MLP; ``edge_enc`` maps
    edge features to the message dimension (no bias); the gat_* fields hold
    per-head attention parameters; vn_* hold the virtual-node state MLP.
    """

    lin1_w: np.ndarray | None = None
    lin1_b: np.ndarray | None = None
    lin2_w: np.ndarray | None = None
    lin2_b: np.ndarray | None = None
    edge_enc: np.ndarray | None = None
    epsilon: float = 0.0
    gat_w: np.ndarray | None = None       # (H, F_h, d_in)
    gat_a_src: np.ndarray | None = None   # (H, F_h)
    gat_a_dst: np.ndarray | None = None   # (H, F_h)
    vn_w1: np.ndarray | None = None
    vn_b1: np.ndarray | None = None
    vn_w2: np.ndarray | None = None
    vn_b2: np.ndarray | None = None


@dataclass
class ModelConfig:
    model_kind: str
    num_layers: int
    hidden_dim: int
    f_in: int
    edge_dim: int = 0
    gat_heads: int = 0
    gat_head_dim: int = 0
    gat_leaky_slope: float = 0.2
    pna_avg_log_degree: float = 0.0
    head_dims: tuple[int, ...] = (1,)
    pooling: str = "mean"
    virtual_node: bool = False
    layers: list[LayerParams] = field(default_factory=list)
    head: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    @property
    def layer_dims(self) -> list[int]:
        """Embedding width entering each layer, index 0 is the raw input."""
        return [self.f_in] + [self.hidden_dim] * self.num_layers

    @property
    def uses_edge_features(self) -> bool:
        return self.model_kind in ("gin", "pna") and self.edge_dim > 0

    def describe(self) -> str:
        kind = self.model_kind + ("-vn" if self.virtual_node else "")
        return f"{kind} L={self.num_layers} d={self.hidden_dim}"


def default_config(kind: str, f_in: int = 9, edge_dim: int = 3) -> ModelConfig:
    """Shipped default shapes for each model family (no weights attached)."""
    kind, virtual = _split_kind(kind)
    if kind == "gat":
        return ModelConfig("gat", 5, 64, f_in, 0, gat_heads=4, gat_head_dim=16,
                           head_dims=(1,), virtual_node=virtual)
    if kind == "pna":
        return ModelConfig("pna", 4, 80, f_in, edge_dim, head_dims=(40, 20, 1),
                           pna_avg_log_degree=math.log(5.0), virtual_node=virtual)
    if kind == "dgn":
        return ModelConfig("dgn", 4, 100, f_in, 0, head_dims=(50, 25, 1),
                           virtual_node=virtual)
    if kind == "gcn":
        return ModelConfig("gcn", 5, 100, f_in, 0, head_dims=(1,), virtual_node=virtual)
    if kind == "gin":
        return ModelConfig("gin", 5, 100, f_in, edge_dim, head_dims=(1,),
                           virtual_node=virtual)
    raise ValueError(f"unknown model kind {kind!r}")


def _split_kind(kind: str) -> tuple[str, bool]:
    virtual = kind.endswith("-vn")
    base = kind[:-3] if virtual else kind
    if base not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    return base, virtual


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


def random_model(
    kind: str,
    f_in: int = 9,
    edge_dim: int = 3,
    seed: int = 0,
    num_layers: int | None = None,
    hidden_dim: int | None = None,
    pna_avg_log_degree: float | None = None,
) -> ModelConfig:
    """Config of the requested kind with deterministic random weights."""
    cfg = default_config(kind, f_in, edge_dim)
    if num_layers is not None:
        cfg.num_layers = num_layers
    if hidden_dim is not None:
        cfg.hidden_dim = hidden_dim
        if cfg.model_kind == "gat":
            if hidden_dim % cfg.gat_heads:
                raise ValueError("gat hidden_dim must be divisible by the head count")
            cfg.gat_head_dim = hidden_dim // cfg.gat_heads
    if pna_avg_log_degree is not None:
        cfg.pna_avg_log_degree = pna_avg_log_degree

    rng = np.random.default_rng(seed)
    dims = cfg.layer_dims
    cfg.layers = []
    for layer in range(cfg.num_layers):
        d_in, d_out = dims[layer], dims[layer + 1]
        p = LayerParams()
        if cfg.model_kind == "gin":
            p.lin1_w = _uniform(rng, (d_out, d_in), d_in)
            p.lin1_b = _uniform(rng, d_out, d_in)
            p.lin2_w = _uniform(rng, (d_out, d_out), d_out)
            p.lin2_b = _uniform(rng, d_out, d_out)
            p.epsilon = float(rng.uniform(0.0, 0.2))
            if cfg.edge_dim > 0:
                p.edge_enc = _uniform(rng, (d_in, cfg.edge_dim), cfg.edge_dim)
        elif cfg.model_kind == "gcn":
            # symmetric-normalized convolution carries no bias term
            p.lin1_w = _uniform(rng, (d_out, d_in), d_in)
        elif cfg.model_kind == "gat":
            h, fh = cfg.gat_heads, cfg.gat_head_dim
            p.gat_w = _uniform(rng, (h, fh, d_in), d_in)
            p.gat_a_src = _uniform(rng, (h, fh), fh)
            p.gat_a_dst = _uniform(rng, (h, fh), fh)
        elif cfg.model_kind == "pna":
            p.lin1_w = _uniform(rng, (d_out, PNA_NUM_BLOCKS * d_in), PNA_NUM_BLOCKS * d_in)
            p.lin1_b = _uniform(rng, d_out, PNA_NUM_BLOCKS * d_in)
            if cfg.edge_dim > 0:
                p.edge_enc = _uniform(rng, (d_in, cfg.edge_dim), cfg.edge_dim)
        elif cfg.model_kind == "dgn":
            p.lin1_w = _uniform(rng, (d_out, 2 * d_in), 2 * d_in)
            p.lin1_b = _uniform(rng, d_out, 2 * d_in)
        if cfg.virtual_node:
            # the state update reads a graph-wide sum, so its effective
            # fan-in includes a nominal node count; scale accordingly to
            # keep the add-back feedback loop from amplifying activations
            vn_fan = d_in * 32
            p.vn_w1 = _uniform(rng, (d_in, d_in), vn_fan)
            p.vn_b1 = _uniform(rng, d_in, vn_fan)
            p.vn_w2 = _uniform(rng, (d_out, d_in), vn_fan)
            p.vn_b2 = _uniform(rng, d_out, vn_fan)
        cfg.layers.append(p)

    cfg.head = []
    d = dims[-1]
    for width in cfg.head_dims:
        cfg.head.append((_uniform(rng, (width, d), d), _uniform(rng, width, d)))
        d = width
    validate_model(cfg)
    return cfg


def validate_model(cfg: ModelConfig) -> None:
    """Check every parameter shape against the config dims."""
    if cfg.model_kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {cfg.model_kind!r}")
    if cfg.model_kind == "pna" and cfg.pna_avg_log_degree <= 0:
        raise ValueError("pna_avg_log_degree must be > 0")
    if cfg.model_kind == "gat" and cfg.gat_heads * cfg.gat_head_dim != cfg.hidden_dim:
        raise ValueError("gat heads * head_dim must equal hidden_dim")
    if len(cfg.layers) != cfg.num_layers:
        raise ValueError(f"expected {cfg.num_layers} layer params, got {len(cfg.layers)}")
    dims = cfg.layer_dims
    for layer, p in enumerate(cfg.layers):
        d_in, d_out = dims[layer], dims[layer + 1]
        ctx = f"layer {layer}"
        if cfg.model_kind == "gin":
            _expect(p.lin1_w, (d_out, d_in), f"{ctx} lin1_w")
            _expect(p.lin2_w, (d_out, d_out), f"{ctx} lin2_w")
            if cfg.edge_dim > 0:
                _expect(p.edge_enc, (d_in, cfg.edge_dim), f"{ctx} edge_enc")
        elif cfg.model_kind == "gcn":
            _expect(p.lin1_w, (d_out, d_in), f"{ctx} lin1_w")
        elif cfg.model_kind == "gat":
            _expect(p.gat_w, (cfg.gat_heads, cfg.gat_head_dim, d_in), f"{ctx} gat_w")
            _expect(p.gat_a_src, (cfg.gat_heads, cfg.gat_head_dim), f"{ctx} gat_a_src")
            _expect(p.gat_a_dst, (cfg.gat_heads, cfg.gat_head_dim), f"{ctx} gat_a_dst")
        elif cfg.model_kind == "pna":
            _expect(p.lin1_w, (d_out, PNA_NUM_BLOCKS * d_in), f"{ctx} lin1_w")
        elif cfg.model_kind == "dgn":
            _expect(p.lin1_w, (d_out, 2 * d_in), f"{ctx} lin1_w")
        if cfg.virtual_node:
            _expect(p.vn_w1, (d_in, d_in), f"{ctx} vn_w1")
            _expect(p.vn_w2, (d_out, d_in), f"{ctx} vn_w2")
    d = dims[-1]
    for k, (w, b) in enumerate(cfg.head):
        _expect(w, (cfg.head_dims[k], d), f"head {k} weight")
        _expect(b, (cfg.head_dims[k],), f"head {k} bias")
        d = cfg.head_dims[k]


def _expect(arr: np.ndarray | None, shape: tuple[int, ...], what: str) -> None:
    if arr is None:
        raise ValueError(f"{what}: missing tensor")
    got = arr.shape if arr.ndim else ()
    if tuple(got) != tuple(shape):
        raise ValueError(f"{what}: expected shape {shape}, got {tuple(got)}")


# ---------------------------------------------------------------------------
# FGWT weight container: magic "FGWT", version u16, then a directory of named
# tensors until EOF. Each entry: name length u16 + utf-8 bytes, rank u8, dims
# u32 each, then a row-major little-endian f32 payload.
# ---------------------------------------------------------------------------

_LAYER_ROLES = (
    "lin1_w", "lin1_b", "lin2_w", "lin2_b", "edge_enc",
    "gat_w", "gat_a_src", "gat_a_dst",
    "vn_w1", "vn_b1", "vn_w2", "vn_b2",
)


def _named_tensors(cfg: ModelConfig):
    for layer, p in enumerate(cfg.layers):
        for role in _LAYER_ROLES:
            arr = getattr(p, role)
            if arr is not None:
                yield f"layer{layer}.{role}", np.asarray(arr, dtype=np.float32)
        yield f"layer{layer}.epsilon", np.float32(p.epsilon)
    for k, (w, b) in enumerate(cfg.head):
        yield f"head{k}.weight", np.asarray(w, dtype=np.float32)
        yield f"head{k}.bias", np.asarray(b, dtype=np.float32)
    yield "meta.pna_avg_log_degree", np.float32(cfg.pna_avg_log_degree)


def save_weights(cfg: ModelConfig) -> bytes:
    parts = [WEIGHTS_MAGIC, struct.pack("<H", WEIGHTS_VERSION)]
    for name, arr in _named_tensors(cfg):
        raw = name.encode("utf-8")
        arr = np.asarray(arr, dtype="<f4")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def save_weights_file(cfg: ModelConfig, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(save_weights(cfg))


def load_weights(blob: bytes, cfg: ModelConfig) -> ModelConfig:
    """Attach tensors from an FGWT blob to ``cfg``, validating every shape."""
    if blob[:4] != WEIGHTS_MAGIC:
        raise ValueError(f"bad weight magic {blob[:4]!r}")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != WEIGHTS_VERSION:
        raise ValueError(f"unsupported weight version {version}")
    pos = 6
    tensors: dict[str, np.ndarray] = {}
    while pos < len(blob):
        (name_len,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos:pos + name_len].decode("utf-8")
        pos += name_len
        (rank,) = struct.unpack_from("<B", blob, pos)
        pos += 1
        dims = struct.unpack_from(f"<{rank}I", blob, pos)
        pos += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=pos).reshape(dims)
        pos += 4 * count
        tensors[name] = arr.copy()

    cfg.layers = [LayerParams() for _ in range(cfg.num_layers)]
    cfg.head = [(None, None)] * len(cfg.head_dims)
    heads: dict[int, dict[str, np.ndarray]] = {}
    for name, arr in tensors.items():
        if name == "meta.pna_avg_log_degree":
            cfg.pna_avg_log_degree = float(arr)
            continue
        prefix, _, role = name.partition(".")
        if prefix.startswith("layer"):
            idx = int(prefix[5:])
            if idx >= cfg.num_layers:
                raise ValueError(f"tensor {name!r} exceeds num_layers={cfg.num_layers}")
            if role == "epsilon":
                cfg.layers[idx].epsilon = float(arr)
            elif role in _LAYER_ROLES:
                setattr(cfg.layers[idx], role, arr)
            else:
                raise ValueError(f"unknown tensor role {name!r}")
        elif prefix.startswith("head"):
            heads.setdefault(int(prefix[4:]), {})[role] = arr
        else:
            raise ValueError(f"unknown tensor name {name!r}")
    for k in range(len(cfg.head_dims)):
        if k not in heads or "weight" not in heads[k] or "bias" not in heads[k]:
            raise ValueError(f"missing head {k} tensors")
        cfg.head[k] = (heads[k]["weight"], heads[k]["bias"])
    validate_model(cfg)
    return cfg


def load_weights_file(path: str, cfg: ModelConfig) -> ModelConfig:
    with open(path, "rb") as fh:
        return load_weights(fh.read(), cfg)
