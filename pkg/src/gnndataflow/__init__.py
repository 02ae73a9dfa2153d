"""Message-passing GNN inference engine with a cycle-approximate dataflow simulator."""

__version__ = "0.1.0"

from .graph import (  # noqa: F401
    CscView,
    CsrView,
    EdgeBankAssignment,
    Graph,
    GraphError,
    build_csc,
    build_csr,
    degrees,
    gen_synthetic,
    load_graph,
    load_graph_file,
    partition_edges,
    save_graph,
    save_graph_file,
    workload_imbalance,
)
from .kernels import EmbeddingBuffer, aggregate, run_layers, run_model  # noqa: F401
from .models import (  # noqa: F401
    LayerParams,
    ModelConfig,
    default_config,
    load_weights,
    load_weights_file,
    random_model,
    save_weights,
    save_weights_file,
    validate_model,
)
