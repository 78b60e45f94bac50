"""
Triplet Graph Transformer network.

Input embeddings (node types, optional node features, edge types, hops and an optional
encoding of input distances) feed L pre-norm layers. With layer multiplier m, layer l
(0-based) runs parameter group l // m, so every m consecutive layers share weights.
The final normalized pair embeddings drive a binned-distance head and, for the edge
task, a binary edge head; the mean-pooled node embeddings drive the scalar head.
"""
from dataclasses import dataclass
from typing import List, Literal, Optional

import numpy as np
import structlog

from tgt.core.config import TGTConfig
from tgt.core.exceptions import PipelineError
from tgt.data.graph import GraphInputs
from tgt.nn import (
    DropoutContext,
    Embedding,
    LayerNorm,
    Linear,
    Module,
    ModuleList,
    TGTLayer,
    build_distance_encoding,
)
from tgt.tensor import Tensor, ops

logger = structlog.get_logger(__name__)

Mode = Literal["train", "stochastic_eval", "deterministic_eval"]
MODES = ("train", "stochastic_eval", "deterministic_eval")


@dataclass
class ModelOutputs:
    distance_logits: Tensor  # (N, N, B), symmetric in (i, j)
    node_embeddings: Tensor
    pair_embeddings: Tensor
    graph_scalar: Optional[Tensor] = None  # standardized units
    edge_logits: Optional[Tensor] = None  # (N, N), symmetric


def _symmetrize(x: Tensor) -> Tensor:
    axes = (1, 0) + tuple(range(2, x.ndim))
    return (x + ops.transpose(x, axes)) * 0.5


class TGT(Module):
    def __init__(self, config: TGTConfig, rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.config = config
        self.target_mean = 0.0
        self.target_std = 1.0
        self.has_target_stats = False

        self.node_type_embedding = Embedding(config.num_node_types, config.node_dim, rng)
        self.node_feature_proj = (
            Linear(config.node_feature_dim, config.node_dim, rng)
            if config.node_feature_dim
            else None
        )
        self.edge_type_embedding = Embedding(config.num_edge_types + 1, config.edge_dim, rng)
        self.hop_embedding = Embedding(config.max_hops + 2, config.edge_dim, rng)
        self.distance_encoding = build_distance_encoding(config, rng)

        self.groups = ModuleList([TGTLayer(config, rng) for _ in range(config.num_groups)])

        self.final_norm_nodes = LayerNorm(config.node_dim)
        self.final_norm_pairs = LayerNorm(config.edge_dim)
        self.distance_head = Linear(config.edge_dim, config.bins.num_bins, rng)
        if config.task == "scalar":
            self.scalar_hidden = Linear(config.node_dim, config.node_dim, rng)
            self.scalar_out = Linear(config.node_dim, 1, rng)
        else:
            self.edge_head = Linear(config.edge_dim, 1, rng)

    # -- structure ------------------------------------------------------------

    def layer_groups(self) -> List[int]:
        """Parameter group used by each layer"""
        m = self.config.layer_multiplier
        return [layer // m for layer in range(self.config.num_layers)]

    def layer_stack_parameters(self) -> int:
        return self.groups.num_parameters()

    # -- forward --------------------------------------------------------------

    def embed(self, inputs: GraphInputs):
        config = self.config
        h = self.node_type_embedding(inputs.node_types)
        if self.node_feature_proj is not None:
            if inputs.node_features is None:
                raise PipelineError(
                    f"model expects {config.node_feature_dim} node features, graph has none"
                )
            h = h + self.node_feature_proj(Tensor(inputs.node_features))

        hops = np.minimum(inputs.hops, config.max_hops + 1)
        e = self.edge_type_embedding(inputs.edge_types) + self.hop_embedding(hops)
        if self.distance_encoding is not None and inputs.distances is not None:
            e = e + self.distance_encoding(inputs.distances, inputs.node_types)
        return h, e

    def forward(
        self,
        inputs: GraphInputs,
        mode: Mode = "deterministic_eval",
        rng: Optional[np.random.Generator] = None,
    ) -> ModelOutputs:
        if mode not in MODES:
            raise PipelineError(f"unknown forward mode {mode!r}")
        drop = None
        if mode != "deterministic_eval":
            if rng is None:
                raise PipelineError(f"mode {mode!r} needs a random generator")
            drop = DropoutContext(self.config.dropout, rng)

        h, e = self.embed(inputs)
        for group in self.layer_groups():
            h, e = self.groups[group](h, e, drop)
        h = self.final_norm_nodes(h)
        e = self.final_norm_pairs(e)

        outputs = ModelOutputs(
            distance_logits=_symmetrize(self.distance_head(e)),
            node_embeddings=h,
            pair_embeddings=e,
        )
        n = h.shape[0]
        if self.config.task == "scalar":
            pooled = ops.mean(h, axis=0, keepdims=True)
            hidden = ops.gelu(self.scalar_hidden(pooled))
            outputs.graph_scalar = ops.reshape(self.scalar_out(hidden), ())
        else:
            outputs.edge_logits = _symmetrize(ops.reshape(self.edge_head(e), (n, n)))
        return outputs

    # -- target scaling -------------------------------------------------------

    def set_target_stats(self, mean: float, std: float) -> None:
        self.target_mean = float(mean)
        self.target_std = float(std) if std > 0 else 1.0
        self.has_target_stats = True

    def standardize(self, value):
        return (value - self.target_mean) / self.target_std

    def destandardize(self, value):
        return value * self.target_std + self.target_mean


def count_params(config: TGTConfig, scope: Literal["all", "layers"] = "all") -> int:
    """Trainable scalars; shared layer groups count once"""
    model = TGT(config)
    return model.num_parameters() if scope == "all" else model.layer_stack_parameters()
