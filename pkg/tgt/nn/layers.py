"""
Pre-norm TGT layer:

    node/pair attention  ->  third-order pair interaction  ->  node FFN, pair FFN

each block reading a layer-normalized input and adding its update through path dropout.
"""
from typing import Callable, Optional, Tuple

import numpy as np

from tgt.core.config import TGTConfig
from tgt.nn.attention import EGTAttention
from tgt.nn.dropout import DropoutContext, maybe_path
from tgt.nn.module import LayerNorm, Linear, Module
from tgt.nn.triplet import build_interaction
from tgt.tensor import Tensor, ops


class FFN(Module):
    """Linear -> GELU -> activation dropout -> Linear"""

    def __init__(self, dim: int, hidden_dim: int, rng: np.random.Generator):
        super().__init__()
        self.fc1 = Linear(dim, hidden_dim, rng)
        self.fc2 = Linear(hidden_dim, dim, rng)

    def forward(self, x: Tensor, drop: Optional[DropoutContext] = None) -> Tensor:
        hidden = ops.gelu(self.fc1(x))
        if drop is not None:
            hidden = drop.activation(hidden)
        return self.fc2(hidden)


def pre_norm_residual(
    x: Tensor,
    norm: LayerNorm,
    block: Callable[[Tensor], Tensor],
    drop: Optional[DropoutContext] = None,
) -> Tensor:
    """x + path_drop(block(norm(x)))"""
    return x + maybe_path(block(norm(x)), drop)


class TGTLayer(Module):
    def __init__(self, config: TGTConfig, rng: np.random.Generator):
        super().__init__()
        self.attention_norm_nodes = LayerNorm(config.node_dim)
        self.attention_norm_pairs = LayerNorm(config.edge_dim)
        self.attention = EGTAttention(config.node_dim, config.edge_dim, config.num_heads, rng)
        self.interaction = build_interaction(config, rng)
        if self.interaction is not None:
            self.interaction_norm = LayerNorm(config.edge_dim)
        self.node_ffn_norm = LayerNorm(config.node_dim)
        self.node_ffn = FFN(config.node_dim, config.node_ffn_dim, rng)
        self.pair_ffn_norm = LayerNorm(config.edge_dim)
        self.pair_ffn = FFN(config.edge_dim, config.edge_ffn_dim, rng)

    def forward(
        self, h: Tensor, e: Tensor, drop: Optional[DropoutContext] = None
    ) -> Tuple[Tensor, Tensor]:
        source_mask = drop.source_mask(h.shape[0]) if drop is not None else None
        attended = self.attention(
            self.attention_norm_nodes(h), self.attention_norm_pairs(e), source_mask, drop
        )
        # node and pair updates of the attention block are dropped together
        scale = drop.block_scale() if drop is not None else 1.0
        if scale == 1.0:
            h = h + attended.node_update
            e = e + attended.pair_update
        else:
            h = h + attended.node_update * scale
            e = e + attended.pair_update * scale

        if self.interaction is not None:
            e = pre_norm_residual(
                e, self.interaction_norm, lambda x: self.interaction(x, drop), drop
            )

        h = pre_norm_residual(h, self.node_ffn_norm, lambda x: self.node_ffn(x, drop), drop)
        e = pre_norm_residual(e, self.pair_ffn_norm, lambda x: self.pair_ffn(x, drop), drop)
        return h, e
