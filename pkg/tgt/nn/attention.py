"""
Node-pair multi-head attention of the edge-augmented graph transformer.

Per head:
    t_ij = q_i . k_j / sqrt(d_k) + b_ij
    a_ij = softmax_j(t_ij + source mask) * sigmoid(g_ij)
    o_i  = s_i * sum_j a_ij v_j,   s_i = ln sum_j (1 + sigmoid(g_ij))

The node update projects the concatenated o_i, the pair update projects the
concatenated pre-mask logits t_ij.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from tgt.nn.dropout import DropoutContext
from tgt.nn.module import Linear, Module
from tgt.tensor import Tensor, ops


@dataclass
class AttentionOutput:
    node_update: Tensor
    pair_update: Tensor
    centrality: Tensor  # (H, N)
    weights: Tensor  # (H, N, N), after gating and dropout


class EGTAttention(Module):
    def __init__(self, node_dim: int, edge_dim: int, num_heads: int, rng: np.random.Generator):
        super().__init__()
        self.num_heads = num_heads
        self.head_dim = node_dim // num_heads
        self.query = Linear(node_dim, node_dim, rng)
        self.key = Linear(node_dim, node_dim, rng)
        self.value = Linear(node_dim, node_dim, rng)
        self.bias = Linear(edge_dim, num_heads, rng)
        self.gate = Linear(edge_dim, num_heads, rng)
        self.node_out = Linear(node_dim, node_dim, rng)
        self.pair_out = Linear(num_heads, edge_dim, rng)

    def _heads(self, x: Tensor) -> Tensor:
        n = x.shape[0]
        return ops.transpose(ops.reshape(x, (n, self.num_heads, self.head_dim)), (1, 0, 2))

    def forward(
        self,
        h: Tensor,
        e: Tensor,
        source_mask: Optional[np.ndarray] = None,
        drop: Optional[DropoutContext] = None,
    ) -> AttentionOutput:
        n = h.shape[0]
        q, k, v = self._heads(self.query(h)), self._heads(self.key(h)), self._heads(self.value(h))

        logits = ops.matmul(q, ops.transpose(k, (0, 2, 1))) / np.sqrt(self.head_dim)
        logits = logits + ops.transpose(self.bias(e), (2, 0, 1))
        gates = ops.sigmoid(ops.transpose(self.gate(e), (2, 0, 1)))

        masked = logits
        keep = np.ones(n, dtype=logits.dtype)
        if source_mask is not None and source_mask.any():
            masked = ops.masked_fill(logits, source_mask[None, None, :])
            keep = (~source_mask).astype(logits.dtype)

        weights = ops.softmax(masked, axis=-1) * gates
        if drop is not None:
            weights = drop.attention(weights)

        # dropped columns contribute to neither the weights nor the scaler
        centrality = ops.log(ops.sum((gates + 1.0) * keep, axis=-1, keepdims=True))
        o = ops.matmul(weights, v) * centrality
        o = ops.reshape(ops.transpose(o, (1, 0, 2)), (n, self.num_heads * self.head_dim))

        return AttentionOutput(
            node_update=self.node_out(o),
            pair_update=self.pair_out(ops.transpose(logits, (1, 2, 0))),
            centrality=ops.reshape(centrality, (self.num_heads, n)),
            weights=weights,
        )
