"""
Third-order pair interactions: pair (i, j) is updated from the pairs (j, k) and (i, k)
(inward) or (k, j) and (k, i) (outward) of every node triplet.

    triplet attention    a_ijk = softmax_k(q_ij . p_jk / sqrt(d) + b_ik) sigmoid(g_ik)
                         o_ij  = sum_k a_ijk v_jk
    triplet aggregation  a_ik  = softmax_k(b_ik) sigmoid(g_ik),  o_ij = sum_k a_ik v_jk
    axial attention      triplet attention without bias and gate
    triangular update    o_ij = sum_k a_ik b_jk and o'_ij = sum_k a'_ki b'_kj per channel set

Attention tensors are laid out [head, j, i, k] so that every contraction is a batched
matrix product; aggregation weights do not depend on j and collapse to [head, i, k].
Self-pairs take part in every sum.
"""
from typing import Optional

import numpy as np

from tgt.core.config import TGTConfig
from tgt.nn.dropout import DropoutContext
from tgt.nn.module import Linear, Module
from tgt.tensor import Tensor, ops

# (k, j, h, d) pair-major -> head-major layouts, per direction
_KEYS = {"inward": (2, 0, 3, 1), "outward": (2, 1, 3, 0)}  # (h, j, d, k)
_VALUES = {"inward": (2, 0, 1, 3), "outward": (2, 1, 0, 3)}  # (h, j, k, d)
_SCALARS = {"inward": (2, 0, 1), "outward": (2, 1, 0)}  # (h, i, k)
_AGG_VALUES = {"inward": (2, 3, 1, 0), "outward": (2, 3, 0, 1)}  # (h, d, k, j)


class TripletProjections(Module):
    """Per-direction projections of the pair embeddings"""

    def __init__(
        self,
        edge_dim: int,
        num_heads: int,
        rng: np.random.Generator,
        attend: bool = True,
        use_bias: bool = True,
        gated: bool = True,
    ):
        super().__init__()
        self.num_heads = num_heads
        self.head_dim = edge_dim // num_heads
        if attend:
            self.query = Linear(edge_dim, edge_dim, rng)
            self.key = Linear(edge_dim, edge_dim, rng)
        self.value = Linear(edge_dim, edge_dim, rng)
        if use_bias:
            self.bias = Linear(edge_dim, num_heads, rng)
        if gated:
            self.gate = Linear(edge_dim, num_heads, rng)

    def split(self, projection: Linear, e: Tensor) -> Tensor:
        n = e.shape[0]
        return ops.reshape(projection(e), (n, n, self.num_heads, self.head_dim))


def _empty_update(e: Tensor) -> Tensor:
    return Tensor(np.zeros(e.shape, dtype=e.dtype))


class TripletAttention(Module):
    """
    Gated triplet attention (``use_bias`` and ``gated``), its ungated variant, or axial
    attention (neither bias nor gate).
    """

    def __init__(
        self,
        edge_dim: int,
        num_heads: int,
        rng: np.random.Generator,
        use_bias: bool = True,
        gated: bool = True,
    ):
        super().__init__()
        self.num_heads = num_heads
        self.use_bias = use_bias
        self.gated = gated
        self.inward = TripletProjections(edge_dim, num_heads, rng, True, use_bias, gated)
        self.outward = TripletProjections(edge_dim, num_heads, rng, True, use_bias, gated)
        self.out = Linear(2 * edge_dim, edge_dim, rng)

    def weights(self, e: Tensor, direction: str) -> Tensor:
        """Interaction weights laid out (h, j, i, k)"""
        proj: TripletProjections = getattr(self, direction)
        n = e.shape[0]
        q = ops.transpose(proj.split(proj.query, e), (2, 1, 0, 3))  # (h, j, i, d)
        p = ops.transpose(proj.split(proj.key, e), _KEYS[direction])
        logits = ops.matmul(q, p) / np.sqrt(proj.head_dim)
        if self.use_bias:
            b = ops.transpose(proj.bias(e), _SCALARS[direction])
            logits = logits + ops.reshape(b, (self.num_heads, 1, n, n))
        weights = ops.softmax(logits, axis=-1)
        if self.gated:
            g = ops.sigmoid(ops.transpose(proj.gate(e), _SCALARS[direction]))
            weights = weights * ops.reshape(g, (self.num_heads, 1, n, n))
        return weights

    def direction(self, e: Tensor, direction: str, drop: Optional[DropoutContext]) -> Tensor:
        proj: TripletProjections = getattr(self, direction)
        n = e.shape[0]
        weights = self.weights(e, direction)
        if drop is not None:
            weights = drop.triplet(weights)
        v = ops.transpose(proj.split(proj.value, e), _VALUES[direction])
        o = ops.matmul(weights, v)  # (h, j, i, d)
        return ops.reshape(ops.transpose(o, (2, 1, 0, 3)), (n, n, -1))

    def forward(self, e: Tensor, drop: Optional[DropoutContext] = None) -> Tensor:
        if e.shape[0] == 0:
            return _empty_update(e)
        both = [self.direction(e, "inward", drop), self.direction(e, "outward", drop)]
        return self.out(ops.concat(both, axis=-1))


class TripletAggregation(Module):
    """Attention weights from pair biases alone; one matrix product per head and direction"""

    def __init__(self, edge_dim: int, num_heads: int, rng: np.random.Generator, gated: bool = True):
        super().__init__()
        self.num_heads = num_heads
        self.gated = gated
        self.inward = TripletProjections(edge_dim, num_heads, rng, False, True, gated)
        self.outward = TripletProjections(edge_dim, num_heads, rng, False, True, gated)
        self.out = Linear(2 * edge_dim, edge_dim, rng)

    def weights(self, e: Tensor, direction: str) -> Tensor:
        """Aggregation weights laid out (h, i, k)"""
        proj: TripletProjections = getattr(self, direction)
        weights = ops.softmax(ops.transpose(proj.bias(e), _SCALARS[direction]), axis=-1)
        if self.gated:
            weights = weights * ops.sigmoid(ops.transpose(proj.gate(e), _SCALARS[direction]))
        return weights

    def direction(self, e: Tensor, direction: str, drop: Optional[DropoutContext]) -> Tensor:
        proj: TripletProjections = getattr(self, direction)
        n = e.shape[0]
        weights = self.weights(e, direction)
        if drop is not None:
            weights = drop.triplet(weights)
        v = ops.transpose(proj.split(proj.value, e), _AGG_VALUES[direction])  # (h, d, k, j)
        a = ops.reshape(weights, (self.num_heads, 1, n, n))
        o = ops.matmul(a, v)  # (h, d, i, j)
        return ops.reshape(ops.transpose(o, (2, 3, 0, 1)), (n, n, -1))

    def forward(self, e: Tensor, drop: Optional[DropoutContext] = None) -> Tensor:
        if e.shape[0] == 0:
            return _empty_update(e)
        both = [self.direction(e, "inward", drop), self.direction(e, "outward", drop)]
        return self.out(ops.concat(both, axis=-1))


class TriangularUpdate(Module):
    """Multiplicative update over outgoing and incoming edges, no output gate"""

    def __init__(self, edge_dim: int, sets: int, rng: np.random.Generator):
        super().__init__()
        self.sets = sets
        self.left_out = Linear(edge_dim, sets, rng)
        self.right_out = Linear(edge_dim, sets, rng)
        self.left_in = Linear(edge_dim, sets, rng)
        self.right_in = Linear(edge_dim, sets, rng)
        self.out = Linear(2 * sets, edge_dim, rng)

    def forward(self, e: Tensor, drop: Optional[DropoutContext] = None) -> Tensor:
        if e.shape[0] == 0:
            return _empty_update(e)
        outgoing = ops.einsum("iks,jks->ijs", self.left_out(e), self.right_out(e))
        incoming = ops.einsum("kis,kjs->ijs", self.left_in(e), self.right_in(e))
        return self.out(ops.concat([outgoing, incoming], axis=-1))


def build_interaction(config: TGTConfig, rng: np.random.Generator) -> Optional[Module]:
    """Third-order module for ``config.variant``; None for the pairwise-only baseline"""
    variant = config.variant
    if variant == "none":
        return None
    if variant == "triangular":
        return TriangularUpdate(config.edge_dim, config.sets, rng)
    if variant in ("triplet_agg", "ungated_agg"):
        return TripletAggregation(
            config.edge_dim, config.triplet_heads, rng, gated=variant == "triplet_agg"
        )
    return TripletAttention(
        config.edge_dim,
        config.triplet_heads,
        rng,
        use_bias=variant != "axial",
        gated=variant == "triplet_att",
    )
