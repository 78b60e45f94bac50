"""
Explicit-loop reference implementations.

Each oracle reads the parameters of a vectorized module and recomputes its output
element by element with plain Python loops over heads and node indices, for comparison
against the batched tensor code on small graphs.
"""
import itertools
from typing import Optional, Tuple

import numpy as np

from tgt.nn import EGTAttention, Linear, TriangularUpdate, TripletAggregation, TripletAttention


def _linear(layer: Linear, x: np.ndarray) -> np.ndarray:
    out = x @ layer.weight.data
    if layer.bias is not None:
        out = out + layer.bias.data
    return out


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + np.exp(-x))


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = np.exp(x - np.max(x))
    return shifted / shifted.sum()


def egt_attention_loop(
    module: EGTAttention,
    h: np.ndarray,
    e: np.ndarray,
    source_mask: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(node update, pair update, centrality (H, N)) without dropout"""
    n = h.shape[0]
    heads, dk = module.num_heads, module.head_dim
    q = _linear(module.query, h).reshape(n, heads, dk)
    k = _linear(module.key, h).reshape(n, heads, dk)
    v = _linear(module.value, h).reshape(n, heads, dk)
    b = _linear(module.bias, e)
    g = _linear(module.gate, e)
    masked = np.zeros(n, dtype=bool) if source_mask is None else np.asarray(source_mask)

    o = np.zeros((n, heads, dk))
    t = np.zeros((n, n, heads))
    centrality = np.zeros((heads, n))
    for head in range(heads):
        for i in range(n):
            for j in range(n):
                t[i, j, head] = q[i, head] @ k[j, head] / np.sqrt(dk) + b[i, j, head]
            live = [j for j in range(n) if not masked[j]]
            weights = _softmax(np.array([t[i, j, head] for j in live]))
            scale = 0.0
            for j in live:
                scale += 1.0 + _sigmoid(g[i, j, head])
            centrality[head, i] = np.log(scale)
            for index, j in enumerate(live):
                o[i, head] += weights[index] * _sigmoid(g[i, j, head]) * v[j, head]
            o[i, head] *= centrality[head, i]

    node_update = _linear(module.node_out, o.reshape(n, heads * dk))
    pair_update = _linear(module.pair_out, t)
    return node_update, pair_update, centrality


def _triplet_direction_loop(
    module: TripletAttention, e: np.ndarray, direction: str
) -> np.ndarray:
    proj = getattr(module, direction)
    n = e.shape[0]
    heads, d = proj.num_heads, proj.head_dim
    q = _linear(proj.query, e).reshape(n, n, heads, d)
    p = _linear(proj.key, e).reshape(n, n, heads, d)
    v = _linear(proj.value, e).reshape(n, n, heads, d)
    b = _linear(proj.bias, e) if module.use_bias else np.zeros((n, n, heads))
    g = _linear(proj.gate, e) if module.gated else None

    inward = direction == "inward"
    o = np.zeros((n, n, heads, d))
    for head in range(heads):
        for i in range(n):
            for j in range(n):
                logits = np.zeros(n)
                for k in range(n):
                    key = p[j, k, head] if inward else p[k, j, head]
                    bias = b[i, k, head] if inward else b[k, i, head]
                    logits[k] = q[i, j, head] @ key / np.sqrt(d) + bias
                weights = _softmax(logits)
                for k in range(n):
                    a = weights[k]
                    if g is not None:
                        a *= _sigmoid(g[i, k, head] if inward else g[k, i, head])
                    o[i, j, head] += a * (v[j, k, head] if inward else v[k, j, head])
    return o.reshape(n, n, heads * d)


def triplet_attention_loop(module: TripletAttention, e: np.ndarray) -> np.ndarray:
    """Triplet attention, its ungated variant or axial attention, per the module's flags"""
    both = [
        _triplet_direction_loop(module, e, "inward"),
        _triplet_direction_loop(module, e, "outward"),
    ]
    return _linear(module.out, np.concatenate(both, axis=-1))


def _aggregation_direction_loop(
    module: TripletAggregation, e: np.ndarray, direction: str
) -> np.ndarray:
    proj = getattr(module, direction)
    n = e.shape[0]
    heads, d = proj.num_heads, proj.head_dim
    v = _linear(proj.value, e).reshape(n, n, heads, d)
    b = _linear(proj.bias, e)
    g = _linear(proj.gate, e) if module.gated else None

    inward = direction == "inward"
    o = np.zeros((n, n, heads, d))
    for head in range(heads):
        for i in range(n):
            scores = np.array([b[i, k, head] if inward else b[k, i, head] for k in range(n)])
            weights = _softmax(scores)
            for k in range(n):
                if g is not None:
                    weights[k] *= _sigmoid(g[i, k, head] if inward else g[k, i, head])
            for j in range(n):
                for k in range(n):
                    o[i, j, head] += weights[k] * (v[j, k, head] if inward else v[k, j, head])
    return o.reshape(n, n, heads * d)


def triplet_aggregation_loop(module: TripletAggregation, e: np.ndarray) -> np.ndarray:
    both = [
        _aggregation_direction_loop(module, e, "inward"),
        _aggregation_direction_loop(module, e, "outward"),
    ]
    return _linear(module.out, np.concatenate(both, axis=-1))


def triangular_update_loop(module: TriangularUpdate, e: np.ndarray) -> np.ndarray:
    n = e.shape[0]
    left_out, right_out = _linear(module.left_out, e), _linear(module.right_out, e)
    left_in, right_in = _linear(module.left_in, e), _linear(module.right_in, e)
    outgoing = np.zeros((n, n, module.sets))
    incoming = np.zeros((n, n, module.sets))
    for s in range(module.sets):
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    outgoing[i, j, s] += left_out[i, k, s] * right_out[j, k, s]
                    incoming[i, j, s] += left_in[k, i, s] * right_in[k, j, s]
    return _linear(module.out, np.concatenate([outgoing, incoming], axis=-1))


def floyd_warshall_hops(edges, n: int, max_hops: int) -> np.ndarray:
    """Hop counts by relaxation over every intermediate node; unreachable -> max_hops + 1"""
    dist = np.full((n, n), np.inf)
    for i in range(n):
        dist[i, i] = 0.0
    for edge in edges:
        i, j = int(edge[0]), int(edge[1])
        dist[i, j] = dist[j, i] = 1.0
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if dist[i, k] + dist[k, j] < dist[i, j]:
                    dist[i, j] = dist[i, k] + dist[k, j]
    hops = np.where(np.isinf(dist), max_hops + 1, np.minimum(dist, max_hops))
    return hops.astype(np.int64)


def brute_force_tour_length(distances: np.ndarray) -> float:
    """Shortest Hamiltonian cycle over all orderings with node 0 fixed first"""
    m = len(distances)
    if m <= 2:
        return float(sum(distances[i, (i + 1) % m] for i in range(m)))
    best = np.inf
    for rest in itertools.permutations(range(1, m)):
        tour = (0,) + rest
        length = sum(distances[tour[i], tour[(i + 1) % m]] for i in range(m))
        best = min(best, length)
    return float(best)
