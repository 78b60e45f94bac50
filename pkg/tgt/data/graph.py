"""
Graph data model and shortest-path hop encoding.
"""
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path
from scipy.spatial.distance import cdist

from tgt.core.exceptions import GraphDataError


def _edge_array(edges: Iterable[Sequence[int]]) -> np.ndarray:
    rows = [tuple(int(v) for v in edge) for edge in edges]
    if not rows:
        return np.zeros((0, 3), dtype=np.int64)
    array = np.asarray(rows, dtype=np.int64)
    if array.shape[1] == 2:
        array = np.concatenate([array, np.zeros((len(array), 1), dtype=np.int64)], axis=1)
    if array.ndim != 2 or array.shape[1] != 3:
        raise GraphDataError(f"edges must be (i, j) or (i, j, bond_type) tuples, got {array.shape}")
    return array


def compute_hops(edges: Iterable[Sequence[int]], n: int, max_hops: int) -> np.ndarray:
    """
    Shortest-path hop counts clipped to ``max_hops``.
    Unreachable pairs get the dedicated bucket ``max_hops + 1``.
    """
    if max_hops < 1:
        raise GraphDataError(f"max_hops must be at least 1, got {max_hops}")
    array = _edge_array(edges)
    if len(array):
        if array[:, :2].min() < 0 or array[:, :2].max() >= n:
            raise GraphDataError(f"edge endpoint outside [0, {n})")
        if np.any(array[:, 0] == array[:, 1]):
            raise GraphDataError("self loops are not allowed in a simple graph")
    if n == 0:
        return np.zeros((0, 0), dtype=np.int64)

    adjacency = coo_matrix(
        (np.ones(len(array)), (array[:, 0], array[:, 1])), shape=(n, n)
    ).tocsr()
    lengths = shortest_path(adjacency, method="D", directed=False, unweighted=True)
    hops = np.where(np.isinf(lengths), max_hops + 1, np.minimum(lengths, max_hops))
    return hops.astype(np.int64)


def pairwise_distances(coords: np.ndarray) -> np.ndarray:
    coords = np.asarray(coords, dtype=np.float64)
    distances = cdist(coords, coords)
    np.fill_diagonal(distances, 0.0)
    return distances


@dataclass
class GraphInstance:
    """One graph with categorical features, hop matrix and optional geometry/targets"""

    node_types: np.ndarray
    edge_list: np.ndarray
    hop: np.ndarray
    max_hops: int
    coords: Optional[np.ndarray] = None
    target_distances: Optional[np.ndarray] = None
    target_scalar: Optional[float] = None
    edge_labels: Optional[np.ndarray] = None
    node_features: Optional[np.ndarray] = None
    graph_id: int = 0
    metadata: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        node_types: Sequence[int],
        edges: Iterable[Sequence[int]],
        max_hops: int = 32,
        **fields: Any,
    ) -> "GraphInstance":
        node_types = np.asarray(node_types, dtype=np.int64)
        edge_list = _edge_array(edges)
        hop = compute_hops(edge_list, len(node_types), max_hops)
        return cls(node_types=node_types, edge_list=edge_list, hop=hop, max_hops=max_hops, **fields)

    @property
    def n(self) -> int:
        return int(len(self.node_types))

    def adjacency(self) -> np.ndarray:
        adjacency = np.zeros((self.n, self.n), dtype=bool)
        if len(self.edge_list):
            adjacency[self.edge_list[:, 0], self.edge_list[:, 1]] = True
            adjacency[self.edge_list[:, 1], self.edge_list[:, 0]] = True
        return adjacency

    def edge_type_matrix(self) -> np.ndarray:
        """Bond type + 1 for every edge, 0 for non-edges"""
        types = np.zeros((self.n, self.n), dtype=np.int64)
        if len(self.edge_list):
            i, j, t = self.edge_list.T
            types[i, j] = t + 1
            types[j, i] = t + 1
        return types

    def validate(self, triangle_slack: float = 1e-9) -> None:
        hop = self.hop
        if hop.shape != (self.n, self.n):
            raise GraphDataError(f"hop matrix shape {hop.shape} does not match n={self.n}")
        if not np.array_equal(hop, hop.T) or np.any(np.diag(hop) != 0):
            raise GraphDataError("hop matrix must be symmetric with a zero diagonal")
        ones, adjacency = hop == 1, self.adjacency()
        # with max_hops = 1 every reachable pair is clipped to 1
        if np.any(adjacency & ~ones) or (self.max_hops > 1 and np.any(ones & ~adjacency)):
            raise GraphDataError("hop(i, j) = 1 must coincide with the edge list")
        d = self.target_distances
        if d is not None:
            if d.shape != (self.n, self.n):
                raise GraphDataError(f"target_distances shape {d.shape} does not match n={self.n}")
            if not np.allclose(d, d.T, atol=0.0) or np.any(np.diag(d) != 0):
                raise GraphDataError("target_distances must be symmetric with a zero diagonal")
            # d[i, j] <= d[i, k] + d[k, j] for every k
            if self.n and np.any(d[:, :, None] > d[:, None, :] + d.T[None, :, :] + triangle_slack):
                raise GraphDataError("target_distances violate the triangle inequality")

    def with_updates(self, **changes: Any) -> "GraphInstance":
        return replace(self, **changes)


@dataclass(frozen=True)
class GraphInputs:
    """Arrays consumed by the network for one graph"""

    node_types: np.ndarray
    edge_types: np.ndarray
    hops: np.ndarray
    distances: Optional[np.ndarray] = None
    node_features: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return int(len(self.node_types))

    def permuted(self, perm: Sequence[int]) -> "GraphInputs":
        """Relabel nodes: new node a is old node perm[a]"""
        perm = np.asarray(perm)
        pair = np.ix_(perm, perm)
        return GraphInputs(
            node_types=self.node_types[perm],
            edge_types=self.edge_types[pair],
            hops=self.hops[pair],
            distances=None if self.distances is None else self.distances[pair],
            node_features=None if self.node_features is None else self.node_features[perm],
        )


def featurize(
    graph: GraphInstance,
    distances: Optional[np.ndarray] = None,
    max_hops: Optional[int] = None,
) -> GraphInputs:
    """Turn a GraphInstance into network inputs, optionally with an input distance matrix"""
    hops = graph.hop
    if max_hops is not None and max_hops != graph.max_hops:
        hops = compute_hops(graph.edge_list, graph.n, max_hops)
    if distances is not None:
        distances = np.asarray(distances, dtype=np.float64)
        if distances.shape != (graph.n, graph.n):
            raise GraphDataError(
                f"input distances shape {distances.shape} does not match n={graph.n}"
            )
    return GraphInputs(
        node_types=graph.node_types,
        edge_types=graph.edge_type_matrix(),
        hops=hops,
        distances=distances,
        node_features=graph.node_features,
    )


def require(graph: GraphInstance, *names: str) -> Tuple[Any, ...]:
    """Fetch optional fields, failing with a data error when one is missing"""
    values = []
    for name in names:
        value = getattr(graph, name)
        if value is None:
            raise GraphDataError(f"graph {graph.graph_id} has no {name}", field=name)
        values.append(value)
    return tuple(values)
