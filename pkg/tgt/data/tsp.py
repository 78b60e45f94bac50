"""
Euclidean TSP instances on K-NN graphs with tour-membership edge labels.

Labels are exact (Held-Karp bitmask DP) up to EXACT_ORACLE_CAP points; larger instances
use a nearest-neighbour tour improved by 2-opt and are flagged as non-exact.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import structlog

from tgt.core.exceptions import GraphDataError, OracleCapacityError
from tgt.data.generators import knn_edges
from tgt.data.graph import GraphInstance, pairwise_distances

logger = structlog.get_logger(__name__)

EXACT_ORACLE_CAP = 16
TSP_MAX_HOPS = 16


@dataclass
class TSPInstance:
    points: np.ndarray
    k: int
    optimal_tour: np.ndarray
    tour_length: float
    exact: bool
    graph: GraphInstance


def tour_length(distances: np.ndarray, tour: Sequence[int]) -> float:
    tour = np.asarray(tour)
    return float(distances[tour, np.roll(tour, -1)].sum())


def held_karp(distances: np.ndarray) -> Tuple[float, List[int]]:
    """Exact shortest Hamiltonian cycle starting at node 0"""
    m = len(distances)
    if m > EXACT_ORACLE_CAP:
        raise OracleCapacityError(
            f"{m} points exceed the exact oracle cap of {EXACT_ORACLE_CAP}; "
            "use heuristic labels (exact=False)",
            points=m,
        )
    if m <= 2:
        return tour_length(distances, list(range(m))), list(range(m))

    full = 1 << m
    cost = np.full((full, m), np.inf)
    parent = np.full((full, m), -1, dtype=np.int64)
    cost[1, 0] = 0.0
    nodes = np.arange(m)
    # subsets always contain node 0, i.e. odd masks; mask ^ bit < mask keeps the order valid
    for mask in range(3, full, 2):
        ends = nodes[((mask >> nodes) & 1).astype(bool)]
        ends = ends[ends != 0]
        previous = mask ^ (1 << ends)
        candidates = cost[previous] + distances[:, ends].T
        best = candidates.argmin(axis=1)
        cost[mask, ends] = candidates[np.arange(len(ends)), best]
        parent[mask, ends] = best

    last_mask = full - 1
    closing = cost[last_mask] + distances[:, 0]
    last = int(closing.argmin())
    length = float(closing[last])

    tour = []
    mask, node = last_mask, last
    while node != 0:
        tour.append(node)
        node, mask = int(parent[mask, node]), mask ^ (1 << node)
    tour.append(0)
    return length, tour[::-1]


def nearest_neighbour_tour(distances: np.ndarray) -> List[int]:
    m = len(distances)
    tour = [0]
    visited = np.zeros(m, dtype=bool)
    visited[0] = True
    for _ in range(m - 1):
        row = np.where(visited, np.inf, distances[tour[-1]])
        nxt = int(row.argmin())
        tour.append(nxt)
        visited[nxt] = True
    return tour


def two_opt(distances: np.ndarray, tour: Sequence[int], tolerance: float = 1e-12) -> List[int]:
    """Reverse segments while any 2-opt move shortens the tour"""
    tour = list(tour)
    m = len(tour)
    improved = True
    while improved:
        improved = False
        for i in range(1, m - 1):
            a, b = tour[i - 1], tour[i]
            for j in range(i + 1, m):
                c, d = tour[j], tour[(j + 1) % m]
                delta = distances[a, c] + distances[b, d] - distances[a, b] - distances[c, d]
                if delta < -tolerance:
                    tour[i : j + 1] = reversed(tour[i : j + 1])
                    a, b = tour[i - 1], tour[i]
                    improved = True
    return tour


def tour_edge_labels(m: int, tour: Sequence[int], adjacency: np.ndarray) -> np.ndarray:
    """1 for K-NN pairs that are consecutive in the tour, 0 elsewhere"""
    labels = np.zeros((m, m), dtype=np.int64)
    tour = np.asarray(tour)
    nxt = np.roll(tour, -1)
    labels[tour, nxt] = 1
    labels[nxt, tour] = 1
    return labels * adjacency


def gen_tsp_instance(
    m: int,
    k: int,
    seed: int,
    exact: bool = True,
    graph_id: int = 0,
    max_hops: int = TSP_MAX_HOPS,
) -> TSPInstance:
    if not 0 < k < m:
        raise GraphDataError(f"need 0 < k < m, got k={k}, m={m}")
    if exact and m > EXACT_ORACLE_CAP:
        raise OracleCapacityError(
            f"{m} points exceed the exact oracle cap of {EXACT_ORACLE_CAP}; "
            "request heuristic 2-opt labels with exact=False",
            points=m,
        )
    rng = np.random.default_rng(seed)
    points = rng.uniform(0.0, 1.0, size=(m, 2))
    return tsp_instance_from_points(points, k, exact=exact, graph_id=graph_id, max_hops=max_hops)


def tsp_instance_from_points(
    points: np.ndarray,
    k: int,
    exact: bool = True,
    graph_id: int = 0,
    max_hops: int = TSP_MAX_HOPS,
) -> TSPInstance:
    points = np.asarray(points, dtype=np.float64)
    m = len(points)
    distances = pairwise_distances(points)
    if exact:
        length, tour = held_karp(distances)
    else:
        tour = two_opt(distances, nearest_neighbour_tour(distances))
        length = tour_length(distances, tour)

    graph = GraphInstance.build(
        node_types=np.zeros(m, dtype=np.int64),
        edges=knn_edges(distances, k),
        max_hops=max_hops,
        coords=points,
        target_distances=distances,
        node_features=points,
        graph_id=graph_id,
        metadata={"exact_labels": exact, "tour_length": length},
    )
    graph.edge_labels = tour_edge_labels(m, tour, graph.adjacency())
    return TSPInstance(
        points=points,
        k=k,
        optimal_tour=np.asarray(tour, dtype=np.int64),
        tour_length=length,
        exact=exact,
        graph=graph,
    )


def _generate_graph(args: Tuple[int, int, int, int, bool]) -> GraphInstance:
    graph_id, m, k, seed, exact = args
    return gen_tsp_instance(m, k, seed, exact=exact, graph_id=graph_id).graph


def gen_tsp_dataset(
    count: int, m: int, k: int, seed: int, exact: bool = True, workers: int = 1, first_id: int = 0
) -> List[GraphInstance]:
    seeds = np.random.SeedSequence(seed).generate_state(count, dtype=np.uint64)
    tasks = [(first_id + i, m, k, int(s), exact) for i, s in enumerate(seeds)]
    if workers > 1 and count > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            graphs = list(executor.map(_generate_graph, tasks, chunksize=max(1, count // workers)))
    else:
        graphs = [_generate_graph(task) for task in tasks]
    logger.info("tsp_dataset_generated", count=count, points=m, neighbors=k, exact=exact)
    return graphs
