"""
Synthetic geometry dataset with exact ground truth.

Each instance is a random point cloud in a 3D box, connected as a symmetrized K-NN graph.
The scalar target is the energy-like sum of inverse pairwise distances, which depends only
on geometry and is exactly recomputable.
"""
from concurrent.futures import ProcessPoolExecutor
from typing import List, Tuple

import numpy as np
import structlog

from tgt.core.exceptions import GraphDataError
from tgt.data.graph import GraphInstance, pairwise_distances

logger = structlog.get_logger(__name__)

BOX_SIDE = 6.0
KNN_NEIGHBORS = 3
NUM_NODE_TYPES = 8
BOND_LENGTH_EDGES = (1.0, 2.0, 3.0)  # four buckets
MIN_SEPARATION = 0.5
MAX_RESAMPLES = 1000


def inverse_distance_energy(coords: np.ndarray) -> float:
    """sum over i<j of 1 / d_ij"""
    distances = pairwise_distances(coords)
    upper = distances[np.triu_indices(len(coords), k=1)]
    return float(np.sum(1.0 / upper))


def knn_edges(distances: np.ndarray, k: int) -> List[Tuple[int, int]]:
    """Undirected K-NN edges; (i, j) present when either endpoint lists the other"""
    n = len(distances)
    k = min(k, n - 1)
    masked = distances + np.diag(np.full(n, np.inf))
    neighbors = np.argsort(masked, axis=1, kind="stable")[:, :k]
    pairs = {(min(i, int(j)), max(i, int(j))) for i in range(n) for j in neighbors[i]}
    return sorted(pairs)


def quantize_bond(length: float) -> int:
    return int(np.digitize(length, BOND_LENGTH_EDGES))


def gen_geometry_instance(
    n: int, rng: np.random.Generator, graph_id: int = 0, max_hops: int = 32
) -> GraphInstance:
    for _ in range(MAX_RESAMPLES):
        coords = rng.uniform(0.0, BOX_SIDE, size=(n, 3))
        distances = pairwise_distances(coords)
        if n < 2 or distances[np.triu_indices(n, k=1)].min() >= MIN_SEPARATION:
            break
    else:
        raise GraphDataError(f"could not place {n} separated points after {MAX_RESAMPLES} draws")

    edges = [(i, j, quantize_bond(distances[i, j])) for i, j in knn_edges(distances, KNN_NEIGHBORS)]
    return GraphInstance.build(
        node_types=rng.integers(0, NUM_NODE_TYPES, size=n),
        edges=edges,
        max_hops=max_hops,
        coords=coords,
        target_distances=distances,
        target_scalar=inverse_distance_energy(coords),
        graph_id=graph_id,
    )


def _generate_one(args: Tuple[int, np.random.SeedSequence, Tuple[int, int], int]) -> GraphInstance:
    graph_id, seed_seq, n_range, max_hops = args
    rng = np.random.default_rng(seed_seq)
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    return gen_geometry_instance(n, rng, graph_id=graph_id, max_hops=max_hops)


def gen_geometry_dataset(
    count: int,
    n_range: Tuple[int, int],
    seed: int,
    max_hops: int = 32,
    workers: int = 1,
    first_id: int = 0,
) -> List[GraphInstance]:
    """Generate ``count`` instances; instance i depends only on (seed, i)"""
    low, high = n_range
    if not 4 <= low <= high <= 24:
        raise GraphDataError(f"n_range {n_range} must lie within [4, 24]")

    seeds = np.random.SeedSequence(seed).spawn(count)
    tasks = [(first_id + i, s, (low, high), max_hops) for i, s in enumerate(seeds)]
    if workers > 1 and count > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            graphs = list(executor.map(_generate_one, tasks, chunksize=max(1, count // workers)))
    else:
        graphs = [_generate_one(task) for task in tasks]

    logger.info("geometry_dataset_generated", count=count, n_range=list(n_range), seed=seed)
    return graphs
