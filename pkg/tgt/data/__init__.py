from tgt.data.generators import gen_geometry_dataset, gen_geometry_instance, inverse_distance_energy
from tgt.data.graph import (
    GraphInputs,
    GraphInstance,
    compute_hops,
    featurize,
    pairwise_distances,
)
from tgt.data.io import read_dataset, write_dataset
from tgt.data.noising import noised_distances, smooth_noise
from tgt.data.tsp import TSPInstance, gen_tsp_dataset, gen_tsp_instance, held_karp

__all__ = [
    "GraphInputs",
    "GraphInstance",
    "TSPInstance",
    "compute_hops",
    "featurize",
    "gen_geometry_dataset",
    "gen_geometry_instance",
    "gen_tsp_dataset",
    "gen_tsp_instance",
    "held_karp",
    "inverse_distance_energy",
    "noised_distances",
    "pairwise_distances",
    "read_dataset",
    "smooth_noise",
    "write_dataset",
]
