"""
Tests for TSP instances and tour oracles
"""
from pathlib import Path

import numpy as np
import pytest

from tgt.core.config import load_run_config
from tgt.core.exceptions import OracleCapacityError
from tgt.data import gen_tsp_dataset, gen_tsp_instance, held_karp, pairwise_distances
from tgt.data.tsp import nearest_neighbour_tour, tour_length, two_opt
from tgt.models import TGT, count_params
from tgt.services.oracles import brute_force_tour_length
from tgt.services.training import StageTrainer

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.mark.parametrize("m", [3, 5, 7, 8])
def test_held_karp_matches_brute_force(rng, m):
    distances = pairwise_distances(rng.uniform(size=(m, 2)))
    length, tour = held_karp(distances)
    assert sorted(tour) == list(range(m))
    assert tour_length(distances, tour) == pytest.approx(length)
    assert length == pytest.approx(brute_force_tour_length(distances), abs=1e-12)


@pytest.mark.slow
def test_held_karp_matches_brute_force_on_eight_points():
    rng = np.random.default_rng(8)
    for _ in range(100):
        distances = pairwise_distances(rng.uniform(size=(8, 2)))
        length, _ = held_karp(distances)
        assert length == pytest.approx(brute_force_tour_length(distances), abs=1e-12)


def test_held_karp_cap():
    with pytest.raises(OracleCapacityError):
        held_karp(np.zeros((17, 17)))
    with pytest.raises(OracleCapacityError):
        gen_tsp_instance(20, 5, seed=0, exact=True)


def test_two_opt_never_lengthens(rng):
    distances = pairwise_distances(rng.uniform(size=(30, 2)))
    start = nearest_neighbour_tour(distances)
    improved = two_opt(distances, start)
    assert sorted(improved) == list(range(30))
    assert tour_length(distances, improved) <= tour_length(distances, start) + 1e-12


def test_edge_labels_follow_tour_and_graph():
    instance = gen_tsp_instance(10, 4, seed=2)
    graph = instance.graph
    graph.validate()
    labels = graph.edge_labels
    assert np.array_equal(labels, labels.T)
    assert np.all(labels[~graph.adjacency()] == 0)
    assert np.all(labels.sum(axis=1) <= 2)
    assert graph.metadata["exact_labels"] is True
    assert graph.max_hops == 16


def test_heuristic_labels_for_large_instances():
    instance = gen_tsp_instance(20, 5, seed=1, exact=False)
    assert instance.exact is False
    assert instance.graph.metadata["exact_labels"] is False
    assert sorted(instance.optimal_tour.tolist()) == list(range(20))


def test_dataset_is_reproducible():
    first = gen_tsp_dataset(3, 8, 3, seed=4)
    second = gen_tsp_dataset(3, 8, 3, seed=4)
    for a, b in zip(first, second):
        assert np.array_equal(a.coords, b.coords)
        assert np.array_equal(a.edge_labels, b.edge_labels)


def test_shipped_config_feeds_coordinates_and_distances():
    config = load_run_config(CONFIGS / "tsp.toml")
    assert 95_000 <= count_params(config.model) <= 105_000
    graph = gen_tsp_instance(12, 5, seed=0).graph
    trainer = StageTrainer(TGT(config.model), config.training)
    assert "target_distances" in trainer.required_fields()
    inputs = trainer.model_inputs(graph, np.random.default_rng(0))
    assert np.array_equal(inputs.distances, graph.target_distances)
    assert inputs.node_features.shape == (12, 2)
