"""
Tests for evaluation metrics
"""
import math

import numpy as np
import pytest

from tgt.core.config import BinSpec
from tgt.services import metrics


def test_mae_and_empty_inputs():
    assert metrics.mae([1.0, 3.0], [2.0, 2.0]) == 1.0
    assert math.isnan(metrics.mae([], []))
    assert math.isnan(metrics.ewt([], [], 0.1))


def test_ewt_percentage():
    assert metrics.ewt([1.0, 1.03], [1.0, 1.0], 0.02) == 50.0


def test_perfect_edge_f1():
    labels = np.zeros((5, 5), dtype=np.int64)
    for i in range(5):
        labels[i, (i + 1) % 5] = labels[(i + 1) % 5, i] = 1
    logits = np.where(labels == 1, 5.0, -5.0)
    assert metrics.edge_f1(logits, labels) == 100.0


def test_f1_counts_pairs_once():
    labels = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]])
    logits = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, -1.0], [1.0, -1.0, 0.0]])
    # one true positive (0, 1), one false positive (0, 2)
    assert metrics.edge_f1(logits, labels) == pytest.approx(100.0 * 2 / 3)
    candidates = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=bool)
    assert metrics.edge_f1(logits, labels, candidates) == 100.0


def test_f1_without_positives():
    assert metrics.binary_f1(np.zeros(4), np.zeros(4)) == 100.0


def test_distance_cross_entropy_of_uniform_logits(rng):
    spec = BinSpec(num_bins=32)
    distances = rng.uniform(0.0, 8.0, size=(4, 4))
    distances = (distances + distances.T) / 2
    value = metrics.distance_cross_entropy(np.zeros((4, 4, 32)), distances, spec)
    assert value == pytest.approx(math.log(32), abs=1e-12)


def test_spearman_of_monotone_relation():
    x = np.array([0.1, 0.4, 0.2, 0.9])
    assert metrics.spearman(x, np.exp(x)) == pytest.approx(1.0)
    assert metrics.spearman(x, -x) == pytest.approx(-1.0)
