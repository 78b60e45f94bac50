"""
Tests for distance binning and continuous distance encodings
"""
import numpy as np
import pytest

from tgt.core.config import BinSpec
from tgt.nn import FourierEncoding, RBFEncoding, bin_center, bin_distance, build_distance_encoding
from tgt.nn.encodings import pair_type_index
from tgt.tensor import Tensor, grad_check, ops


def test_bin_examples():
    spec = BinSpec(num_bins=256, d_max=8.0)
    assert spec.width == pytest.approx(0.03125)
    assert bin_distance(0.0, spec) == 0
    assert bin_distance(8.0, spec) == 255
    assert bin_distance(100.0, spec) == 255
    assert bin_distance(0.03125, spec) == 1


def test_binning_is_monotone_and_centers_round_trip(rng):
    spec = BinSpec()
    d = np.sort(rng.uniform(0.0, spec.d_max, size=5000))
    bins = bin_distance(d, spec)
    assert np.all(np.diff(bins) >= 0)
    assert np.max(np.abs(bin_center(bins, spec) - d)) <= spec.width / 2 + 1e-12


def test_pair_type_index():
    index = pair_type_index(np.array([0, 2]), 3)
    assert index.tolist() == [[0, 2], [6, 8]]


def test_rbf_kernels_at_initialization(rng):
    encoding = RBFEncoding(4, 2, 6, rng)
    d = rng.uniform(0.0, 8.0, size=(3, 3))
    node_types = np.array([0, 1, 1])
    kernels = encoding.kernels(d, pair_type_index(node_types, 2)).data
    sigma = np.abs(encoding.sigma.data)
    z = (d[..., None] - encoding.mu.data) / sigma
    expected = np.exp(-0.5 * z * z) / (np.sqrt(2.0 * np.pi) * sigma)
    np.testing.assert_allclose(kernels, expected, rtol=1e-12)
    assert encoding(d, node_types).shape == (3, 3, 6)


def test_rbf_gradients(rng):
    encoding = RBFEncoding(3, 2, 4, rng)
    node_types = np.array([0, 1, 0])
    d = rng.uniform(0.5, 4.0, size=(3, 3))

    def loss(distances):
        return ops.sum(encoding(distances, node_types))

    assert grad_check(loss, [d]) < 1e-6


def test_fourier_features(rng):
    encoding = FourierEncoding(5, 6, rng, delta_min=0.1, delta_max=8.0)
    features = encoding.features(np.zeros((2, 2))).data
    assert features.shape == (2, 2, 10)
    assert np.all(features[..., :5] == 0.0)
    assert np.all(features[..., 5:] == 1.0)
    assert encoding.wavelengths[0] == pytest.approx(0.2)
    assert encoding.wavelengths[-1] == pytest.approx(16.0)
    assert encoding(Tensor(np.ones((2, 2)))).shape == (2, 2, 6)


def test_encoding_factory(make_config, rng):
    assert isinstance(build_distance_encoding(make_config(), rng), RBFEncoding)
    fourier = build_distance_encoding(make_config(encoding="fourier"), rng)
    assert isinstance(fourier, FourierEncoding)
    assert build_distance_encoding(make_config(encoding="none"), rng) is None
