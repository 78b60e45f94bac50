"""
Shared fixtures: 64-bit precision, seeded generators, small networks and graphs.
"""
import numpy as np
import pytest

from tgt.core.config import BinSpec, DropoutSpec, TGTConfig
from tgt.data import gen_geometry_dataset, gen_geometry_instance
from tgt.tensor import set_default_dtype


@pytest.fixture(autouse=True)
def float64_precision():
    set_default_dtype("float64")
    yield
    set_default_dtype("float64")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def make_config():
    """Factory for small network configs; keyword arguments override the defaults"""

    def factory(**overrides) -> TGTConfig:
        values = dict(
            num_layers=2,
            node_dim=16,
            edge_dim=8,
            num_heads=2,
            triplet_heads=2,
            variant="triplet_agg",
            node_ffn_dim=16,
            edge_ffn_dim=8,
            rbf_kernels=8,
            bins=BinSpec(num_bins=16, d_max=8.0),
            dropout=DropoutSpec(source_p=0.2, triplet_p=0.1, path_p=0.1, activation_p=0.1),
        )
        values.update(overrides)
        if values["variant"] == "none":
            values["triplet_heads"] = 0
        return TGTConfig(**values)

    return factory


@pytest.fixture
def graph(rng):
    return gen_geometry_instance(6, rng, graph_id=7)


@pytest.fixture
def graphs():
    return gen_geometry_dataset(6, (4, 6), seed=11)
