"""
Continuous distance encodings and distance binning.

RBF:      o^k = exp(-0.5 ((m^k_ij d + b^k_ij - mu^k) / |sigma^k|)^2) / (sqrt(2 pi) |sigma^k|)
          with m, b looked up per ordered pair of node types, followed by a two-layer MLP.
Fourier:  phi^k = 2 pi d / lambda_k, features [sin phi, cos phi], followed by a linear layer.
"""
from typing import Optional, Union

import numpy as np

from tgt.core.config import BinSpec, TGTConfig
from tgt.nn.module import Embedding, Linear, Module
from tgt.tensor import Tensor, ops

SIGMA_FLOOR = 1e-4
_SQRT_2PI = np.sqrt(2.0 * np.pi)

Distances = Union[Tensor, np.ndarray]


def bin_distance(d: Union[float, np.ndarray], spec: BinSpec) -> np.ndarray:
    """Bin index, clipped to the last bin at and beyond d_max"""
    d = np.asarray(d, dtype=np.float64)
    index = np.floor(d * spec.num_bins / spec.d_max)
    return np.minimum(index, spec.num_bins - 1).astype(np.int64)


def bin_center(index: Union[int, np.ndarray], spec: BinSpec) -> np.ndarray:
    return (np.asarray(index, dtype=np.float64) + 0.5) * spec.width


def pair_type_index(node_types: np.ndarray, num_types: int) -> np.ndarray:
    """type_i * T + type_j for every ordered pair"""
    node_types = np.asarray(node_types, dtype=np.int64)
    return node_types[:, None] * num_types + node_types[None, :]


def _distance_tensor(d: Distances) -> Tensor:
    d = d if isinstance(d, Tensor) else Tensor(d)
    return ops.reshape(d, d.shape + (1,))


class RBFEncoding(Module):
    """Gaussian kernels with pair-type dependent affine maps of the distance"""

    def __init__(
        self,
        num_kernels: int,
        num_types: int,
        out_dim: int,
        rng: np.random.Generator,
        d_max: float = 8.0,
    ):
        super().__init__()
        self.num_kernels = num_kernels
        self.num_types = num_types
        self.register_parameter("mu", rng.uniform(0.0, d_max, num_kernels))
        self.register_parameter("sigma", rng.uniform(0.5, 1.5, num_kernels))
        self.mul = Embedding(num_types * num_types, num_kernels, rng)
        self.shift = Embedding(num_types * num_types, num_kernels, rng)
        self.mul.weight.data[...] = 1.0
        self.shift.weight.data[...] = 0.0
        self.hidden = Linear(num_kernels, out_dim, rng)
        self.out = Linear(out_dim, out_dim, rng)

    def kernels(self, d: Distances, pair_types: np.ndarray) -> Tensor:
        """Raw kernel values, shape d.shape + (K,)"""
        d = _distance_tensor(d)
        width = ops.abs(self.sigma)
        width = ops.masked_fill(width, width.data < SIGMA_FLOOR, SIGMA_FLOOR)
        z = (self.mul(pair_types) * d + self.shift(pair_types) - self.mu) / width
        return ops.exp(z * z * -0.5) / (width * _SQRT_2PI)

    def forward(self, d: Distances, node_types: np.ndarray) -> Tensor:
        pair_types = pair_type_index(node_types, self.num_types)
        return self.out(ops.gelu(self.hidden(self.kernels(d, pair_types))))


class FourierEncoding(Module):
    """Sinusoids with fixed log-spaced wavelengths in [2 delta_min, 2 delta_max]"""

    def __init__(
        self,
        num_kernels: int,
        out_dim: int,
        rng: np.random.Generator,
        delta_min: float = 0.1,
        delta_max: float = 8.0,
    ):
        super().__init__()
        self.wavelengths = np.geomspace(2.0 * delta_min, 2.0 * delta_max, num_kernels)
        self.proj = Linear(2 * num_kernels, out_dim, rng)

    def features(self, d: Distances) -> Tensor:
        """[sin phi_1..phi_K, cos phi_1..phi_K]"""
        phase = _distance_tensor(d) * (2.0 * np.pi / self.wavelengths)
        return ops.concat([ops.sin(phase), ops.cos(phase)], axis=-1)

    def forward(self, d: Distances, node_types: Optional[np.ndarray] = None) -> Tensor:
        return self.proj(self.features(d))


def build_distance_encoding(config: TGTConfig, rng: np.random.Generator) -> Optional[Module]:
    if config.encoding == "rbf":
        return RBFEncoding(
            config.rbf_kernels,
            config.num_node_types,
            config.edge_dim,
            rng,
            d_max=config.bins.d_max,
        )
    if config.encoding == "fourier":
        return FourierEncoding(
            config.fourier_kernels,
            config.edge_dim,
            rng,
            delta_min=config.fourier_min,
            delta_max=config.fourier_max or config.bins.d_max,
        )
    return None
