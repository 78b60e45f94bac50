"""
Locally smoothed coordinate noise.

    r_i' = r_i + sum_j exp(-||r_i - r_j|| / nu) u_j,    u_j ~ N(0, sigma^2 I)

The j = i term is included, so nearby atoms move together while distant ones move
independently; nu -> 0 recovers i.i.d. Gaussian noise and nu -> inf a rigid translation.
"""
import numpy as np

from tgt.core.config import NoiseConfig
from tgt.data.graph import pairwise_distances


def smoothing_weights(coords: np.ndarray, nu: float) -> np.ndarray:
    return np.exp(-pairwise_distances(coords) / nu)


def smooth_noise(coords: np.ndarray, config: NoiseConfig, rng: np.random.Generator) -> np.ndarray:
    """Noised copy of ``coords`` (N x D)"""
    coords = np.asarray(coords, dtype=np.float64)
    u = rng.normal(0.0, 1.0, size=coords.shape) * config.sigma
    if config.mode == "random":
        return coords + u
    return coords + smoothing_weights(coords, config.nu) @ u


def noised_distances(
    coords: np.ndarray, config: NoiseConfig, rng: np.random.Generator
) -> np.ndarray:
    """Distances recomputed from noised coordinates"""
    return pairwise_distances(smooth_noise(coords, config, rng))
