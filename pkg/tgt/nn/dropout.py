"""
Dropout schemes as explicit masks.

Every mask is drawn from a caller-supplied generator and enters the graph as a constant
tensor, so a stochastic forward pass is reproducible from its seed. All schemes use
inverted scaling 1/(1-p), keeping expectations unchanged.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from tgt.core.config import DropoutSpec
from tgt.tensor import Tensor


def source_dropout_mask(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Boolean column mask (True = dropped key/value node); at least one column survives"""
    if p <= 0.0 or n == 0:
        return np.zeros(n, dtype=bool)
    while True:
        mask = rng.random(n) < p
        if not mask.all():
            return mask


def keep_mask(shape, p: float, rng: np.random.Generator, dtype) -> np.ndarray:
    """Bernoulli(1-p) mask pre-multiplied by 1/(1-p)"""
    return (rng.random(shape) >= p).astype(dtype) / (1.0 - p)


def dropout(x: Tensor, p: float, rng: Optional[np.random.Generator]) -> Tensor:
    if rng is None or p <= 0.0:
        return x
    return x * keep_mask(x.shape, p, rng, x.dtype)


def triplet_dropout(weights: Tensor, p: float, rng: Optional[np.random.Generator]) -> Tensor:
    """Independent Bernoulli masking of third-order interaction weights"""
    return dropout(weights, p, rng)


def path_scale(p: float, rng: np.random.Generator) -> float:
    """One per-sample draw: 0 with probability p, else 1/(1-p)"""
    return float(rng.random() >= p) / (1.0 - p)


def path_drop(update: Tensor, p: float, rng: Optional[np.random.Generator]) -> Tensor:
    """Drop the whole residual update of one sample with probability p"""
    if rng is None or p <= 0.0:
        return update
    return update * path_scale(p, rng)


@dataclass
class DropoutContext:
    """Rates plus the generator of one stochastic forward pass"""

    spec: DropoutSpec
    rng: np.random.Generator

    def source_mask(self, n: int) -> Optional[np.ndarray]:
        if self.spec.source_p <= 0.0:
            return None
        return source_dropout_mask(n, self.spec.source_p, self.rng)

    def attention(self, weights: Tensor) -> Tensor:
        return dropout(weights, self.spec.attention_p, self.rng)

    def triplet(self, weights: Tensor) -> Tensor:
        return triplet_dropout(weights, self.spec.triplet_p, self.rng)

    def path(self, update: Tensor) -> Tensor:
        return path_drop(update, self.spec.path_p, self.rng)

    def block_scale(self) -> float:
        """Path-drop factor shared by all residual updates of one block"""
        if self.spec.path_p <= 0.0:
            return 1.0
        return path_scale(self.spec.path_p, self.rng)

    def activation(self, x: Tensor) -> Tensor:
        return dropout(x, self.spec.activation_p, self.rng)


def maybe_path(update: Tensor, drop: Optional[DropoutContext]) -> Tensor:
    return drop.path(update) if drop is not None else update
