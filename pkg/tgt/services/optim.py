"""
Adam with linear warmup and cosine decay, plus global-norm gradient clipping.
"""
import math
from typing import List, Optional, Sequence

import numpy as np

from tgt.core.config import StageConfig
from tgt.tensor import Tensor


def learning_rate(step: int, config: StageConfig) -> float:
    """Linear warmup to max_lr, then cosine decay to min_lr at the last step"""
    if config.warmup_steps and step < config.warmup_steps:
        return config.max_lr * (step + 1) / config.warmup_steps
    decay_steps = max(config.steps - config.warmup_steps, 1)
    progress = min(max(step - config.warmup_steps, 0) / decay_steps, 1.0)
    cosine = 0.5 * (1.0 + math.cos(math.pi * progress))
    return config.min_lr + (config.max_lr - config.min_lr) * cosine


def global_grad_norm(parameters: Sequence[Tensor]) -> float:
    total = 0.0
    for p in parameters:
        if p.grad is not None:
            total += float(np.sum(p.grad.astype(np.float64) ** 2))
    return math.sqrt(total)


def clip_grad_norm(parameters: Sequence[Tensor], max_norm: float) -> float:
    """Rescale gradients in place to global norm <= max_norm; returns the pre-clip norm"""
    norm = global_grad_norm(parameters)
    if norm > max_norm:
        scale = max_norm / norm
        for p in parameters:
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm


class Adam:
    def __init__(
        self,
        parameters: Sequence[Tensor],
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.parameters: List[Tensor] = list(parameters)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: List[Optional[np.ndarray]] = [None] * len(self.parameters)
        self.v: List[Optional[np.ndarray]] = [None] * len(self.parameters)

    @classmethod
    def from_config(cls, parameters: Sequence[Tensor], config: StageConfig) -> "Adam":
        return cls(parameters, config.beta1, config.beta2, config.eps)

    def step(self, lr: float) -> None:
        """Update in place; parameters without a gradient this step are left untouched"""
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for index, p in enumerate(self.parameters):
            if p.grad is None:
                continue
            if self.m[index] is None:
                self.m[index] = np.zeros_like(p.data)
                self.v[index] = np.zeros_like(p.data)
            m = self.m[index] = self.beta1 * self.m[index] + (1.0 - self.beta1) * p.grad
            v = self.v[index] = self.beta2 * self.v[index] + (1.0 - self.beta2) * p.grad**2
            p.data -= (lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)).astype(
                p.dtype
            )

    def zero_grad(self) -> None:
        for p in self.parameters:
            p.grad = None
