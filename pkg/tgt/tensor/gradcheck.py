"""
Central finite-difference oracle for reverse-mode gradients.
"""
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from tgt.core.exceptions import GradCheckError
from tgt.tensor.tensor import Tensor, no_grad

ScalarFn = Callable[..., Tensor]


def _as_leaves(point: Union[Tensor, np.ndarray, Sequence]) -> List[Tensor]:
    items = [point] if isinstance(point, (Tensor, np.ndarray)) else list(point)
    leaves = []
    for item in items:
        leaf = item if isinstance(item, Tensor) else Tensor(item, dtype=np.float64)
        if leaf.dtype != np.float64:
            raise GradCheckError(f"grad_check requires 64-bit tensors, got {leaf.dtype}")
        leaf.requires_grad = True
        leaf.grad = None
        leaves.append(leaf)
    return leaves


def _evaluate(function: ScalarFn, leaves: List[Tensor]) -> float:
    with no_grad():
        value = function(*leaves)
    if value.size != 1:
        raise GradCheckError(f"function must be scalar-valued, got shape {value.shape}")
    result = float(value.data.reshape(-1)[0])
    if not np.isfinite(result):
        raise GradCheckError("non-finite value in forward pass")
    return result


def grad_check(
    function: ScalarFn,
    point: Union[Tensor, np.ndarray, Sequence],
    step: float = 1e-6,
    max_coords: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """
    Compare backward() against central differences.

    Returns max over checked coordinates of
    |analytic - numeric| / max(1, |analytic|, |numeric|).
    Tensors in ``point`` are perturbed in place and restored, so closures over model
    parameters can ignore their positional arguments. With ``max_coords`` each tensor
    contributes at most that many randomly chosen coordinates.
    """
    leaves = _as_leaves(point)
    _evaluate(function, leaves)

    out = function(*leaves)
    out.backward()
    analytic = [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data) for leaf in leaves]

    rng = rng or np.random.default_rng(0)
    worst = 0.0
    for leaf, grad in zip(leaves, analytic):
        coords = np.arange(leaf.size)
        if max_coords is not None and leaf.size > max_coords:
            coords = rng.choice(leaf.size, size=max_coords, replace=False)
        for flat in coords:
            idx = np.unravel_index(int(flat), leaf.shape)
            original = leaf.data[idx]
            leaf.data[idx] = original + step
            plus = _evaluate(function, leaves)
            leaf.data[idx] = original - step
            minus = _evaluate(function, leaves)
            leaf.data[idx] = original
            numeric = (plus - minus) / (2.0 * step)
            exact = float(grad[idx])
            error = np.abs(exact - numeric) / max(1.0, np.abs(exact), np.abs(numeric))
            worst = max(worst, float(error))
    return worst
