"""
Primitive tensor operations. Each one computes its forward value with NumPy and
registers a backward rule on the tape.
"""
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special

from tgt.core.exceptions import ShapeError
from tgt.tensor.tensor import ArrayLike, Tensor, as_tensor

Operand = Union[Tensor, ArrayLike]
Axis = Optional[Union[int, Tuple[int, ...]]]

_SQRT_2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


def _pair(a: Operand, b: Operand) -> Tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    b = as_tensor(b)
    return as_tensor(a, like=b), b


def _normalize_axes(axis: Axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    return tuple(sorted(a % ndim for a in axes))


# -- elementwise arithmetic ---------------------------------------------------


def add(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b)
    _check_broadcast("add", a, b)

    def backward(g: np.ndarray):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor.from_op(a.data + b.data, (a, b), backward, "add")


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b)
    _check_broadcast("sub", a, b)

    def backward(g: np.ndarray):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor.from_op(a.data - b.data, (a, b), backward, "sub")


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b)
    _check_broadcast("mul", a, b)

    def backward(g: np.ndarray):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return Tensor.from_op(a.data * b.data, (a, b), backward, "mul")


def div(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b)
    _check_broadcast("div", a, b)
    out = a.data / b.data

    def backward(g: np.ndarray):
        ga = _unbroadcast(g / b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(-g * out / b.data, b.shape) if b.requires_grad else None
        return ga, gb

    return Tensor.from_op(out, (a, b), backward, "div")


def neg(x: Tensor) -> Tensor:
    return Tensor.from_op(-x.data, (x,), lambda g: (-g,), "neg")


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return Tensor.from_op(out, (x,), lambda g: (g * out,), "exp")


def log(x: Tensor) -> Tensor:
    return Tensor.from_op(np.log(x.data), (x,), lambda g: (g / x.data,), "log")


def abs(x: Tensor) -> Tensor:
    return Tensor.from_op(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),), "abs")


def sin(x: Tensor) -> Tensor:
    return Tensor.from_op(np.sin(x.data), (x,), lambda g: (g * np.cos(x.data),), "sin")


def cos(x: Tensor) -> Tensor:
    return Tensor.from_op(np.cos(x.data), (x,), lambda g: (-g * np.sin(x.data),), "cos")


def sigmoid(x: Tensor) -> Tensor:
    out = special.expit(x.data)
    return Tensor.from_op(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def gelu(x: Tensor) -> Tensor:
    """Exact (erf) GELU"""
    cdf = 0.5 * (1.0 + special.erf(x.data / _SQRT_2))
    out = x.data * cdf

    def backward(g: np.ndarray):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
        return (g * (cdf + x.data * pdf),)

    return Tensor.from_op(out, (x,), backward, "gelu")


def masked_fill(x: Tensor, mask: np.ndarray, value: float = -np.inf) -> Tensor:
    """Replace entries where mask is true; no gradient flows through replaced entries"""
    mask = np.asarray(mask, dtype=bool)
    try:
        if np.broadcast_shapes(x.shape, mask.shape) != x.shape:
            raise ValueError
    except ValueError:
        raise ShapeError("masked_fill", x.shape, mask.shape) from None
    out = np.where(mask, np.asarray(value, dtype=x.dtype), x.data)
    return Tensor.from_op(
        out, (x,), lambda g: (np.where(mask, 0.0, g).astype(g.dtype),), "masked_fill"
    )


# -- shape manipulation -------------------------------------------------------


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeError("reshape", x.shape, tuple(shape)) from None
    return Tensor.from_op(out, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def transpose(x: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    axes = tuple(range(x.ndim))[::-1] if axes is None else tuple(axes)
    if sorted(a % max(x.ndim, 1) for a in axes) != list(range(x.ndim)):
        raise ShapeError("transpose", x.shape, detail=f"invalid axes {axes}")
    inverse = tuple(np.argsort(axes))
    return Tensor.from_op(
        np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),), "transpose"
    )


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = list(tensors)
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("concat", *(t.shape for t in tensors)) from None
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]

    def backward(g: np.ndarray):
        return tuple(np.split(g, cuts, axis=axis))

    return Tensor.from_op(out, tensors, backward, "concat")


# -- reductions ---------------------------------------------------------------


def sum(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, x.ndim)
    out = x.data.sum(axis=axes, keepdims=keepdims)

    def backward(g: np.ndarray):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape),)

    return Tensor.from_op(np.asarray(out), (x,), backward, "sum")


def mean(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    return div(sum(x, axis=axes, keepdims=keepdims), float(max(count, 1)))


# -- contractions -------------------------------------------------------------


def matmul(a: Operand, b: Operand) -> Tensor:
    """Matrix product over the last two axes, broadcasting leading (batch) axes"""
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape)
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeError("matmul", a.shape, b.shape, detail="batch axes") from None

    def backward(g: np.ndarray):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    return Tensor.from_op(np.matmul(a.data, b.data), (a, b), backward, "matmul")


def bmm(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product with identical batch axes"""
    if a.ndim != b.ndim or a.ndim < 3 or a.shape[:-2] != b.shape[:-2]:
        raise ShapeError("bmm", a.shape, b.shape)
    return matmul(a, b)


def _parse_subscripts(subscripts: str, count: int) -> Tuple[List[str], str]:
    if "->" not in subscripts or "." in subscripts:
        raise ValueError("einsum needs explicit output subscripts and no ellipsis")
    lhs, out = subscripts.replace(" ", "").split("->")
    inputs = lhs.split(",")
    if len(inputs) != count:
        raise ValueError(f"expected {count} operand subscripts, got {len(inputs)}")
    for term in inputs + [out]:
        if len(set(term)) != len(term):
            raise ValueError(f"repeated index in {term!r}")
    return inputs, out


def einsum(subscripts: str, a: Tensor, b: Tensor) -> Tensor:
    """Two-operand contraction over named axes, e.g. ``"hid,hjd->hij"``"""
    try:
        (sa, sb), out = _parse_subscripts(subscripts, 2)
    except ValueError as e:
        raise ShapeError("einsum", a.shape, b.shape, detail=str(e)) from None
    if set(sa) - set(sb) - set(out) or set(sb) - set(sa) - set(out):
        raise ShapeError(
            "einsum", a.shape, b.shape, detail="an index summed within one operand is unsupported"
        )
    try:
        data = np.einsum(subscripts, a.data, b.data, optimize=True)
    except ValueError as e:
        raise ShapeError("einsum", a.shape, b.shape, detail=str(e)) from None

    def backward(g: np.ndarray):
        ga = gb = None
        if a.requires_grad:
            ga = np.einsum(f"{out},{sb}->{sa}", g, b.data, optimize=True)
        if b.requires_grad:
            gb = np.einsum(f"{out},{sa}->{sb}", g, a.data, optimize=True)
        return ga, gb

    return Tensor.from_op(np.asarray(data), (a, b), backward, "einsum")


# -- normalization and activation ---------------------------------------------


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g: np.ndarray):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor.from_op(out, (x,), backward, "softmax")


def layer_norm(
    x: Tensor, weight: Optional[Tensor] = None, bias: Optional[Tensor] = None, eps: float = 1e-5
) -> Tensor:
    """Normalize over the last axis; a constant row normalizes to zeros"""
    for p in (weight, bias):
        if p is not None and p.shape != x.shape[-1:]:
            raise ShapeError("layer_norm", x.shape, p.shape)
    centered = x.data - x.data.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    x_hat = centered * inv_std
    out = x_hat
    if weight is not None:
        out = out * weight.data
    if bias is not None:
        out = out + bias.data
    parents = [x] + [p for p in (weight, bias) if p is not None]

    def backward(g: np.ndarray):
        g_hat = g * weight.data if weight is not None else g
        gx = inv_std * (
            g_hat
            - g_hat.mean(axis=-1, keepdims=True)
            - x_hat * (g_hat * x_hat).mean(axis=-1, keepdims=True)
        )
        grads = [gx]
        if weight is not None:
            grads.append(_unbroadcast(g * x_hat, weight.shape))
        if bias is not None:
            grads.append(_unbroadcast(g, bias.shape))
        return tuple(grads)

    return Tensor.from_op(out, parents, backward, "layer_norm")


def embedding(table: Tensor, indices: np.ndarray) -> Tensor:
    """Row lookup ``table[indices]``; repeated rows accumulate gradient"""
    indices = np.asarray(indices, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeError("embedding", table.shape, indices.shape, detail="table must be 2-D")
    if indices.size and (indices.min() < 0 or indices.max() >= table.shape[0]):
        raise ShapeError(
            "embedding",
            table.shape,
            indices.shape,
            detail=f"index range [{indices.min()}, {indices.max()}] outside table",
        )

    def backward(g: np.ndarray):
        gt = np.zeros_like(table.data)
        np.add.at(gt, indices, g)
        return (gt,)

    return Tensor.from_op(table.data[indices], (table,), backward, "embedding")


# -- losses -------------------------------------------------------------------


def _loss_weights(weights: Optional[np.ndarray], shape: Tuple[int, ...], dtype) -> np.ndarray:
    if weights is None:
        return np.ones(shape, dtype=dtype)
    weights = np.asarray(weights, dtype=dtype)
    if weights.shape != shape:
        raise ShapeError("loss weights", shape, weights.shape)
    return weights


def cross_entropy(
    logits: Tensor, targets: np.ndarray, weights: Optional[np.ndarray] = None
) -> Tensor:
    """Weighted mean of -log softmax(logits)[target] over all leading positions"""
    targets = np.asarray(targets, dtype=np.int64)
    if logits.shape[:-1] != targets.shape:
        raise ShapeError("cross_entropy", logits.shape, targets.shape)
    classes = logits.shape[-1]
    if targets.size and (targets.min() < 0 or targets.max() >= classes):
        raise ShapeError("cross_entropy", logits.shape, targets.shape, detail="target out of range")
    w = _loss_weights(weights, targets.shape, logits.dtype)
    total = w.sum()
    scale = w / total if total > 0 else np.zeros_like(w)

    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    picked = np.take_along_axis(log_p, targets[..., None], axis=-1)[..., 0]
    loss = -(scale * picked).sum()

    def backward(g: np.ndarray):
        grad = np.exp(log_p)
        np.put_along_axis(
            grad, targets[..., None], np.take_along_axis(grad, targets[..., None], -1) - 1.0, -1
        )
        return (g * grad * scale[..., None],)

    return Tensor.from_op(
        np.asarray(loss, dtype=logits.dtype), (logits,), backward, "cross_entropy"
    )


def binary_cross_entropy(
    logits: Tensor, targets: np.ndarray, weights: Optional[np.ndarray] = None
) -> Tensor:
    """Weighted mean binary cross-entropy on raw logits"""
    targets = np.asarray(targets, dtype=logits.dtype)
    if logits.shape != targets.shape:
        raise ShapeError("binary_cross_entropy", logits.shape, targets.shape)
    w = _loss_weights(weights, targets.shape, logits.dtype)
    total = w.sum()
    scale = w / total if total > 0 else np.zeros_like(w)
    x = logits.data
    per_item = np.maximum(x, 0.0) - x * targets + np.log1p(np.exp(-np.abs(x)))
    loss = (scale * per_item).sum()

    def backward(g: np.ndarray):
        return (g * (special.expit(x) - targets) * scale,)

    return Tensor.from_op(
        np.asarray(loss, dtype=logits.dtype), (logits,), backward, "binary_cross_entropy"
    )


def _install_operators() -> None:
    Tensor.__add__ = lambda self, other: add(self, other)
    Tensor.__radd__ = lambda self, other: add(other, self)
    Tensor.__sub__ = lambda self, other: sub(self, other)
    Tensor.__rsub__ = lambda self, other: sub(other, self)
    Tensor.__mul__ = lambda self, other: mul(self, other)
    Tensor.__rmul__ = lambda self, other: mul(other, self)
    Tensor.__truediv__ = lambda self, other: div(self, other)
    Tensor.__rtruediv__ = lambda self, other: div(other, self)
    Tensor.__matmul__ = lambda self, other: matmul(self, other)
    Tensor.__rmatmul__ = lambda self, other: matmul(other, self)
    Tensor.__neg__ = neg
    Tensor.reshape = lambda self, *shape: reshape(
        self, shape[0] if len(shape) == 1 and not isinstance(shape[0], int) else shape
    )
    Tensor.transpose = lambda self, *axes: transpose(
        self, (axes[0] if len(axes) == 1 and not isinstance(axes[0], int) else axes) or None
    )
    Tensor.sum = lambda self, axis=None, keepdims=False: sum(self, axis, keepdims)
    Tensor.mean = lambda self, axis=None, keepdims=False: mean(self, axis, keepdims)


_install_operators()
