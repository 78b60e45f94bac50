from tgt.tensor import ops
from tgt.tensor.gradcheck import grad_check
from tgt.tensor.serialization import load_tensors, save_tensors
from tgt.tensor.tensor import (
    Tensor,
    as_tensor,
    default_dtype,
    get_default_dtype,
    is_grad_enabled,
    no_grad,
    set_default_dtype,
)

__all__ = [
    "Tensor",
    "as_tensor",
    "default_dtype",
    "get_default_dtype",
    "grad_check",
    "is_grad_enabled",
    "load_tensors",
    "no_grad",
    "ops",
    "save_tensors",
    "set_default_dtype",
]
