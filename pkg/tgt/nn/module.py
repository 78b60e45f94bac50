"""
Parameter containers.

A Module owns named parameter tensors and child modules. Attribute assignment
registers them, so ``named_parameters`` walks the tree in definition order and a
child reachable through several attributes is still enumerated once.
"""
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from tgt.core.exceptions import CheckpointError
from tgt.tensor import Tensor, ops


class Module:
    """Base class for every network component"""

    def __init__(self) -> None:
        object.__setattr__(self, "_parameters", {})
        object.__setattr__(self, "_modules", {})

    def __setattr__(self, name: str, value) -> None:
        if isinstance(value, Tensor) and value.requires_grad:
            self._parameters[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def register_parameter(self, name: str, array: np.ndarray) -> Tensor:
        parameter = Tensor(array, requires_grad=True, name=name)
        setattr(self, name, parameter)
        return parameter

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        seen = set()
        for name, parameter in self._walk(prefix):
            if id(parameter) not in seen:
                seen.add(id(parameter))
                yield name, parameter

    def _walk(self, prefix: str) -> Iterator[Tuple[str, Tensor]]:
        for name, parameter in self._parameters.items():
            yield prefix + name, parameter
        for name, child in self._modules.items():
            yield from child._walk(f"{prefix}{name}.")

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def zero_grad(self) -> None:
        for parameter in self.parameters():
            parameter.grad = None

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Mapping[str, np.ndarray], strict: bool = True) -> None:
        """Copy arrays into the parameters in place"""
        own = dict(self.named_parameters())
        for name, parameter in own.items():
            if name not in state:
                if strict:
                    raise CheckpointError(f"missing tensor {name!r}", tensor=name)
                continue
            array = np.asarray(state[name])
            if array.shape != parameter.shape:
                raise CheckpointError(
                    f"tensor {name!r} has shape {array.shape}, expected {parameter.shape}",
                    tensor=name,
                )
            parameter.data[...] = array
        unexpected = sorted(set(state) - set(own))
        if strict and unexpected:
            raise CheckpointError(f"unexpected tensor {unexpected[0]!r}", tensor=unexpected[0])


class ModuleList(Module):
    def __init__(self, modules: Sequence[Module] = ()):
        super().__init__()
        object.__setattr__(self, "_items", [])
        for module in modules:
            self.append(module)

    def append(self, module: Module) -> None:
        setattr(self, str(len(self._items)), module)
        self._items.append(module)

    def __getitem__(self, index: int) -> Module:
        return self._items[index]

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[Module]:
        return iter(self._items)


class Linear(Module):
    """y = x W + b over the last axis"""

    def __init__(
        self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True
    ):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        bound = 1.0 / np.sqrt(max(in_features, 1))
        self.register_parameter("weight", rng.uniform(-bound, bound, (in_features, out_features)))
        self.bias = None
        if bias:
            self.register_parameter("bias", rng.uniform(-bound, bound, out_features))

    def forward(self, x: Tensor) -> Tensor:
        lead = x.shape[:-1]
        flat = ops.reshape(x, (-1, self.in_features)) if x.ndim != 2 else x
        out = ops.matmul(flat, self.weight)
        if self.bias is not None:
            out = out + self.bias
        return ops.reshape(out, lead + (self.out_features,)) if x.ndim != 2 else out


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.register_parameter("weight", np.ones(dim))
        self.register_parameter("bias", np.zeros(dim))

    def forward(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.weight, self.bias, self.eps)


class Embedding(Module):
    """Learnable vector per categorical id"""

    def __init__(
        self, num_embeddings: int, dim: int, rng: np.random.Generator, scale: Optional[float] = None
    ):
        super().__init__()
        self.num_embeddings = num_embeddings
        scale = scale if scale is not None else 1.0 / np.sqrt(dim)
        self.register_parameter("weight", rng.normal(0.0, scale, (num_embeddings, dim)))

    def forward(self, indices: np.ndarray) -> Tensor:
        return ops.embedding(self.weight, indices)
