"""
Feedforward network layers with a flat parameter registry
"""

from abc import ABC
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple
import logging

import numpy as np

from ..utils.errors import ShapeError
from .tensor import Tensor, as_tensor, log_softmax, relu, softmax

logger = logging.getLogger(__name__)


class Module(ABC):
    """
    Base class for anything that owns trainable tensors.

    Every ``Tensor`` attribute is a parameter; ``Module`` attributes and
    lists of modules are traversed in attribute order, which fixes the
    layout of ``parameter_vector``.
    """

    frozen = False

    def named_parameters(self, prefix: str = '') -> Dict[str, Tensor]:
        params: Dict[str, Tensor] = {}
        for name, value in vars(self).items():
            path = f"{prefix}{name}"
            if isinstance(value, Tensor):
                params[path] = value
            elif isinstance(value, Module):
                params.update(value.named_parameters(f"{path}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        params.update(item.named_parameters(f"{path}.{i}."))
        return params

    def parameters(self) -> List[Tensor]:
        return list(self.named_parameters().values())

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def parameter_vector(self) -> np.ndarray:
        params = self.parameters()
        if not params:
            return np.zeros(0)
        return np.concatenate([p.values.ravel() for p in params])

    def load_parameter_vector(self, vector: np.ndarray) -> None:
        vector = np.asarray(vector, dtype=np.float64)
        if vector.size != self.num_parameters():
            raise ShapeError('load_parameter_vector', vector.shape, (self.num_parameters(),))
        offset = 0
        for p in self.parameters():
            p.values = vector[offset:offset + p.size].reshape(p.shape).copy()
            offset += p.size

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.values.copy() for name, p in self.named_parameters().items()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        missing = set(params) - set(state)
        if missing:
            raise KeyError(f"Missing parameters in state: {sorted(missing)}")
        for name, p in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ShapeError('load_state_dict', p.shape, value.shape, detail=name)
            p.values = value.copy()

    def freeze(self) -> None:
        """Stop gradient tracking; frozen parameters are read-only snapshots."""
        for p in self.parameters():
            p.requires_grad = False
            p.grad = None
        self.frozen = True

    def randomize_parameters(self, scale: float = 0.5, seed: int = 0) -> None:
        """Overwrite every parameter with N(0, scale^2) draws."""
        rng = np.random.default_rng(seed)
        for p in self.parameters():
            p.values = scale * rng.standard_normal(p.shape)


def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Linear(Module):
    """Affine layer ``x @ weight + bias``."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, zero: bool = False):
        if in_dim < 1 or out_dim < 1:
            raise ShapeError('linear', (in_dim, out_dim), detail='widths must be positive')
        self.in_dim = in_dim
        self.out_dim = out_dim
        weight = np.zeros((in_dim, out_dim)) if zero else glorot_uniform(in_dim, out_dim, rng)
        self.weight = Tensor(weight, requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        x = as_tensor(x)
        if x.shape[-1] != self.in_dim:
            raise ShapeError('linear', x.shape, self.weight.shape)
        return x @ self.weight + self.bias


class Activation(str, Enum):
    RELU = 'relu'
    IDENTITY = 'identity'
    SOFTMAX = 'softmax'


def _activate(x: Tensor, activation: Activation) -> Tensor:
    if activation is Activation.RELU:
        return relu(x)
    if activation is Activation.SOFTMAX:
        return softmax(x)
    return x


class Mlp(Module):
    """
    Multilayer perceptron with ReLU hidden layers.

    Args:
        sizes: Layer widths including input and output, e.g. ``[4, 64, 64, 2]``
        rng: Generator used for weight initialisation
        output_activation: Activation applied after the final layer
        zero_output: Initialise the final layer to zero (identity-start flows)
    """

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator,
                 output_activation: str = 'identity', zero_output: bool = False):
        if len(sizes) < 2:
            raise ShapeError('mlp', tuple(sizes), detail='need at least input and output width')
        self.sizes = tuple(int(s) for s in sizes)
        self.hidden_activation = Activation.RELU
        self.output_activation = Activation(output_activation)
        last = len(self.sizes) - 2
        self.layers = [Linear(n_in, n_out, rng, zero=zero_output and i == last)
                       for i, (n_in, n_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:]))]

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    @property
    def layer_weights(self) -> List[Tuple[Tensor, Tensor]]:
        return [(layer.weight, layer.bias) for layer in self.layers]

    def logits(self, x: Tensor) -> Tensor:
        """Output of the final affine layer before the output activation."""
        x = as_tensor(x)
        if x.shape[-1] != self.in_dim:
            raise ShapeError('mlp', x.shape, (self.in_dim,),
                             detail='input width does not match first layer')
        for layer in self.layers[:-1]:
            x = relu(layer(x))
        return self.layers[-1](x)

    def log_probabilities(self, x: Tensor) -> Tensor:
        return log_softmax(self.logits(x))

    def __call__(self, x: Tensor) -> Tensor:
        return _activate(self.logits(x), self.output_activation)


def mlp_forward(net: Mlp, x: Tensor) -> Tensor:
    """Functional form of ``Mlp.__call__``."""
    return net(x)
