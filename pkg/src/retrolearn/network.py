"""Fully-connected ReLU classifiers built on the tape engine."""
from __future__ import annotations

import math
from typing import Iterator, Sequence

import numpy as np

from .tensor import Tensor, linear, relu

__all__ = ["ParameterSet", "MLP"]


class ParameterSet:
    """Named trainable tensors plus per-parameter optimizer slots.

    ``slots`` holds whatever running state an optimizer needs (momentum
    buffers, moment estimates), keyed by parameter name. ``step_count``
    increments by exactly one per optimizer step.
    """

    def __init__(self, params: dict[str, Tensor]):
        for name, p in params.items():
            if not p.requires_grad:
                raise ValueError(f"parameter {name!r} must require gradients")
        self._params = dict(params)
        self.slots: dict[str, dict[str, np.ndarray]] = {}
        self.step_count = 0

    def __len__(self) -> int:
        return len(self._params)

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self._params.items())

    def names(self) -> list[str]:
        return list(self._params)

    def num_values(self) -> int:
        return sum(p.size for p in self._params.values())

    def copy_values(self) -> dict[str, np.ndarray]:
        """Snapshot of all parameter arrays (detached copies)."""
        return {name: p.values.copy() for name, p in self._params.items()}


class MLP:
    """Multilayer perceptron with ReLU hidden activations and linear output.

    Weights use uniform Kaiming fan-in initialization,
    ``U(-sqrt(6/fan_in), sqrt(6/fan_in))``; biases start at zero. All
    randomness comes from the generator handed in, so identical generators
    give bitwise-identical networks.
    """

    def __init__(self, layer_sizes: Sequence[int], rng: np.random.Generator):
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2:
            raise ValueError("need at least an input and an output layer")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        self.layer_sizes = tuple(sizes)
        params: dict[str, Tensor] = {}
        for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
            bound = math.sqrt(6.0 / fan_in)
            params[f"w{i}"] = Tensor(
                rng.uniform(-bound, bound, size=(fan_in, fan_out)),
                requires_grad=True,
                name=f"w{i}",
            )
            params[f"b{i}"] = Tensor(np.zeros(fan_out), requires_grad=True, name=f"b{i}")
        self.params = ParameterSet(params)
        self._n_layers = len(sizes) - 1

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    def forward(self, x) -> Tensor:
        """Map a batch of feature rows to logits."""
        h = x if isinstance(x, Tensor) else Tensor(x)
        for i in range(self._n_layers):
            h = linear(h, self.params[f"w{i}"], self.params[f"b{i}"])
            if i < self._n_layers - 1:
                h = relu(h)
        return h

    def logits(self, x: np.ndarray) -> np.ndarray:
        """Plain-array forward pass for evaluation paths."""
        return self.forward(np.asarray(x, dtype=np.float64)).values
