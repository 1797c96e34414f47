"""
Small fully connected networks in numpy with hand-written backprop.

An MLP is a stack of affine layers with ReLU between them and a linear
output layer. With no hidden layers it is a linear map, which is how the
lite agents run on Fourier features.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np


@dataclass
class Layer:
    """Affine map x @ weight + bias."""

    weight: np.ndarray
    bias: Optional[np.ndarray]


class MLP:
    """
    ReLU multilayer perceptron.

    Args:
        input_dim: Input width
        output_dim: Output width
        hidden: Hidden layer widths, e.g. (64, 64); () gives a linear model
        use_bias: Include bias vectors
        rng: Generator for the uniform fan-in initialization
    """

    def __init__(
        self,
        input_dim: int,
        output_dim: int,
        hidden: Sequence[int] = (64, 64),
        use_bias: bool = True,
        rng: Optional[np.random.Generator] = None,
    ) -> None:
        rng = rng if rng is not None else np.random.default_rng(0)
        widths = [input_dim, *hidden, output_dim]
        self.use_bias = use_bias
        self.layers: List[Layer] = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weight = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            bias = rng.uniform(-bound, bound, size=fan_out) if use_bias else None
            self.layers.append(Layer(weight, bias))

    @property
    def input_dim(self) -> int:
        return int(self.layers[0].weight.shape[0])

    @property
    def output_dim(self) -> int:
        return int(self.layers[-1].weight.shape[1])

    def parameters(self) -> List[np.ndarray]:
        """Parameter arrays in a fixed order; optimizers update them in place."""
        params = []
        for layer in self.layers:
            params.append(layer.weight)
            if layer.bias is not None:
                params.append(layer.bias)
        return params

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
        """
        Evaluate the network on a batch.

        Args:
            x: Array (B, input_dim)

        Returns:
            (output (B, output_dim), activations cache for backward)
        """
        activations = [x]
        h = x
        for i, layer in enumerate(self.layers):
            h = h @ layer.weight
            if layer.bias is not None:
                h = h + layer.bias
            if i < len(self.layers) - 1:
                h = np.maximum(h, 0.0)
            activations.append(h)
        return h, activations

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, activations: List[np.ndarray], grad_out: np.ndarray) -> List[np.ndarray]:
        """
        Vector-Jacobian product of the output with grad_out.

        Returns:
            Gradients aligned with parameters()
        """
        grads: List[np.ndarray] = []
        delta = grad_out
        for i in reversed(range(len(self.layers))):
            layer = self.layers[i]
            inputs = activations[i]
            layer_grads = [inputs.T @ delta]
            if layer.bias is not None:
                layer_grads.append(delta.sum(axis=0))
            grads = layer_grads + grads
            if i > 0:
                delta = (delta @ layer.weight.T) * (activations[i] > 0)
        return grads

    def copy(self) -> MLP:
        return copy.deepcopy(self)

    def load_from(self, other: MLP) -> None:
        """Copy other's parameter values into this network."""
        for mine, theirs in zip(self.parameters(), other.parameters()):
            mine[...] = theirs


class SGD:
    """Plain gradient descent: p <- p - lr * g."""

    def __init__(self, learning_rate: float) -> None:
        self.learning_rate = learning_rate

    def step(self, params: List[np.ndarray], grads: List[np.ndarray]) -> None:
        for p, g in zip(params, grads):
            p -= self.learning_rate * g


class Adam:
    """
    Adam with bias-corrected first and second moments.

    Args:
        learning_rate: Step size
        beta1: First-moment decay (0.9)
        beta2: Second-moment decay (0.999)
        eps: Denominator stabilizer (1e-8)
    """

    def __init__(
        self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8
    ) -> None:
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: List[np.ndarray] = []
        self.v: List[np.ndarray] = []

    def step(self, params: List[np.ndarray], grads: List[np.ndarray]) -> None:
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + self.eps)


def make_optimizer(name: str, learning_rate: float) -> SGD | Adam:
    """
    Raises:
        ValueError: If name is not "sgd" or "adam"
    """
    key = name.lower()
    if key == "sgd":
        return SGD(learning_rate)
    if key == "adam":
        return Adam(learning_rate)
    raise ValueError(f"Unknown optimizer: {name}. Valid options: sgd, adam")
